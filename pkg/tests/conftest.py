import pytest

from nanonav.config import SimConfig
from nanonav.environment import CancerCell, Environment, Obstacle
from nanonav.field import BiomarkerSource, Vec3


def make_env(cells=(), obstacles=(), side=50.0, cell_step=0.25, confinement=5.0, sigma=15.0, seed=0):
    """Hand-built world; ``cells`` are positions, ``obstacles`` (center, radius) pairs."""
    cell_objs = []
    for c in cells:
        c = Vec3(*map(float, c))
        cell_objs.append(CancerCell(c, c, confinement, BiomarkerSource(c, sigma=sigma)))
    obs = [Obstacle(Vec3(*map(float, c)), float(r)) for c, r in obstacles]
    return Environment(side=side, cells=cell_objs, obstacles=obs, rng_seed=seed, cell_step=cell_step)


@pytest.fixture
def default_config():
    return SimConfig()
