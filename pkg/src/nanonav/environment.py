"""The simulated world: a cube with moving cancer cells and spherical obstacles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from nanonav import rng as rngs
from nanonav.config import SimConfig
from nanonav.field import BiomarkerSource, FieldModel, Vec3, distance, total_field

MAX_PLACEMENT_ATTEMPTS = 10_000
INF = math.inf


class InfeasibleConfigError(RuntimeError):
    """Random placement could not satisfy the geometric constraints."""


@dataclass(slots=True)
class CancerCell:
    position: Vec3
    confinement_center: Vec3
    confinement_radius: float
    source: BiomarkerSource
    alive: bool = True

    def set_position(self, p: Vec3) -> None:
        self.position = p
        self.source.position = p


@dataclass(frozen=True, slots=True)
class Obstacle:
    center: Vec3
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError(f"obstacle radius must be > 0, got {self.radius}")


class MoveKind(Enum):
    MOVED = "moved"
    OBSTACLE_HIT = "obstacle_hit"
    BOUNDARY_CLAMPED = "boundary_clamped"


@dataclass(frozen=True, slots=True)
class MoveOutcome:
    kind: MoveKind
    position: Vec3


@dataclass(slots=True)
class Observation:
    position: Vec3
    concentration: float
    gradient: Vec3
    nearest_obstacle_distance: float = INF
    nearest_obstacle_direction: Vec3 | None = None
    nearest_cell_distance: float = INF
    nearest_cell_direction: Vec3 | None = None
    nearest_source_distance: float = INF


@dataclass
class Environment:
    side: float
    cells: list[CancerCell]
    obstacles: list[Obstacle]
    field_model: FieldModel = FieldModel.GAUSSIAN
    rng_seed: int = 0
    d_min: float = 1e-3
    cell_step: float = 0.25
    robot_count: int = 1
    step_count: int = 0
    spawns: list[Vec3] = field(default_factory=list)
    _initial_cells: list[Vec3] = field(default_factory=list, repr=False)
    _cell_rng: np.random.Generator | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not self.side > 0:
            raise ValueError(f"side must be > 0, got {self.side}")
        if not self._initial_cells:
            self._initial_cells = [c.position for c in self.cells]
        if self._cell_rng is None:
            self._cell_rng = rngs.stream(self.rng_seed, rngs.CELL_MOTION, 0)

    def alive_sources(self) -> list[BiomarkerSource]:
        return [c.source for c in self.cells if c.alive]

    def contains(self, p: Vec3) -> bool:
        s = self.side
        return 0.0 <= p.x <= s and 0.0 <= p.y <= s and 0.0 <= p.z <= s

    def inside_obstacle(self, p: Vec3) -> bool:
        return any(distance(p, o.center) < o.radius for o in self.obstacles)

    def reset(self, episode: int = 0) -> None:
        """Restore cells to their start and draw fresh robot spawns for ``episode``."""
        for cell, start in zip(self.cells, self._initial_cells):
            cell.set_position(start)
            cell.alive = True
        self.step_count = 0
        self._cell_rng = rngs.stream(self.rng_seed, rngs.CELL_MOTION, episode)
        spawn_rng = rngs.stream(self.rng_seed, rngs.SPAWN, episode)
        self.spawns = [self._sample_free_point(spawn_rng) for _ in range(self.robot_count)]

    def _sample_free_point(self, g: np.random.Generator) -> Vec3:
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            p = Vec3(*(float(v) for v in g.random(3) * self.side))
            if not self.inside_obstacle(p):
                return p
        raise InfeasibleConfigError(
            f"no obstacle-free spawn found after {MAX_PLACEMENT_ATTEMPTS} attempts"
        )


def new_environment(config: SimConfig, seed: int | None = None) -> Environment:
    """Place cells and obstacles uniformly at random from the placement stream.

    Each cell's whole confinement ball lies inside the cube and is kept clear
    of every obstacle, so a wandering cell can never enter one.
    """
    seed = config.seed if seed is None else seed
    g = rngs.stream(seed, rngs.PLACEMENT)
    side = config.side
    cr = config.confinement_radius

    cells = []
    for _ in range(config.cell_count):
        c = Vec3(*(float(v) for v in cr + g.random(3) * (side - 2 * cr)))
        src = BiomarkerSource(c, peak=config.peak, sigma=config.sigma, strength=config.peak)
        cells.append(CancerCell(c, c, cr, src))

    obstacles = []
    rmin, rmax = config.obstacle_radius_range
    for k in range(config.obstacle_count):
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            r = float(rmin + g.random() * (rmax - rmin))
            u = g.random(3)
            if 2 * r > side:
                continue
            center = Vec3(*(float(v) for v in r + u * (side - 2 * r)))
            if all(distance(center, cell.confinement_center) > r + cr for cell in cells):
                obstacles.append(Obstacle(center, r))
                break
        else:
            raise InfeasibleConfigError(
                f"could not place obstacle {k} (radius range {rmin}-{rmax}) in a cube of side "
                f"{side} after {MAX_PLACEMENT_ATTEMPTS} attempts"
            )

    env = Environment(
        side=side,
        cells=cells,
        obstacles=obstacles,
        field_model=config.field_model,
        rng_seed=seed,
        d_min=config.d_min,
        cell_step=config.cell_step,
        robot_count=config.robot_count,
    )
    env.reset(0)
    return env


def move_cancer_cells(env: Environment) -> Environment:
    """One confined random-walk step for every alive cell.

    A step leaving the confinement ball has its radial overshoot reflected
    back inside; if that still overshoots (step larger than the ball) the
    point is pulled onto the ball.
    """
    g = env._cell_rng
    for cell in env.cells:
        if not cell.alive:
            continue
        R = cell.confinement_radius
        if R == 0 or env.cell_step == 0:
            continue
        d = rngs.in_ball(g, env.cell_step)
        c = cell.confinement_center
        rel = cell.position - c + Vec3(*d)
        r = rel.norm()
        if r > R:
            rel = rel.scale((2.0 * R - r) / r)
            r2 = rel.norm()
            if r2 > R:
                rel = rel.scale(R / r2)
        new = c + rel
        while distance(new, c) > R:
            rel = rel.scale(1.0 - 1e-12)
            new = c + rel
        cell.set_position(new)
    env.step_count += 1
    return env


def segment_hits_sphere(a: Vec3, b: Vec3, center: Vec3, radius: float) -> bool:
    """True if the closed segment a-b passes strictly inside the sphere."""
    # scalar arithmetic: this is the hot loop of every step
    ax, ay, az = a
    dx, dy, dz = b[0] - ax, b[1] - ay, b[2] - az
    dd = dx * dx + dy * dy + dz * dz
    if dd == 0.0:
        return math.dist(a, center) < radius
    cx, cy, cz = center
    t = ((cx - ax) * dx + (cy - ay) * dy + (cz - az) * dz) / dd
    t = min(max(t, 0.0), 1.0)
    return math.dist((ax + dx * t, ay + dy * t, az + dz * t), center) < radius


def attempt_move(env: Environment, start: Vec3, displacement: Vec3) -> MoveOutcome:
    """Resolve a move: blocked by obstacles, clamped at the cube faces."""
    target = start + displacement
    s = env.side
    clamped = Vec3(min(max(target.x, 0.0), s), min(max(target.y, 0.0), s), min(max(target.z, 0.0), s))
    was_clamped = clamped != target
    for o in env.obstacles:
        if segment_hits_sphere(start, target, o.center, o.radius) or (
            was_clamped and segment_hits_sphere(start, clamped, o.center, o.radius)
        ):
            return MoveOutcome(MoveKind.OBSTACLE_HIT, start)
    if was_clamped:
        return MoveOutcome(MoveKind.BOUNDARY_CLAMPED, clamped)
    return MoveOutcome(MoveKind.MOVED, target)


def sense(env: Environment, position: Vec3, sensing_radius: float) -> Observation:
    sources = env.alive_sources()
    conc, grad = total_field(position, sources, env.field_model, env.d_min)
    obs = Observation(position, conc, grad)

    for o in env.obstacles:
        gap = distance(position, o.center) - o.radius
        if gap < obs.nearest_obstacle_distance:
            obs.nearest_obstacle_distance = max(gap, 0.0)
            to_center = o.center - position
            n = to_center.norm()
            obs.nearest_obstacle_direction = to_center.scale(1.0 / n) if n > 0 else None

    nearest = None
    for cell in env.cells:
        if cell.alive:
            d = distance(position, cell.position)
            if d < obs.nearest_source_distance:
                obs.nearest_source_distance = d
                nearest = cell
    if nearest is not None and obs.nearest_source_distance <= sensing_radius:
        d = obs.nearest_source_distance
        obs.nearest_cell_distance = d
        if d > 0:
            obs.nearest_cell_direction = (nearest.position - position).scale(1.0 / d)
    return obs
