"""Named, independently seeded random streams derived from one master seed.

Every stochastic subsystem gets its own PCG64 generator keyed by
``(master_seed, stream, *indices)``. PCG64 and ``SeedSequence`` produce the
same bits on every platform numpy supports, so runs are portable.
"""

from __future__ import annotations

import numpy as np

PLACEMENT = 0
CELL_MOTION = 1
SPAWN = 2
POLICY = 3
AGENT = 4


def stream(master_seed: int, kind: int, *indices: int) -> np.random.Generator:
    if master_seed < 0:
        raise ValueError(f"seed must be non-negative, got {master_seed}")
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(kind, *indices))
    return np.random.Generator(np.random.PCG64(seq))


def unit_vector(rng: np.random.Generator) -> tuple[float, float, float]:
    """Uniform direction on the unit sphere, by rejection from the cube."""
    while True:
        x, y, z = rng.random(3) * 2.0 - 1.0
        n2 = x * x + y * y + z * z
        if 1e-12 < n2 <= 1.0:
            n = n2**0.5
            return (float(x / n), float(y / n), float(z / n))


def in_ball(rng: np.random.Generator, radius: float) -> tuple[float, float, float]:
    """Uniform point in a ball of the given radius centred on the origin."""
    while True:
        x, y, z = rng.random(3) * 2.0 - 1.0
        if x * x + y * y + z * z <= 1.0:
            return (float(x * radius), float(y * radius), float(z * radius))
