"""Scalar biomarker fields: Gaussian density, inverse-square aggregate, heatmaps.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

FD_STEP_INVERSE_SQUARE = 1e-4
DEFAULT_D_MIN = 1e-3


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    def __add__(self, other: "Vec3") -> "Vec3":  # type: ignore[override]
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scale(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def unit(self) -> "Vec3":
        n = self.norm()
        return Vec3(self.x / n, self.y / n, self.z / n)


ZERO = Vec3(0.0, 0.0, 0.0)


def distance(a: Vec3, b: Vec3) -> float:
    dx = a.x - b.x
    dy = a.y - b.y
    dz = a.z - b.z
    return math.sqrt(dx * dx + dy * dy + dz * dz)


@dataclass(slots=True)
class BiomarkerSource:
    """A point emitter. ``peak``/``sigma`` drive the Gaussian model,
    ``strength`` the inverse-square model."""

    position: Vec3
    peak: float = 1.0
    sigma: float = 15.0
    strength: float = 1.0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.peak >= 0:
            raise ValueError(f"peak must be >= 0, got {self.peak}")
        if not self.strength >= 0:
            raise ValueError(f"strength must be >= 0, got {self.strength}")
        self.position = Vec3(*map(float, self.position))


class FieldModel(str, Enum):
    GAUSSIAN = "gaussian"
    INVERSE_SQUARE = "inverse_square"


class Plane(str, Enum):
    XY = "XY"
    XZ = "XZ"
    YZ = "YZ"


# (row axis, column axis, fixed axis) as component indices
_PLANE_AXES = {Plane.XY: (0, 1, 2), Plane.XZ: (0, 2, 1), Plane.YZ: (1, 2, 0)}


@dataclass
class HeatmapGrid:
    plane: Plane
    slice_coord: float
    resolution: int
    values: np.ndarray  # shape (resolution, resolution); row = first-named axis

    def cell_centers(self, side: float) -> np.ndarray:
        return cell_centers(side, self.resolution)


def gaussian_density(point: Vec3, source: BiomarkerSource) -> float:
    p = source.position
    dx = point[0] - p.x
    dy = point[1] - p.y
    dz = point[2] - p.z
    s2 = source.sigma * source.sigma
    return source.peak * math.exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * s2))


def gaussian_gradient(point: Vec3, source: BiomarkerSource) -> Vec3:
    rho = gaussian_density(point, source)
    p = source.position
    s2 = source.sigma * source.sigma
    return Vec3(
        -(point[0] - p.x) / s2 * rho,
        -(point[1] - p.y) / s2 * rho,
        -(point[2] - p.z) / s2 * rho,
    )


def aggregate_concentration(
    point: Vec3, sources: Sequence[BiomarkerSource], d_min: float = DEFAULT_D_MIN
) -> float:
    """Sum of ``strength / d**2`` with distances clamped below at ``d_min``."""
    if not d_min > 0:
        raise ValueError(f"d_min must be > 0, got {d_min}")
    total = 0.0
    for s in sources:
        d = max(distance(point, s.position), d_min)
        total += s.strength / (d * d)
    return total


def total_field(
    point: Vec3,
    sources: Sequence[BiomarkerSource],
    model: FieldModel = FieldModel.GAUSSIAN,
    d_min: float = DEFAULT_D_MIN,
) -> tuple[float, Vec3]:
    """Superposed concentration and gradient at ``point``.

    The inverse-square model has no closed-form gradient here; it is taken by
    central differences with step ``FD_STEP_INVERSE_SQUARE``.
    """
    if model is FieldModel.GAUSSIAN:
        c = 0.0
        gx = gy = gz = 0.0
        for s in sources:
            g = gaussian_gradient(point, s)
            c += gaussian_density(point, s)
            gx += g.x
            gy += g.y
            gz += g.z
        return c, Vec3(gx, gy, gz)

    if not sources:
        return 0.0, ZERO
    c = aggregate_concentration(point, sources, d_min)
    h = FD_STEP_INVERSE_SQUARE
    grad = []
    for axis in range(3):
        hi = list(point)
        lo = list(point)
        hi[axis] += h
        lo[axis] -= h
        f_hi = aggregate_concentration(Vec3(*hi), sources, d_min)
        f_lo = aggregate_concentration(Vec3(*lo), sources, d_min)
        grad.append((f_hi - f_lo) / (2.0 * h))
    return c, Vec3(*grad)


def cell_centers(side: float, resolution: int) -> np.ndarray:
    return (np.arange(resolution) + 0.5) * (side / resolution)


def sample_heatmap(
    sources: Sequence[BiomarkerSource],
    model: FieldModel,
    plane: Plane | str,
    slice_coord: float,
    side: float,
    resolution: int,
    d_min: float = DEFAULT_D_MIN,
) -> HeatmapGrid:
    """Concentration on the cell centres of a planar cross-section of the cube."""
    plane = Plane(plane)
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    if not 0.0 <= slice_coord <= side:
        raise ValueError(f"slice {slice_coord} outside [0, {side}]")
    rows, cols, fixed = _PLANE_AXES[plane]
    centers = cell_centers(side, resolution)
    values = np.zeros((resolution, resolution))
    coords = [0.0, 0.0, 0.0]
    coords[fixed] = float(slice_coord)
    for i, a in enumerate(centers):
        coords[rows] = float(a)
        for j, b in enumerate(centers):
            coords[cols] = float(b)
            values[i, j] = total_field(Vec3(*coords), sources, model, d_min)[0]
    return HeatmapGrid(plane, float(slice_coord), resolution, values)


def in_plane_cell(plane: Plane | str, point: Vec3, side: float, resolution: int) -> tuple[int, int]:
    """Grid cell (row, col) whose area contains the projection of ``point``."""
    rows, cols, _ = _PLANE_AXES[Plane(plane)]
    width = side / resolution

    def idx(v: float) -> int:
        return min(max(int(math.floor(v / width)), 0), resolution - 1)

    return idx(point[rows]), idx(point[cols])
