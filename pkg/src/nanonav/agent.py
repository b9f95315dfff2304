"""Tabular Q-learning agent: state coding, macro-actions, epsilon-greedy, rewards."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from nanonav import rng as rngs
from nanonav.environment import Observation
from nanonav.field import Vec3

REWARD_CAPTURE = 10.0
REWARD_OBSTACLE_HIT = -1.0
REWARD_PER_UNIT_APPROACH = 1.0


class Action(IntEnum):
    """Macro-actions. The integer order doubles as the argmax tie-break order."""

    TOWARD_BIOMARKER = 0
    TOWARD_CELL = 1
    AVOID_OBSTACLE = 2


ACTIONS = tuple(Action)
GRADIENT_ZERO_CODE = 8


class StateId(NamedTuple):
    concentration_bin: int
    gradient_octant: int
    obstacle_near: bool
    cell_in_range: bool

    @property
    def code(self) -> str:
        return f"{self.concentration_bin}:{self.gradient_octant}:{int(self.obstacle_near)}:{int(self.cell_in_range)}"

    @classmethod
    def from_code(cls, code: str) -> "StateId":
        b, o, n, r = code.split(":")
        if n not in ("0", "1") or r not in ("0", "1"):
            raise ValueError(f"bad state code {code!r}")
        return cls(int(b), int(o), n == "1", r == "1")


@dataclass(frozen=True)
class DiscretizationParams:
    c_ref: float = 1.0
    bins: int = 8
    bins_per_decade: int = 2
    g_eps: float = 1e-12
    obstacle_alert_radius: float = 0.5

    def state_count(self) -> int:
        return self.bins * 9 * 2 * 2


@dataclass(frozen=True)
class LearningParams:
    alpha: float = 0.1
    gamma: float = 0.9

    def __post_init__(self) -> None:
        # alpha = 0 freezes the table; SimConfig still demands alpha > 0
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class EpsilonSchedule:
    epsilon0: float = 1.0
    decay: float = 0.995
    epsilon_min: float = 0.05

    def __post_init__(self) -> None:
        if not 0 <= self.epsilon0 <= 1:
            raise ValueError(f"epsilon0 must be in [0, 1], got {self.epsilon0}")
        if not 0 < self.decay <= 1:
            raise ValueError(f"decay must be in (0, 1], got {self.decay}")
        if not 0 <= self.epsilon_min <= 1:
            raise ValueError(f"epsilon_min must be in [0, 1], got {self.epsilon_min}")


@dataclass
class QTable:
    """Sparse action-value table; missing entries read as 0."""

    values: dict[tuple[StateId, Action], float] = field(default_factory=dict)
    visits: dict[tuple[StateId, Action], int] = field(default_factory=dict)

    def get(self, s: StateId, a: Action) -> float:
        return self.values.get((s, a), 0.0)

    def row(self, s: StateId) -> list[float]:
        v = self.values
        return [v.get((s, a), 0.0) for a in ACTIONS]

    def max_value(self, s: StateId) -> float:
        return max(self.row(s))

    def __len__(self) -> int:
        return len(self.values)


def discretize(obs: Observation, params: DiscretizationParams) -> StateId:
    c = obs.concentration
    if c > 0 and params.c_ref > 0:
        b = math.floor(math.log10(c / params.c_ref) * params.bins_per_decade) + params.bins
        b = min(max(b, 0), params.bins - 1)
    else:
        b = 0

    g = obs.gradient
    if g.norm() < params.g_eps:
        octant = GRADIENT_ZERO_CODE
    else:
        octant = (g.x < 0) << 2 | (g.y < 0) << 1 | (g.z < 0)

    return StateId(
        b,
        octant,
        obs.nearest_obstacle_distance < params.obstacle_alert_radius,
        math.isfinite(obs.nearest_cell_distance),
    )


def _perpendicular(n: Vec3) -> Vec3:
    # cross with the axis least aligned with n
    ax, ay, az = abs(n.x), abs(n.y), abs(n.z)
    if ax <= ay and ax <= az:
        e = Vec3(1.0, 0.0, 0.0)
    elif ay <= az:
        e = Vec3(0.0, 1.0, 0.0)
    else:
        e = Vec3(0.0, 0.0, 1.0)
    c = Vec3(n.y * e.z - n.z * e.y, n.z * e.x - n.x * e.z, n.x * e.y - n.y * e.x)
    return c.unit()


def _uphill(obs: Observation, g_eps: float, g: np.random.Generator | None) -> Vec3:
    grad = obs.gradient
    if grad.norm() >= g_eps:
        return grad.unit()
    if g is None:
        raise ValueError("a random stream is required when the gradient vanishes")
    return Vec3(*rngs.unit_vector(g))


def action_to_displacement(
    action: Action,
    obs: Observation,
    step_size: float,
    rng: np.random.Generator | None = None,
    g_eps: float = 1e-12,
) -> Vec3:
    """Turn a macro-action into a displacement of length ``step_size``.

    AvoidObstacle slides along the tangent plane of the nearest obstacle,
    keeping whatever part of the uphill direction is not aimed at its centre.
    """
    if not step_size > 0:
        raise ValueError(f"step_size must be > 0, got {step_size}")
    if action is Action.TOWARD_CELL and obs.nearest_cell_direction is not None:
        return obs.nearest_cell_direction.scale(step_size)
    if action is Action.AVOID_OBSTACLE and obs.nearest_obstacle_direction is not None:
        n = obs.nearest_obstacle_direction
        u = _uphill(obs, g_eps, rng)
        t = u - n.scale(u.dot(n))
        if t.norm() < 1e-9:
            t = _perpendicular(n)
        return t.unit().scale(step_size)
    return _uphill(obs, g_eps, rng).scale(step_size)


def greedy_action(q: QTable, s: StateId) -> Action:
    row = q.row(s)
    best = 0
    for i in (1, 2):
        if row[i] > row[best]:
            best = i
    return ACTIONS[best]


def select_action(q: QTable, s: StateId, epsilon: float, rng: np.random.Generator) -> Action:
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if epsilon > 0 and rng.random() < epsilon:
        return ACTIONS[int(rng.integers(len(ACTIONS)))]
    return greedy_action(q, s)


def update_q(
    q: QTable,
    s: StateId,
    a: Action,
    r: float,
    s_next: StateId | None,
    params: LearningParams,
) -> float:
    """One Q-learning backup. ``s_next=None`` marks a terminal transition."""
    key = (s, a)
    old = q.values.get(key, 0.0)
    future = 0.0 if s_next is None else q.max_value(s_next)
    new = old + params.alpha * (r + params.gamma * future - old)
    if not math.isfinite(new):
        raise FloatingPointError(f"non-finite Q-value for {s.code}/{a.name}")
    q.values[key] = new
    q.visits[key] = q.visits.get(key, 0) + 1
    return new


def compute_reward(
    captured: bool,
    obstacle_hit: bool,
    delta_toward_biomarker: float,
    mode: str = "proportional",
) -> float:
    """Capture bonus, collision penalty and approach shaping, summed.

    ``delta_toward_biomarker`` is previous minus current distance to the
    nearest source; moving away earns nothing. In ``flat`` mode any approach
    earns a single unit.
    """
    r = 0.0
    if captured:
        r += REWARD_CAPTURE
    if obstacle_hit:
        r += REWARD_OBSTACLE_HIT
    if delta_toward_biomarker > 0:
        if mode == "flat":
            r += REWARD_PER_UNIT_APPROACH
        else:
            r += REWARD_PER_UNIT_APPROACH * delta_toward_biomarker
    return r


def decay_epsilon(schedule: EpsilonSchedule, episode_index: int) -> float:
    if episode_index < 0:
        raise ValueError(f"episode_index must be >= 0, got {episode_index}")
    return max(schedule.epsilon_min, schedule.epsilon0 * schedule.decay**episode_index)
