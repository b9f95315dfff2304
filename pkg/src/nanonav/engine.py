"""Episode loop, training loop and Table-1 style metrics.

Per step, every robot senses the start-of-step world, all robots move in
index order, the cells take one random-walk step, and only then are captures
and rewards evaluated against the new geometry.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from nanonav import rng as rngs
from nanonav.agent import (
    Action,
    DiscretizationParams,
    EpsilonSchedule,
    LearningParams,
    QTable,
    StateId,
    action_to_displacement,
    compute_reward,
    decay_epsilon,
    discretize,
    select_action,
    update_q,
)
from nanonav.config import SimConfig
from nanonav.environment import (
    Environment,
    MoveKind,
    Observation,
    attempt_move,
    move_cancer_cells,
    new_environment,
    sense,
)
from nanonav.field import FieldModel, Vec3

log = logging.getLogger(__name__)

Policy = Callable[[Observation, StateId], Action]


class Mode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


class Status(str, Enum):
    ALL_CAPTURED = "AllCaptured"
    STEP_LIMIT = "StepLimit"


@dataclass(slots=True)
class StepRecord:
    step: int
    robot_id: int
    position: Vec3
    concentration: float
    distance_to_cell: float
    action: Action
    reward: float
    cumulative_reward: float
    captured: bool = False
    obstacle_hit: bool = False


@dataclass
class EpisodeTrace:
    records: list[StepRecord] = field(default_factory=list)
    status: Status = Status.STEP_LIMIT
    robot_count: int = 1

    @property
    def steps(self) -> int:
        return self.records[-1].step + 1 if self.records else 0


@dataclass
class EpisodeMetrics:
    total_steps: int = 0
    final_distance: float = 0.0
    average_distance: float = 0.0
    average_concentration: float = 0.0
    wall_clock_seconds: float | None = None
    captures: int = 0
    obstacle_hits: int = 0
    empty: bool = False


@dataclass
class TrainingReport:
    config: SimConfig
    metrics: list[EpisodeMetrics] = field(default_factory=list)
    epsilons: list[float] = field(default_factory=list)
    steps_to_capture: list[int] = field(default_factory=list)
    statuses: list[Status] = field(default_factory=list)
    qtables: list[QTable] = field(default_factory=list)
    last_trace: EpisodeTrace | None = None


def discretization_for(config: SimConfig) -> DiscretizationParams:
    if config.field_model is FieldModel.GAUSSIAN:
        c_ref = config.peak
    else:
        # strongest plausible inverse-square reading: a source at capture range
        c_ref = config.peak / max(config.capture_threshold, config.d_min) ** 2
    return DiscretizationParams(c_ref=c_ref, obstacle_alert_radius=config.obstacle_alert_radius)


def _qtables_for(q: QTable | list[QTable], robots: int) -> list[QTable]:
    if isinstance(q, QTable):
        return [q] * robots
    if len(q) != robots:
        raise ValueError(f"need {robots} Q-tables, got {len(q)}")
    return list(q)


def run_episode(
    env: Environment,
    q: QTable | list[QTable],
    config: SimConfig,
    mode: Mode | str = Mode.TRAIN,
    epsilon: float = 0.0,
    episode: int = 0,
    policy: Policy | None = None,
) -> tuple[EpisodeTrace, EpisodeMetrics]:
    """Run one episode from the environment's current spawns.

    A single QTable is shared by every robot; a list gives one per robot.
    ``policy`` replaces epsilon-greedy selection entirely (used for scripted
    baselines). Eval mode never updates Q and always acts greedily.
    """
    mode = Mode(mode)
    started = time.perf_counter()
    robots = len(env.spawns)
    tables = _qtables_for(q, robots)
    disc = discretization_for(config)
    learn = LearningParams(config.alpha, config.gamma)
    eps = epsilon if mode is Mode.TRAIN else 0.0
    seed = env.rng_seed
    policy_rngs = [rngs.stream(seed, rngs.POLICY, episode, i) for i in range(robots)]
    agent_rngs = [rngs.stream(seed, rngs.AGENT, episode, i) for i in range(robots)]

    trace = EpisodeTrace(robot_count=robots)
    positions = list(env.spawns)
    cumulative = [0.0] * robots
    thr = config.capture_threshold
    radius = config.sensing_radius

    if not any(c.alive for c in env.cells):
        trace.status = Status.ALL_CAPTURED
        return trace, collect_metrics(trace, time.perf_counter() - started)

    obs = [sense(env, p, radius) for p in positions]
    states = [discretize(o, disc) for o in obs]

    for t in range(config.max_steps):
        targets = [c for c in env.cells if c.alive]
        actions = []
        for i in range(robots):
            if policy is not None:
                actions.append(policy(obs[i], states[i]))
            else:
                actions.append(select_action(tables[i], states[i], eps, policy_rngs[i]))

        # a robot already within range (spawned there) captures without moving
        pre_captured = [obs[i].nearest_source_distance <= thr for i in range(robots)]
        hits = [False] * robots
        for i in range(robots):
            if pre_captured[i]:
                continue
            disp = action_to_displacement(
                actions[i], obs[i], config.step_size, agent_rngs[i], disc.g_eps
            )
            outcome = attempt_move(env, positions[i], disp)
            positions[i] = outcome.position
            hits[i] = outcome.kind is MoveKind.OBSTACLE_HIT
        for i in range(robots):
            if pre_captured[i]:
                for c in targets:
                    if _dist(positions[i], c.position) <= thr:
                        c.alive = False

        move_cancer_cells(env)

        after = []
        captured_cells = set()
        for i in range(robots):
            if pre_captured[i]:
                after.append((obs[i].concentration, obs[i].nearest_source_distance, True))
                continue
            o = sense(env, positions[i], radius)
            d = min((_dist(positions[i], c.position) for c in targets), default=math.inf)
            caught = False
            for k, c in enumerate(targets):
                if _dist(positions[i], c.position) <= thr:
                    caught = True
                    captured_cells.add(k)
            after.append((o.concentration, d, caught))
        for k in captured_cells:
            targets[k].alive = False

        done = not any(c.alive for c in env.cells)
        next_obs = [sense(env, p, radius) for p in positions]
        next_states = [discretize(o, disc) for o in next_obs]

        for i in range(robots):
            conc, d, caught = after[i]
            delta = 0.0 if pre_captured[i] else obs[i].nearest_source_distance - d
            r = compute_reward(caught, hits[i], delta, config.reward_mode)
            if mode is Mode.TRAIN and policy is None:
                update_q(tables[i], states[i], actions[i], r, None if done else next_states[i], learn)
            cumulative[i] += r
            trace.records.append(
                StepRecord(t, i, positions[i], conc, d, actions[i], r, cumulative[i], caught, hits[i])
            )

        obs, states = next_obs, next_states
        if done:
            trace.status = Status.ALL_CAPTURED
            break

    return trace, collect_metrics(trace, time.perf_counter() - started)


def _dist(a: Vec3, b: Vec3) -> float:
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def collect_metrics(trace: EpisodeTrace, wall_clock: float | None = None) -> EpisodeMetrics:
    recs = trace.records
    if not recs:
        return EpisodeMetrics(wall_clock_seconds=wall_clock, empty=True)
    n = len(recs)
    return EpisodeMetrics(
        total_steps=recs[-1].step + 1,
        final_distance=recs[-1].distance_to_cell,
        average_distance=math.fsum(r.distance_to_cell for r in recs) / n,
        average_concentration=math.fsum(r.concentration for r in recs) / n,
        wall_clock_seconds=wall_clock,
        captures=sum(r.captured for r in recs),
        obstacle_hits=sum(r.obstacle_hit for r in recs),
    )


def run_training(
    config: SimConfig,
    env: Environment | None = None,
    progress: Callable[[int, EpisodeMetrics], None] | None = None,
) -> TrainingReport:
    """Train over ``config.episodes`` episodes in one fixed world.

    The Q-table(s) persist across episodes; each episode restores the cells,
    draws new robot spawns and its own random streams.
    """
    env = new_environment(config) if env is None else env
    robots = config.robot_count
    if config.shared_qtable:
        tables = [QTable()] * robots
    else:
        tables = [QTable() for _ in range(robots)]
    schedule = EpsilonSchedule(config.epsilon0, config.decay, config.epsilon_min)
    report = TrainingReport(config=config, qtables=tables)

    for k in range(config.episodes):
        env.reset(k)
        eps = decay_epsilon(schedule, k)
        trace, metrics = run_episode(env, tables, config, Mode.TRAIN, eps, episode=k)
        report.metrics.append(metrics)
        report.epsilons.append(eps)
        report.steps_to_capture.append(trace.steps)
        report.statuses.append(trace.status)
        report.last_trace = trace
        if progress is not None:
            progress(k, metrics)
    return report


def evaluate(
    config: SimConfig,
    q: QTable | list[QTable],
    seeds: list[int],
) -> list[tuple[EpisodeTrace, EpisodeMetrics]]:
    """Greedy episodes, one freshly placed world per seed."""
    out = []
    for s in seeds:
        env = new_environment(config, s)
        tables = q if isinstance(q, QTable) else _qtables_for(q, env.robot_count)
        out.append(run_episode(env, tables, config, Mode.EVAL, 0.0, episode=0))
    return out
