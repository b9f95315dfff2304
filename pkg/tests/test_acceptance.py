"""Acceptance gate: one PASS/FAIL line per criterion, each at its stated tolerance.

The learning criteria train the default configuration on ten master seeds;
the whole module takes roughly half a minute.
"""

import math
import os
import statistics
import time

import numpy as np
import pytest

from nanonav import io
from nanonav.agent import Action, QTable, compute_reward
from nanonav.cli import main
from nanonav.config import SimConfig
from nanonav.engine import EpisodeTrace, Mode, Status, evaluate, run_episode, run_training
from nanonav.environment import attempt_move, move_cancer_cells, new_environment
from nanonav.field import (
    BiomarkerSource,
    FieldModel,
    Plane,
    Vec3,
    distance,
    gaussian_density,
    gaussian_gradient,
    in_plane_cell,
    sample_heatmap,
)

from conftest import make_env
from test_agent import train_toy, value_iteration

LEARNING_SEEDS = range(10)
EVAL_SEEDS = list(range(1000, 1100))


@pytest.fixture
def verdict(capsys, request):
    def report(ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {request.node.name}: {detail}")
        assert ok, detail

    return report


@pytest.fixture(scope="module")
def trained():
    cfg = SimConfig()
    return {s: run_training(cfg.replace(seed=s)) for s in LEARNING_SEEDS}


def test_criterion_1_gradient_matches_finite_difference(verdict):
    g = np.random.default_rng(2024)
    h = 1e-5
    worst_rel = worst_abs = 0.0
    started = time.perf_counter()
    for _ in range(1000):
        src = BiomarkerSource(Vec3(*g.uniform(0, 50, 3)), sigma=float(g.uniform(0.5, 20)))
        # keep most points within a few widths so the field is not identically zero
        p = src.position + Vec3(*g.normal(0, 2 * src.sigma, 3))
        an = np.array(gaussian_gradient(p, src))
        fd = np.empty(3)
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = h
            hi = gaussian_density(Vec3(*(np.array(p) + e)), src)
            lo = gaussian_density(Vec3(*(np.array(p) - e)), src)
            fd[axis] = (hi - lo) / (2 * h)
        err = float(np.linalg.norm(fd - an))
        scale = float(np.linalg.norm(an))
        if scale < 1e-6:
            worst_abs = max(worst_abs, err)
        else:
            worst_rel = max(worst_rel, err / scale)
    elapsed = time.perf_counter() - started
    ok = worst_rel < 1e-6 and worst_abs < 1e-9 and elapsed < 1.0
    verdict(ok, f"max rel {worst_rel:.2e}, max abs near zero {worst_abs:.2e}, {elapsed:.2f} s")


def test_criterion_2_q_learning_matches_value_iteration(verdict):
    started = time.perf_counter()
    q_star = value_iteration(0.9, tol=1e-10)
    q = train_toy(transitions=50_000, alpha=0.1, gamma=0.9, epsilon=0.2)
    elapsed = time.perf_counter() - started
    err = float(np.max(np.abs(q - q_star)))
    verdict(err < 0.05 and elapsed < 5.0, f"max |Q - Q*| = {err:.4f}, {elapsed:.2f} s")


def test_criterion_3_reward_table(verdict):
    cases = {
        "capture": (compute_reward(True, False, 0.0), 10.0),
        "obstacle hit": (compute_reward(False, True, 0.0), -1.0),
        "approach 0.8": (compute_reward(False, False, 0.8), 0.8),
        "retreat": (compute_reward(False, False, -0.3), 0.0),
    }
    bad = {k: v for k, v in cases.items() if v[0] != v[1]}
    verdict(not bad, "all reward entries exact" if not bad else f"mismatch {bad}")


def test_criterion_4_gradient_following_trace_is_monotone(verdict):
    env = make_env(cells=[(30, 20, 25)], confinement=0.0)
    env.spawns = [Vec3(2, 45, 3)]
    started = time.perf_counter()
    trace, _ = run_episode(
        env, QTable(), SimConfig(), Mode.EVAL, policy=lambda obs, s: Action.TOWARD_BIOMARKER
    )
    elapsed = time.perf_counter() - started
    d = [r.distance_to_cell for r in trace.records]
    c = [r.concentration for r in trace.records]
    ok = (
        trace.status is Status.ALL_CAPTURED
        and all(b <= a for a, b in zip(d, d[1:]))
        and all(b >= a for a, b in zip(c, c[1:]))
        and elapsed < 1.0
    )
    verdict(ok, f"{len(d)} steps, distance {d[0]:.2f} -> {d[-1]:.3f}, {elapsed:.2f} s")


def test_criterion_5_learning_improves(verdict, trained):
    wins = []
    for seed, rep in trained.items():
        first = statistics.median(rep.steps_to_capture[:50])
        last = statistics.median(rep.steps_to_capture[-50:])
        wins.append(last < first)
    verdict(sum(wins) >= 8, f"{sum(wins)}/10 seeds improved")


def test_criterion_6_capture_rate_after_training(verdict, trained):
    cfg = SimConfig()
    results = evaluate(cfg, trained[0].qtables[0], EVAL_SEEDS)
    captured = sum(t.status is Status.ALL_CAPTURED for t, _ in results)
    within = all(t.steps <= cfg.max_steps for t, _ in results)
    verdict(captured >= 90 and within, f"{captured}/100 evaluation episodes captured")


def test_criterion_7_heatmap_peaks_at_source(verdict, tmp_path):
    pos = Vec3(17.3, 31.9, 8.6)
    src = BiomarkerSource(pos)
    misses = []
    for plane in Plane:
        fixed = {Plane.XY: pos.z, Plane.XZ: pos.y, Plane.YZ: pos.x}[plane]
        path = tmp_path / f"{plane.value}.csv"
        io.write_heatmap(sample_heatmap([src], FieldModel.GAUSSIAN, plane, fixed, 50.0, 50), path)
        grid = io.read_heatmap(path)
        peak = tuple(int(i) for i in np.unravel_index(np.argmax(grid.values), grid.values.shape))
        if grid.plane is not plane or peak != in_plane_cell(plane, pos, 50.0, 50):
            misses.append(plane.value)
    verdict(not misses, "XY, XZ, YZ peaks at source cell" if not misses else f"misses {misses}")


def _tree(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            full = os.path.join(dirpath, f)
            with open(full, "rb") as fh:
                out[os.path.relpath(full, root)] = fh.read()
    return out


def test_criterion_8_determinism_and_round_trips(verdict, tmp_path, capsys):
    started = time.perf_counter()
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        main(["train", "--seed", "5", "--out-dir", str(d), "--quiet"])
    capsys.readouterr()
    identical = _tree(dirs[0]) == _tree(dirs[1]) and len(_tree(dirs[0])) == 4

    a = dirs[0]
    cfg = io.read_config(a / "config.json")
    io.write_config(cfg, tmp_path / "c2.json")
    q = io.read_qtable(a / "qtable.csv")
    io.write_qtable(q, tmp_path / "q2.csv")
    io.write_trace(EpisodeTrace(records=io.read_trace(a / "trace.csv")), tmp_path / "t2.csv")
    exact = (
        (tmp_path / "c2.json").read_bytes() == (a / "config.json").read_bytes()
        and (tmp_path / "q2.csv").read_bytes() == (a / "qtable.csv").read_bytes()
        and (tmp_path / "t2.csv").read_bytes() == (a / "trace.csv").read_bytes()
    )
    elapsed = time.perf_counter() - started
    verdict(identical and exact and elapsed < 60, f"identical={identical}, round-trips exact={exact}, {elapsed:.1f} s")


def test_criterion_9_safety_invariants(verdict):
    started = time.perf_counter()
    env = new_environment(SimConfig(obstacle_count=8), 21)
    g = np.random.default_rng(0)
    p = env.spawns[0]
    violations = 0
    for _ in range(100_000):
        p = attempt_move(env, p, Vec3(*g.normal(0, 1.5, 3))).position
        move_cancer_cells(env)
        if not env.contains(p) or env.inside_obstacle(p):
            violations += 1
        for c in env.cells:
            if distance(c.position, c.confinement_center) > c.confinement_radius:
                violations += 1
    elapsed = time.perf_counter() - started
    verdict(violations == 0 and elapsed < 10, f"{violations} violations in 1e5 steps, {elapsed:.1f} s")
