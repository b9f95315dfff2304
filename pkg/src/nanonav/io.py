"""Deterministic file formats for traces, heatmaps, metrics and Q-tables.

Floats in CSV and metrics files carry 9 significant digits; Q-table values are
written with ``repr`` so the table round-trips bit-exactly.
"""

from __future__ import annotations

import csv
import json
import math
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

import numpy as np

from nanonav.agent import Action, QTable, StateId
from nanonav.config import SimConfig, emit_config, parse_config
from nanonav.engine import EpisodeMetrics, EpisodeTrace, StepRecord, TrainingReport
from nanonav.field import HeatmapGrid, Plane, Vec3

TRACE_HEADER = (
    "step,robot_id,x,y,z,concentration,distance_to_cell,action,reward,cumulative_reward"
)
ACTION_LABELS = {
    Action.TOWARD_BIOMARKER: "TowardBiomarker",
    Action.TOWARD_CELL: "TowardCell",
    Action.AVOID_OBSTACLE: "AvoidObstacle",
}
_LABEL_ACTIONS = {v: k for k, v in ACTION_LABELS.items()}
STEP_ORDER = "robots_move,cells_move,reward"


class OutputError(OSError):
    """Reading or writing an output file failed; the message names the path."""


def fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = "%.9g" % x
    return "0" if s == "-0" else s


def round9(x: float | None) -> float | None:
    if x is None or not math.isfinite(x):
        return x
    return float("%.9g" % x)


@contextmanager
def _open(path: str | Path, mode: str) -> Iterator:
    path = Path(path)
    try:
        with open(path, mode, encoding="utf-8", newline="") as fh:
            yield fh
    except OSError as exc:
        raise OutputError(f"{path}: {exc.strerror or exc}") from exc


def write_trace(trace: EpisodeTrace, path: str | Path) -> None:
    lines = [TRACE_HEADER]
    for r in trace.records:
        lines.append(
            ",".join(
                [
                    str(r.step),
                    str(r.robot_id),
                    fmt(r.position.x),
                    fmt(r.position.y),
                    fmt(r.position.z),
                    fmt(r.concentration),
                    fmt(r.distance_to_cell),
                    ACTION_LABELS[r.action],
                    fmt(r.reward),
                    fmt(r.cumulative_reward),
                ]
            )
        )
    with _open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace(path: str | Path) -> list[StepRecord]:
    with _open(path, "r") as fh:
        rows = list(csv.reader(fh))
    if not rows or ",".join(rows[0]) != TRACE_HEADER:
        raise ValueError(f"{path}: not a trace file")
    out = []
    for row in rows[1:]:
        step, rid, x, y, z, c, d, a, rew, cum = row
        out.append(
            StepRecord(
                int(step),
                int(rid),
                Vec3(float(x), float(y), float(z)),
                float(c),
                float(d),
                _LABEL_ACTIONS[a],
                float(rew),
                float(cum),
            )
        )
    return out


def write_heatmap(grid: HeatmapGrid, path: str | Path) -> None:
    lines = [f"# plane={grid.plane.value} slice={fmt(grid.slice_coord)} res={grid.resolution}"]
    for row in grid.values:
        lines.append(",".join(fmt(float(v)) for v in row))
    with _open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_heatmap(path: str | Path) -> HeatmapGrid:
    with _open(path, "r") as fh:
        text = fh.read()
    header, *rows = text.rstrip("\n").split("\n")
    if not header.startswith("# "):
        raise ValueError(f"{path}: missing heatmap header")
    meta = dict(item.split("=", 1) for item in header[2:].split())
    values = np.array([[float(v) for v in row.split(",")] for row in rows])
    res = int(meta["res"])
    if values.shape != (res, res):
        raise ValueError(f"{path}: expected {res}x{res} values, got {values.shape}")
    return HeatmapGrid(Plane(meta["plane"]), float(meta["slice"]), res, values)


def metrics_dict(m: EpisodeMetrics) -> dict:
    return {
        "total_steps": m.total_steps,
        "final_distance": round9(m.final_distance),
        "average_distance": round9(m.average_distance),
        "average_biomarker_concentration": round9(m.average_concentration),
        "wall_clock_seconds": round9(m.wall_clock_seconds),
        "captures": m.captures,
        "obstacle_hits": m.obstacle_hits,
        "empty": m.empty,
    }


def metrics_from_dict(d: dict) -> EpisodeMetrics:
    return EpisodeMetrics(
        total_steps=d["total_steps"],
        final_distance=d["final_distance"],
        average_distance=d["average_distance"],
        average_concentration=d["average_biomarker_concentration"],
        wall_clock_seconds=d["wall_clock_seconds"],
        captures=d["captures"],
        obstacle_hits=d["obstacle_hits"],
        empty=d.get("empty", False),
    )


def _dump(obj: dict, path: str | Path) -> None:
    with _open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_metrics(
    result: TrainingReport | EpisodeMetrics,
    path: str | Path,
    config: SimConfig | None = None,
    extra: dict | None = None,
) -> None:
    """Metrics JSON with the effective config and master seed echoed in."""
    if isinstance(result, TrainingReport):
        config = result.config
        body = {
            "episodes": [metrics_dict(m) for m in result.metrics],
            "epsilons": [round9(e) for e in result.epsilons],
            "steps_to_capture": list(result.steps_to_capture),
            "statuses": [s.value for s in result.statuses],
            "qtable_mode": "shared" if config.shared_qtable else "private",
        }
    else:
        body = metrics_dict(result)
    if config is not None:
        body["config"] = config.to_dict()
        body["seed"] = config.seed
    body["step_order"] = STEP_ORDER
    if extra:
        body.update(extra)
    _dump(body, path)


def read_metrics(path: str | Path) -> dict:
    with _open(path, "r") as fh:
        return json.load(fh)


def write_config(config: SimConfig, path: str | Path) -> None:
    with _open(path, "w") as fh:
        fh.write(emit_config(config))


def read_config(path: str | Path) -> SimConfig:
    with _open(path, "r") as fh:
        text = fh.read()
    return parse_config(text)


def qtable_lines(q: QTable) -> list[str]:
    lines = [
        f"{s.code},{int(a)},{v!r},{q.visits.get((s, a), 0)}" for (s, a), v in q.values.items()
    ]
    return sorted(lines)


def write_qtable(q: QTable, path: str | Path) -> None:
    with _open(path, "w") as fh:
        fh.write("".join(line + "\n" for line in qtable_lines(q)))


def read_qtable(path: str | Path) -> QTable:
    q = QTable()
    with _open(path, "r") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                code, a, v, visits = line.split(",")
                key = (StateId.from_code(code), Action(int(a)))
                q.values[key] = float(v)
                q.visits[key] = int(visits)
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{n}: bad Q-table line {line!r}") from exc
    return q


__all__ = [
    "ACTION_LABELS",
    "OutputError",
    "TRACE_HEADER",
    "read_config",
    "read_heatmap",
    "read_metrics",
    "read_qtable",
    "read_trace",
    "write_config",
    "write_heatmap",
    "write_metrics",
    "write_qtable",
    "write_trace",
]
