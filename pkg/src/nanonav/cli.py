"""Command-line entry point: ``nanonav train | run | heatmap``.

Progress goes to stderr, data to files, and stdout gets exactly one JSON
summary line per invocation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from nanonav import io
from nanonav.agent import QTable
from nanonav.config import ConfigError, SimConfig, parse_config
from nanonav.engine import Mode, TrainingReport, run_episode, run_training
from nanonav.environment import InfeasibleConfigError, new_environment
from nanonav.field import Plane, sample_heatmap

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2

log = logging.getLogger("nanonav")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat JSON config (defaults if omitted)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--quiet", action="store_true", help="suppress progress lines")

    p = _Parser(prog="nanonav", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", parents=[common], help="train a Q-table")
    t.add_argument("--out-dir", type=Path, required=True)
    t.add_argument("--replicates", type=int, default=1, help="seeds seed..seed+N-1, one subdir each")
    t.add_argument("--jobs", type=int, default=1, help="parallel workers for replicates")
    t.add_argument("--timings", action="store_true", help="record wall-clock seconds in files")

    r = sub.add_parser("run", parents=[common], help="one greedy evaluation episode")
    r.add_argument("--qtable", type=Path, help="Q-table file from `train` (zero table if omitted)")
    r.add_argument("--out-dir", type=Path, required=True)
    r.add_argument("--timings", action="store_true", help="record wall-clock seconds in files")

    h = sub.add_parser("heatmap", parents=[common], help="sample the concentration field on a plane")
    h.add_argument("--plane", choices=[pl.value for pl in Plane], required=True)
    h.add_argument("--slice", type=float, required=True, dest="slice_coord")
    h.add_argument("--resolution", type=int, default=50)
    h.add_argument("--out", type=Path, required=True, dest="out_path")
    return p


def load_config(path: Path | None, seed: int | None) -> SimConfig:
    if path is None:
        cfg = SimConfig()
    else:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        cfg = parse_config(text)
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    return cfg


def _strip_timing(report: TrainingReport) -> None:
    for m in report.metrics:
        m.wall_clock_seconds = None


def train_one(cfg: SimConfig, out_dir: Path, quiet: bool, timings: bool) -> dict:
    def progress(k, m):
        if not quiet and (k + 1) % 25 == 0:
            log.info("seed %d episode %d/%d steps=%d", cfg.seed, k + 1, cfg.episodes, m.total_steps)

    started = time.perf_counter()
    report = run_training(cfg, progress=progress)
    elapsed = time.perf_counter() - started
    if not timings:
        _strip_timing(report)

    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_config(cfg, out_dir / "config.json")
    io.write_metrics(report, out_dir / "report.json")
    tables = report.qtables
    if cfg.shared_qtable or len(tables) == 1:
        io.write_qtable(tables[0], out_dir / "qtable.csv")
    else:
        for i, q in enumerate(tables):
            io.write_qtable(q, out_dir / f"qtable_{i}.csv")
    if report.last_trace is not None:
        io.write_trace(report.last_trace, out_dir / "trace.csv")
    captured = sum(s.value == "AllCaptured" for s in report.statuses)
    return {"seed": cfg.seed, "episodes": cfg.episodes, "captured": captured,
            "wall_clock_seconds": round(elapsed, 3)}


def _train_job(args: tuple) -> dict:
    return train_one(*args)


def cmd_train(ns: argparse.Namespace, cfg: SimConfig) -> dict:
    if ns.replicates < 1:
        raise ConfigError("--replicates must be >= 1")
    if ns.replicates == 1:
        res = train_one(cfg, ns.out_dir, ns.quiet, ns.timings)
        return {"command": "train", "out_dir": str(ns.out_dir), **res}
    jobs = [
        (cfg.replace(seed=cfg.seed + k), ns.out_dir / f"seed_{cfg.seed + k}", ns.quiet, ns.timings)
        for k in range(ns.replicates)
    ]
    if ns.jobs > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            results = list(pool.map(_train_job, jobs))
    else:
        results = [_train_job(j) for j in jobs]
    return {"command": "train", "out_dir": str(ns.out_dir), "replicates": results}


def cmd_run(ns: argparse.Namespace, cfg: SimConfig) -> dict:
    if ns.qtable is not None:
        try:
            q = io.read_qtable(ns.qtable)
        except io.OutputError as exc:
            raise ConfigError(str(exc)) from None
    else:
        q = QTable()
    env = new_environment(cfg)
    trace, metrics = run_episode(env, q, cfg, Mode.EVAL)
    elapsed = metrics.wall_clock_seconds
    if not ns.timings:
        metrics.wall_clock_seconds = None
    ns.out_dir.mkdir(parents=True, exist_ok=True)
    io.write_config(cfg, ns.out_dir / "config.json")
    io.write_trace(trace, ns.out_dir / "trace.csv")
    io.write_metrics(metrics, ns.out_dir / "metrics.json", cfg, {"status": trace.status.value})
    return {"command": "run", "out_dir": str(ns.out_dir), "status": trace.status.value,
            "total_steps": metrics.total_steps, "wall_clock_seconds": round(elapsed or 0.0, 3)}


def cmd_heatmap(ns: argparse.Namespace, cfg: SimConfig) -> dict:
    env = new_environment(cfg)
    try:
        grid = sample_heatmap(
            env.alive_sources(), cfg.field_model, ns.plane, ns.slice_coord, cfg.side,
            ns.resolution, cfg.d_min,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if ns.out_path.parent != Path(""):
        ns.out_path.parent.mkdir(parents=True, exist_ok=True)
    io.write_heatmap(grid, ns.out_path)
    return {"command": "heatmap", "out": str(ns.out_path), "plane": grid.plane.value,
            "max": float(grid.values.max())}


COMMANDS = {"train": cmd_train, "run": cmd_run, "heatmap": cmd_heatmap}


def main(argv: list[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING if ns.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        cfg = load_config(ns.config, ns.seed)
        summary = COMMANDS[ns.command](ns, cfg)
    except (ConfigError, InfeasibleConfigError) as exc:
        print(f"nanonav: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"nanonav: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
