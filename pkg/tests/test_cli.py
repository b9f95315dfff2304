import json
import os

import numpy as np
import pytest

from nanonav import io
from nanonav.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from nanonav.config import SimConfig
from nanonav.environment import new_environment
from nanonav.field import in_plane_cell

SMALL = {"episodes": 5, "max_steps": 300}


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    return p


def tree_bytes(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            full = os.path.join(dirpath, f)
            with open(full, "rb") as fh:
                out[os.path.relpath(full, root)] = fh.read()
    return out


def summary(capsys):
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


class TestTrain:
    def test_writes_outputs(self, tmp_path, small_config, capsys):
        out = tmp_path / "out"
        assert main(["train", "--config", str(small_config), "--out-dir", str(out), "--quiet"]) == EXIT_OK
        assert {p.name for p in out.iterdir()} == {"config.json", "report.json", "qtable.csv", "trace.csv"}
        s = summary(capsys)
        assert s["command"] == "train" and s["episodes"] == 5
        report = io.read_metrics(out / "report.json")
        assert all(m["wall_clock_seconds"] is None for m in report["episodes"])

    def test_byte_identical(self, tmp_path, small_config):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert main(["train", "--config", str(small_config), "--seed", "7", "--out-dir", str(d), "--quiet"]) == 0
        assert tree_bytes(a) == tree_bytes(b)

    def test_seed_flag_overrides_config(self, tmp_path, small_config):
        out = tmp_path / "o"
        main(["train", "--config", str(small_config), "--seed", "11", "--out-dir", str(out), "--quiet"])
        assert io.read_config(out / "config.json").seed == 11

    def test_timings_recorded_on_request(self, tmp_path, small_config):
        out = tmp_path / "o"
        main(["train", "--config", str(small_config), "--out-dir", str(out), "--quiet", "--timings"])
        report = io.read_metrics(out / "report.json")
        assert all(m["wall_clock_seconds"] >= 0 for m in report["episodes"])

    def test_private_tables_per_robot(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({**SMALL, "robot_count": 2}))
        out = tmp_path / "o"
        main(["train", "--config", str(cfg), "--out-dir", str(out), "--quiet"])
        assert (out / "qtable_0.csv").exists() and (out / "qtable_1.csv").exists()

    def test_replicates(self, tmp_path, small_config, capsys):
        out = tmp_path / "o"
        args = ["train", "--config", str(small_config), "--seed", "3", "--replicates", "2", "--out-dir", str(out), "--quiet"]
        assert main(args) == 0
        assert sorted(p.name for p in out.iterdir()) == ["seed_3", "seed_4"]
        assert [r["seed"] for r in summary(capsys)["replicates"]] == [3, 4]

    def test_parallel_replicates_match_serial(self, tmp_path, small_config):
        base = ["train", "--config", str(small_config), "--replicates", "2", "--quiet"]
        main(base + ["--out-dir", str(tmp_path / "s")])
        main(base + ["--jobs", "2", "--out-dir", str(tmp_path / "p")])
        assert tree_bytes(tmp_path / "s") == tree_bytes(tmp_path / "p")


class TestRun:
    def test_zero_table(self, tmp_path, capsys):
        out = tmp_path / "r"
        assert main(["run", "--out-dir", str(out), "--quiet"]) == 0
        s = summary(capsys)
        m = io.read_metrics(out / "metrics.json")
        assert m["status"] == s["status"] and m["total_steps"] == s["total_steps"]
        assert len(io.read_trace(out / "trace.csv")) == s["total_steps"]

    def test_with_trained_table(self, tmp_path, small_config, capsys):
        t = tmp_path / "t"
        main(["train", "--config", str(small_config), "--out-dir", str(t), "--quiet"])
        capsys.readouterr()
        out = tmp_path / "r"
        assert main(["run", "--config", str(small_config), "--qtable", str(t / "qtable.csv"), "--out-dir", str(out), "--quiet"]) == 0
        assert summary(capsys)["status"] in ("AllCaptured", "StepLimit")

    def test_missing_qtable(self, tmp_path):
        assert main(["run", "--qtable", str(tmp_path / "none.csv"), "--out-dir", str(tmp_path / "r")]) == EXIT_CONFIG


class TestHeatmap:
    def test_peak_at_cell(self, tmp_path):
        out = tmp_path / "h.csv"
        cfg = SimConfig()
        cell = new_environment(cfg).cells[0].position
        args = ["heatmap", "--plane", "XY", "--slice", repr(cell.z), "--resolution", "50", "--out", str(out), "--quiet"]
        assert main(args) == 0
        grid = io.read_heatmap(out)
        peak = np.unravel_index(np.argmax(grid.values), grid.values.shape)
        assert tuple(int(i) for i in peak) == in_plane_cell("XY", cell, cfg.side, 50)

    def test_slice_outside_cube(self, tmp_path):
        args = ["heatmap", "--plane", "XZ", "--slice", "60", "--out", str(tmp_path / "h.csv")]
        assert main(args) == EXIT_CONFIG


class TestErrors:
    def test_missing_config_names_path(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        assert main(["train", "--config", str(missing), "--out-dir", str(tmp_path / "o")]) == EXIT_CONFIG
        assert "nope.json" in capsys.readouterr().err

    def test_invalid_value(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text('{"gamma": 1.5}')
        assert main(["run", "--config", str(p), "--out-dir", str(tmp_path / "o")]) == EXIT_CONFIG
        assert "gamma" in capsys.readouterr().err

    def test_usage_error(self):
        assert main(["fly"]) == EXIT_CONFIG
        assert main([]) == EXIT_CONFIG

    def test_unwritable_output(self, tmp_path, small_config):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["run", "--out-dir", str(blocker / "sub"), "--quiet"]) == EXIT_IO

    def test_infeasible_world(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"obstacle_count": 10, "obstacle_radius_range": [30, 30]}')
        assert main(["run", "--config", str(p), "--out-dir", str(tmp_path / "o")]) == EXIT_CONFIG
