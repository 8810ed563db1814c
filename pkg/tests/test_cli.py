"""End-to-end CLI tests driven through a subprocess (real exit codes)."""

import json
import subprocess
import sys

import numpy as np
import pytest

from gdpc.behavior import GaussianBehavior
from gdpc.plant import default_benchmark, simulate
from gdpc.trajectory import SignalDims, save_csv


def run_cli(*args, cwd=None):
    proc = subprocess.run(
        [sys.executable, "-m", "gdpc.cli", *args],
        capture_output=True, text=True, cwd=cwd,
    )
    return proc


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli")
    model = default_benchmark()
    traj = simulate(model, np.zeros(3), 1.0, steps=300, seed=9)
    save_csv(traj, path / "data.csv")
    config = {
        "schema": 1,
        "data": {"steps": 250, "mode": "hankel", "input_std": 1.0, "seed": 3},
        "horizons": {"L_ini": 2, "L_f": 5},
        "control": {
            "controller": "optimistic", "q": 1.0, "r": 0.05,
            "y_ref": 1.0, "lambda": 50.0, "lambda_grid": [5.0, 50.0],
        },
        "run": {"steps": 25, "repetitions": 2, "seed": 17},
    }
    (path / "config.json").write_text(json.dumps(config))
    return path


class TestIdentify:
    def test_writes_behavior_and_reports_rank(self, workdir):
        proc = run_cli(
            "identify", "--data", str(workdir / "data.csv"),
            "--config", str(workdir / "config.json"),
            "--out", str(workdir / "behavior.json"),
        )
        assert proc.returncode == 0, proc.stderr
        assert "rank" in proc.stdout
        gb = GaussianBehavior.load_json(workdir / "behavior.json")
        assert gb.dims == SignalDims(1, 1)
        assert gb.window == 7

    def test_missing_config_is_config_error(self, workdir):
        proc = run_cli(
            "identify", "--data", str(workdir / "data.csv"),
            "--config", str(workdir / "nope.json"),
            "--out", str(workdir / "b.json"),
        )
        assert proc.returncode == 3


class TestPredict:
    def test_prints_mean_and_variance_rows(self, workdir):
        run_cli(
            "identify", "--data", str(workdir / "data.csv"),
            "--config", str(workdir / "config.json"),
            "--out", str(workdir / "behavior.json"),
        )
        (workdir / "wini.csv").write_text(
            "u_1,y_1\n0.1,0.05\n-0.2,0.4\n"
        )
        (workdir / "uf.csv").write_text(
            "u_1\n" + "\n".join(["0.5"] * 5) + "\n"
        )
        proc = run_cli(
            "predict", "--behavior", str(workdir / "behavior.json"),
            "--wini", str(workdir / "wini.csv"), "--uf", str(workdir / "uf.csv"),
        )
        assert proc.returncode == 0, proc.stderr
        lines = [l for l in proc.stdout.splitlines() if l.strip()]
        assert len(lines) == 6  # header + 5 future steps
        assert "mean_y1" in lines[0] and "var_y1" in lines[0]

    def test_window_mismatch_rejected(self, workdir):
        (workdir / "uf_bad.csv").write_text("u_1\n0.5\n")
        proc = run_cli(
            "predict", "--behavior", str(workdir / "behavior.json"),
            "--wini", str(workdir / "wini.csv"), "--uf", str(workdir / "uf_bad.csv"),
        )
        assert proc.returncode == 3


class TestControl:
    def test_solves_and_writes_json(self, workdir):
        out = workdir / "control.json"
        proc = run_cli(
            "control", "--config", str(workdir / "config.json"),
            "--controller", "robust", "--out", str(out),
        )
        assert proc.returncode == 0, proc.stderr
        doc = json.loads(out.read_text())
        assert doc["controller"] == "robust"
        assert len(doc["u_f"]) == 5


class TestClosedLoop:
    def test_byte_identical_reruns(self, workdir):
        out_a = workdir / "run_a.csv"
        out_b = workdir / "run_b.csv"
        proc_a = run_cli("closed-loop", "--config", str(workdir / "config.json"),
                         "--out", str(out_a))
        proc_b = run_cli("closed-loop", "--config", str(workdir / "config.json"),
                         "--out", str(out_b))
        assert proc_a.returncode == 0 and proc_b.returncode == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        summary = json.loads((workdir / "run_a.csv.summary.json").read_text())
        assert summary["aborted"] is False
        assert summary["steps_recorded"] == 25


class TestPlantOverride:
    def test_plant_flag_changes_the_run(self, workdir):
        plant_path = workdir / "noisier.json"
        default_benchmark(0.1, 0.2).save_json(plant_path)
        out_a = workdir / "base.csv"
        out_b = workdir / "override.csv"
        run_cli("closed-loop", "--config", str(workdir / "config.json"),
                "--out", str(out_a))
        proc = run_cli("closed-loop", "--config", str(workdir / "config.json"),
                       "--plant", str(plant_path), "--out", str(out_b))
        assert proc.returncode == 0, proc.stderr
        assert out_a.read_bytes() != out_b.read_bytes()

    def test_missing_plant_file_is_config_error(self, workdir):
        proc = run_cli("closed-loop", "--config", str(workdir / "config.json"),
                       "--plant", str(workdir / "ghost.json"),
                       "--out", str(workdir / "x.csv"))
        assert proc.returncode == 3


class TestSweep:
    def test_grid_rows(self, workdir):
        out = workdir / "sweep.csv"
        proc = run_cli(
            "sweep", "--config", str(workdir / "config.json"),
            "--grid", "5,50", "--out", str(out),
        )
        assert proc.returncode == 0, proc.stderr
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("lambda,")
        assert len(lines) == 3


class TestVerifyCommand:
    def test_solver_suite_exits_zero(self):
        proc = run_cli("verify", "--suite", "solver")
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert "PASS" in proc.stdout

    def test_bad_suite_rejected_by_argparse(self):
        proc = run_cli("verify", "--suite", "everything")
        assert proc.returncode == 2  # argparse usage error
