import json
import subprocess
import sys

import pytest

from lrlab.cli import main


@pytest.fixture
def logistic_config_file(tmp_path):
    config = {
        "task": {"kind": "logistic", "n_samples": 200, "n_features": 6,
                 "class_separation": 4.0, "seed": 7},
        "optimizer": {"kind": "adam"},
        "schedule": {"policy": "clr", "base_lr": 0.005, "max_lr": 0.25, "step_size": 20},
        "run": {"batch_size": 16, "epochs": 6, "iters_per_epoch": 10, "seed": 3,
                "checkpoint_every": 1, "output_dir": str(tmp_path / "run")},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config, indent=2))
    return path


class TestRangeTest:
    def test_writes_curve_and_bounds(self, tmp_path, logistic_config_file, capsys):
        out = tmp_path / "rt"
        code = main(["range-test", "--config", str(logistic_config_file),
                     "--lr-start", "1e-4", "--lr-end", "1.0", "--steps", "150",
                     "--out", str(out)])
        assert code == 0
        bounds = json.loads((out / "lr_bounds.json").read_text())
        assert set(bounds) == {"base_lr", "mlr1", "mlr2", "chosen_max", "diverged"}
        assert bounds["chosen_max"] == bounds["mlr1"]
        header = (out / "range_curve.csv").read_text().splitlines()[0]
        assert header == "step,lr,raw_loss,smoothed_loss"
        assert "base_lr" in capsys.readouterr().out

    def test_analyzer_failure_exits_4(self, tmp_path, capsys):
        # a sweep confined to minuscule rates never leaves the flat region
        config = {
            "task": {"kind": "quadratic", "spectrum": [1.0]},
            "optimizer": {"kind": "sgd", "momentum": 0.0},
            "schedule": {"policy": "constant", "lr": 0.1},
            "run": {"batch_size": 1, "epochs": 1, "iters_per_epoch": 10, "seed": 0},
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        code = main(["range-test", "--config", str(path),
                     "--lr-start", "1e-13", "--lr-end", "1e-12", "--steps", "120"])
        assert code == 4

    def test_missing_config_exits_2(self, tmp_path, capsys):
        code = main(["range-test", "--config", str(tmp_path / "nope.json"),
                     "--lr-start", "1e-4", "--lr-end", "1.0"])
        assert code == 2


class TestTrain:
    def test_completed_run_exits_0(self, logistic_config_file, tmp_path, capsys):
        assert main(["train", "--config", str(logistic_config_file)]) == 0
        assert (tmp_path / "run" / "steps.csv").exists()

    def test_diverged_run_exits_3(self, tmp_path, capsys):
        config = {
            "task": {"kind": "quadratic", "spectrum": [1.0]},
            "optimizer": {"kind": "sgd", "momentum": 0.0},
            "schedule": {"policy": "constant", "lr": 10.0},
            "run": {"batch_size": 1, "epochs": 1, "iters_per_epoch": 50, "seed": 0,
                    "output_dir": str(tmp_path / "boom")},
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        assert main(["train", "--config", str(path)]) == 3
        payload = json.loads((tmp_path / "boom" / "run.json").read_text())
        assert payload["status"] == "diverged"

    def test_invalid_schedule_exits_2(self, tmp_path, capsys):
        config = {
            "task": {"kind": "quadratic", "spectrum": [1.0]},
            "optimizer": {"kind": "sgd"},
            "schedule": {"policy": "clr", "base_lr": 0.5, "max_lr": 0.1, "step_size": 5},
            "run": {"batch_size": 1, "epochs": 1, "iters_per_epoch": 10, "seed": 0},
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        assert main(["train", "--config", str(path)]) == 2


class TestCompare:
    def test_three_policies_tabulated(self, tmp_path, logistic_config_file, capsys):
        overrides = {
            "clr.json": {"schedule": {"policy": "clr", "base_lr": 0.005,
                                      "max_lr": 0.25, "step_size": 20}},
            "inv.json": {"schedule": {"policy": "inv", "peak_lr": 0.25,
                                      "warmup_steps": 20}},
            "const.json": {"schedule": {"policy": "constant", "lr": 0.005}},
        }
        for name, payload in overrides.items():
            (tmp_path / name).write_text(json.dumps(payload))
        out = tmp_path / "cmp"
        code = main(["compare", "--config", str(logistic_config_file),
                     "--policies", ",".join(str(tmp_path / n) for n in overrides),
                     "--out", str(out)])
        assert code == 0
        table = (out / "compare.csv").read_text().splitlines()
        assert table[0] == "policy,best_val_metric,best_epoch,status"
        assert len(table) == 4
        stdout = capsys.readouterr().out
        assert "adam_inv_0.25" in stdout

    def test_missing_override_exits_2(self, tmp_path, logistic_config_file, capsys):
        code = main(["compare", "--config", str(logistic_config_file),
                     "--policies", str(tmp_path / "ghost.json")])
        assert code == 2


class TestBatchSweep:
    def test_sweep_csv_written(self, tmp_path, logistic_config_file, capsys):
        out = tmp_path / "sweep"
        code = main(["batch-sweep", "--config", str(logistic_config_file),
                     "--sizes", "8,32,128", "--out", str(out)])
        assert code == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "batch_size,best_val,best_epoch,diverged"
        assert [line.split(",")[0] for line in lines[1:]] == ["8", "32", "128"]
        assert all(line.split(",")[3] in {"true", "false"} for line in lines[1:])

    def test_duplicate_sizes_exit_2(self, logistic_config_file, capsys):
        assert main(["batch-sweep", "--config", str(logistic_config_file),
                     "--sizes", "8,8"]) == 2


class TestLandscapeAndVerify:
    def test_landscape_outputs(self, tmp_path, logistic_config_file, capsys):
        main(["train", "--config", str(logistic_config_file)])
        run_dir = tmp_path / "run"
        code = main(["landscape", "--run-dir", str(run_dir), "--resolution", "7"])
        assert code == 0
        assert (run_dir / "trajectory.csv").read_text().splitlines()[0] == \
            "epoch,pc1,pc2,lr_at_epoch,loss"
        assert (run_dir / "surface.csv").read_text().splitlines()[0] == "alpha,beta,loss"
        meta = json.loads((run_dir / "pca_meta.json").read_text())
        assert set(meta) == {"explained_variance_1", "explained_variance_2", "degenerate"}
        assert meta["degenerate"] is False
        # trajectory row count: epoch 0 + one per epoch
        assert len((run_dir / "trajectory.csv").read_text().splitlines()) == 8

    def test_verify_roundtrip_and_tamper(self, tmp_path, logistic_config_file, capsys):
        main(["train", "--config", str(logistic_config_file)])
        run_dir = tmp_path / "run"
        assert main(["verify", "--run-dir", str(run_dir)]) == 0
        steps = (run_dir / "steps.csv").read_text().splitlines()
        cells = steps[1].split(",")
        cells[2] = "0.123456"
        steps[1] = ",".join(cells)
        (run_dir / "steps.csv").write_text("\n".join(steps) + "\n")
        assert main(["verify", "--run-dir", str(run_dir)]) == 4


def test_module_entry_point_runs():
    result = subprocess.run(
        [sys.executable, "-m", "lrlab.cli", "--help"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert "range-test" in result.stdout
