import json

import numpy as np
import pytest

from lrlab.harness import (
    ConfigError,
    RunConfig,
    batch_sweep,
    compare_policies,
    format_rate,
    load_checkpoints,
    run_name,
    train,
    verify_run,
)


def quadratic_config(lr=0.5, epochs=1, iters=10, **run_kwargs):
    return RunConfig(
        task={"kind": "quadratic", "spectrum": [1.0]},
        optimizer={"kind": "sgd", "momentum": 0.0},
        schedule={"policy": "constant", "lr": lr},
        batch_size=1,
        epochs=epochs,
        iters_per_epoch=iters,
        seed=0,
        **run_kwargs,
    )


def logistic_config(**overrides):
    base = dict(
        task={"kind": "logistic", "n_samples": 200, "n_features": 6,
              "class_separation": 4.0, "seed": 7},
        optimizer={"kind": "adam"},
        schedule={"policy": "clr", "base_lr": 0.005, "max_lr": 0.25, "step_size": 20},
        batch_size=16,
        epochs=6,
        iters_per_epoch=10,
        seed=3,
    )
    base.update(overrides)
    return RunConfig(**base)


class TestConfig:
    def test_round_trips_through_dict(self):
        cfg = logistic_config(output_dir="somewhere")
        assert RunConfig.from_dict(cfg.to_dict()) == cfg

    def test_round_trips_through_file(self, tmp_path):
        cfg = logistic_config()
        path = tmp_path / "config.json"
        cfg.save(path)
        assert RunConfig.load(path) == cfg
        # byte-stable serialization
        text1 = path.read_text()
        cfg.save(path)
        assert path.read_text() == text1

    def test_missing_section_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"task": {}, "optimizer": {}, "run": {}})

    def test_unknown_run_field_rejected(self):
        raw = logistic_config().to_dict()
        raw["run"]["gpu"] = True
        with pytest.raises(ConfigError):
            RunConfig.from_dict(raw)

    def test_validate_catches_bad_sections(self):
        with pytest.raises(ConfigError):
            logistic_config(schedule={"policy": "clr", "base_lr": 0.5, "max_lr": 0.1,
                                      "step_size": 10}).validate()
        with pytest.raises(ConfigError):
            logistic_config(optimizer={"kind": "rmsprop"}).validate()
        with pytest.raises(ConfigError):
            logistic_config(task={"kind": "nope"}).validate()
        with pytest.raises(ConfigError):
            logistic_config(epochs=0).validate()

    def test_batch_size_beyond_split_rejected(self):
        with pytest.raises(ConfigError):
            logistic_config(batch_size=500).validate()


class TestTrain:
    def test_scalar_gd_contracts_exactly(self):
        # constant lr 0.5 on the unit quadratic: per-step loss ratio (1-0.5)^2
        run = train(quadratic_config(lr=0.5))
        losses = [loss for _, _, _, loss in run.steps]
        for before, after in zip(losses, losses[1:]):
            assert after / before == pytest.approx(0.25, abs=1e-12)
        assert run.status == "completed"

    def test_unstable_rate_diverges_quickly(self):
        run = train(quadratic_config(lr=10.0, epochs=2, iters=100))
        assert run.status == "diverged"
        assert run.diverged_step is not None and run.diverged_step < 200

    def test_lr_column_matches_schedule_closed_form(self):
        cfg = logistic_config()
        run = train(cfg)
        from lrlab.schedules import policy_from_spec

        policy = policy_from_spec(cfg.schedule)
        for t, _, lr, _ in run.steps:
            assert lr == policy.lr_at(t)

    def test_epoch_numbering_and_validation_cadence(self):
        run = train(logistic_config(epochs=4))
        assert [e for e, _, _ in run.epoch_records] == [1, 2, 3, 4]

    def test_checkpoint_cadence_includes_init_and_final(self):
        run = train(logistic_config(epochs=5, checkpoint_every=2))
        assert sorted(run.checkpoints) == [0, 2, 4, 5]
        for weights in run.checkpoints.values():
            assert weights.shape == (7,)

    def test_reproducible_byte_identical_records(self, tmp_path):
        cfg_a = logistic_config(output_dir=str(tmp_path / "a"))
        cfg_b = logistic_config(output_dir=str(tmp_path / "b"))
        train(cfg_a)
        train(cfg_b)
        for name in ["steps.csv", "epochs.csv"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_off_guideline_step_size_warns_but_runs(self):
        cfg = logistic_config(
            schedule={"policy": "clr", "base_lr": 0.005, "max_lr": 0.25, "step_size": 5}
        )
        with pytest.warns(UserWarning, match="guideline"):
            run = train(cfg)
        assert run.status == "completed"

    def test_metric_mode_follows_task(self):
        assert train(logistic_config(epochs=2)).metric_mode == "max"
        assert train(quadratic_config()).metric_mode == "min"

    def test_best_prefers_earliest_on_ties(self):
        run = train(logistic_config())
        best_metric, best_epoch = run.best()
        candidates = [e for e, _, m in run.epoch_records if m == best_metric]
        assert best_epoch == min(candidates)


class TestPersistence:
    def test_saved_layout_and_verify(self, tmp_path):
        cfg = logistic_config(output_dir=str(tmp_path / "run"))
        run = train(cfg)
        run_dir = tmp_path / "run"
        assert (run_dir / "steps.csv").exists()
        assert (run_dir / "epochs.csv").exists()
        assert (run_dir / "run.json").exists()
        payload = json.loads((run_dir / "run.json").read_text())
        assert payload["status"] == "completed"
        assert payload["name"] == run.name
        checked, mismatches = verify_run(run_dir)
        assert checked == len(run.steps)
        assert mismatches == []

    def test_verify_detects_tampering(self, tmp_path):
        cfg = logistic_config(output_dir=str(tmp_path / "run"))
        train(cfg)
        steps = (tmp_path / "run" / "steps.csv").read_text().splitlines()
        cells = steps[3].split(",")
        cells[2] = repr(float(cells[2]) * 1.5)
        steps[3] = ",".join(cells)
        (tmp_path / "run" / "steps.csv").write_text("\n".join(steps) + "\n")
        checked, mismatches = verify_run(tmp_path / "run")
        assert mismatches == [2]

    def test_checkpoints_round_trip_exactly(self, tmp_path):
        cfg = logistic_config(output_dir=str(tmp_path / "run"))
        run = train(cfg)
        epochs, vectors = load_checkpoints(tmp_path / "run")
        assert epochs == sorted(run.checkpoints)
        for epoch, vec in zip(epochs, vectors):
            assert np.array_equal(vec, run.checkpoints[epoch])

    def test_steps_csv_headers(self, tmp_path):
        cfg = logistic_config(output_dir=str(tmp_path / "run"))
        train(cfg)
        assert (tmp_path / "run" / "steps.csv").read_text().splitlines()[0] == \
            "step,epoch,lr,train_loss"
        assert (tmp_path / "run" / "epochs.csv").read_text().splitlines()[0] == \
            "epoch,val_loss,val_metric"


class TestNaming:
    def test_format_rate(self):
        assert format_rate(5e-4) == "5e-4"
        assert format_rate(6.9) == "6.9"
        assert format_rate(0.01) == "0.01"
        assert format_rate(30.0) == "30"
        assert format_rate(7.6e-4) == "7.6e-4"

    def test_run_names(self):
        cfg = logistic_config(
            schedule={"policy": "clr", "base_lr": 1e-5, "max_lr": 5e-4, "step_size": 20}
        )
        assert run_name(cfg) == "adam_cyc_nshrink_5e-4"
        cfg = logistic_config(
            schedule={"policy": "clr", "base_lr": 1e-5, "max_lr": 5e-4, "step_size": 20,
                      "gamma": 0.5}
        )
        assert run_name(cfg) == "adam_cyc_yshrink_5e-4"
        cfg = logistic_config(schedule={"policy": "inv", "peak_lr": 5e-4,
                                        "warmup_steps": 40})
        assert run_name(cfg) == "adam_inv_5e-4"
        cfg = logistic_config(optimizer={"kind": "sgd", "momentum": 0.9},
                              schedule={"policy": "constant", "lr": 30.0})
        assert run_name(cfg) == "sgd_const_30"


class TestCompare:
    def test_identical_configs_identical_metrics(self):
        rows = compare_policies([logistic_config(epochs=3), logistic_config(epochs=3)])
        assert rows[0].best_metric == rows[1].best_metric
        assert rows[0].best_epoch == rows[1].best_epoch

    def test_rows_sorted_best_first(self, tmp_path):
        configs = [
            logistic_config(),
            logistic_config(schedule={"policy": "inv", "peak_lr": 0.25,
                                      "warmup_steps": 20}),
            logistic_config(schedule={"policy": "constant", "lr": 1e-5}),
        ]
        rows = compare_policies(configs, out_dir=str(tmp_path))
        assert len(rows) == 3
        metrics = [row.best_metric for row in rows]
        assert metrics == sorted(metrics, reverse=True)
        table = (tmp_path / "compare.csv").read_text().splitlines()
        assert table[0] == "policy,best_val_metric,best_epoch,status"
        assert len(table) == 4

    def test_confounded_comparison_rejected(self):
        with pytest.raises(ConfigError, match="confounded"):
            compare_policies([logistic_config(), logistic_config(seed=4)])
        with pytest.raises(ConfigError, match="confounded"):
            compare_policies([logistic_config(), logistic_config(batch_size=8)])

    def test_needs_two_configs(self):
        with pytest.raises(ConfigError):
            compare_policies([logistic_config()])

    def test_loss_metric_sorted_ascending_best_first(self):
        configs = [
            quadratic_config(lr=0.5, epochs=2),
            quadratic_config(lr=0.01, epochs=2),
        ]
        rows = compare_policies(configs)
        assert rows[0].best_metric <= rows[1].best_metric

    def test_cyclical_escapes_plateau_where_constant_cannot(self):
        # 250-step budget on the ramp-into-basin task: the cyclical policy's
        # high phase crosses the ramp, the constant base rate does not
        common = dict(
            task={"kind": "plateau"},
            optimizer={"kind": "sgd", "momentum": 0.0},
            batch_size=1, epochs=10, iters_per_epoch=25, seed=0,
        )
        rows = compare_policies([
            RunConfig(schedule={"policy": "clr", "base_lr": 0.1, "max_lr": 1.9,
                                "step_size": 50}, **common),
            RunConfig(schedule={"policy": "constant", "lr": 0.1}, **common),
        ])
        assert rows[0].name.startswith("sgd_cyc")
        assert rows[0].best_metric < 0.1
        assert rows[1].best_metric >= 0.1


class TestBatchSweep:
    def test_three_sizes_complete(self, tmp_path):
        report = batch_sweep(logistic_config(epochs=3), [8, 32, 128],
                             out_dir=str(tmp_path))
        assert [e.batch_size for e in report.entries] == [8, 32, 128]
        assert all(not e.diverged for e in report.entries)
        assert all(e.best_val is not None for e in report.entries)
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "batch_size,best_val,best_epoch,diverged"
        assert len(lines) == 4

    def test_diverged_entry_flagged_report_still_produced(self):
        # unstable rate on the quadratic: every run blows up, yet the report
        # still carries one flagged entry per requested size
        cfg = quadratic_config(lr=10.0, epochs=1, iters=50)
        report = batch_sweep(cfg, [1, 2])
        assert len(report.entries) == 2
        assert all(e.diverged for e in report.entries)
        assert all(e.best_val is None for e in report.entries)

    def test_duplicate_sizes_rejected(self):
        with pytest.raises(ConfigError, match="distinct"):
            batch_sweep(logistic_config(), [8, 8, 32])

    def test_oversized_batch_rejected(self):
        with pytest.raises(ConfigError, match="exceed"):
            batch_sweep(logistic_config(), [8, 10_000])

    def test_runs_share_init_but_sample_their_own_batches(self, tmp_path):
        report = batch_sweep(logistic_config(epochs=2), [8, 16], out_dir=str(tmp_path))
        init8 = (tmp_path / "bs_00008" / "checkpoints" / "epoch_0000.txt").read_text()
        init16 = (tmp_path / "bs_00016" / "checkpoints" / "epoch_0000.txt").read_text()
        assert init8 == init16
        steps8 = (tmp_path / "bs_00008" / "steps.csv").read_text()
        steps16 = (tmp_path / "bs_00016" / "steps.csv").read_text()
        assert steps8 != steps16
