#!/usr/bin/env python3
"""Compare cyclical, warmup+inverse-sqrt and constant schedules on one task.

All runs share the task, seed and batch size; only the schedule (and
optionally the optimizer) differs, so the table isolates the policy effect.
"""

import argparse

from lrlab.harness import RunConfig, compare_policies


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    ap.add_argument("--epochs", type=int, default=15)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out", default=None, help="persist per-run records here")
    args = ap.parse_args()

    base = dict(
        task={"kind": "logistic", "n_samples": 400, "n_features": 8,
              "class_separation": 4.0, "seed": 7},
        optimizer={"kind": args.optimizer},
        batch_size=32,
        epochs=args.epochs,
        iters_per_epoch=10,
        seed=args.seed,
    )
    schedules = [
        {"policy": "clr", "base_lr": 1e-4, "max_lr": 0.3, "step_size": 40},
        {"policy": "clr", "base_lr": 1e-4, "max_lr": 0.3, "step_size": 40, "gamma": 0.5},
        {"policy": "inv", "peak_lr": 0.3, "warmup_steps": 40},
        {"policy": "constant", "lr": 1e-3},
    ]
    configs = [RunConfig(schedule=s, **base) for s in schedules]
    rows = compare_policies(configs, out_dir=args.out)

    print(f"{'policy':<32} {'best_val_metric':>16} {'best_epoch':>10} status")
    for row in rows:
        metric = "-" if row.best_metric is None else f"{row.best_metric:.6g}"
        epoch = "-" if row.best_epoch is None else str(row.best_epoch)
        print(f"{row.name:<32} {metric:>16} {epoch:>10} {row.status}")


if __name__ == "__main__":
    main()
