#!/usr/bin/env python3
"""Sweep the learning rate on the logistic blobs task and select bounds.

Writes range_curve.csv and lr_bounds.json under --out and prints the
selected base/max candidates.
"""

import argparse
import os

from lrlab.range_test import run_range_test, select_lr_bounds, write_bounds_json, write_curve_csv
from lrlab.tasks import LogisticTask


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    ap.add_argument("--lr-start", type=float, default=1e-4)
    ap.add_argument("--lr-end", type=float, default=2.0)
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/range_test")
    args = ap.parse_args()

    task = LogisticTask(n_samples=400, n_features=8, class_separation=4.0, seed=7)
    curve = run_range_test(task, args.optimizer, args.lr_start, args.lr_end,
                           args.steps, batch_size=32, seed=args.seed)
    bounds = select_lr_bounds(curve)

    os.makedirs(args.out, exist_ok=True)
    write_curve_csv(curve, os.path.join(args.out, "range_curve.csv"))
    write_bounds_json(bounds, curve.diverged, os.path.join(args.out, "lr_bounds.json"))

    print(f"{len(curve.samples)} sweep samples"
          + (" (diverged, truncated)" if curve.diverged else ""))
    print(f"base_lr     = {bounds.base_lr:.6g}   (loss starts to fall)")
    print(f"mlr1        = {bounds.mlr1:.6g}   (plateau onset, conservative)")
    print(f"mlr2        = {bounds.mlr2:.6g}   (pre-divergence, aggressive)")
    print(f"chosen_max  = {bounds.chosen_max:.6g}")
    print(f"outputs in {args.out}/")


if __name__ == "__main__":
    main()
