#!/usr/bin/env python3
"""Train the tiny attention task, then project its weight trajectory.

Runs a short cyclical-rate training, stacks the per-epoch checkpoints into a
trajectory matrix, reports the top-2 explained variance, and writes
trajectory.csv / surface.csv / pca_meta.json for offline plotting.
"""

import argparse
import subprocess
import sys

from lrlab.harness import RunConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=12)
    ap.add_argument("--out", default="runs/attention_clr")
    ap.add_argument("--resolution", type=int, default=15)
    args = ap.parse_args()

    config = RunConfig(
        task={"kind": "tiny_attention", "vocab_size": 5, "seq_len": 6, "d_model": 8,
              "seed": 0, "n_samples": 160},
        optimizer={"kind": "adam"},
        schedule={"policy": "clr", "base_lr": 1e-3, "max_lr": 5e-2, "step_size": 40},
        batch_size=32,
        epochs=args.epochs,
        iters_per_epoch=20,
        seed=1,
        checkpoint_every=1,
        output_dir=args.out,
    )
    result = train(config)
    best = result.best()
    print(f"run {result.name}: status={result.status}, "
          f"best val accuracy {best[0]:.3f} at epoch {best[1]}")

    code = subprocess.call([sys.executable, "-m", "lrlab.cli", "landscape",
                            "--run-dir", args.out,
                            "--resolution", str(args.resolution)])
    sys.exit(code)


if __name__ == "__main__":
    main()
