"""Command-line front end.

Subcommands: range-test, train, compare, batch-sweep, landscape, verify.
Exit codes: 0 success, 2 config error, 3 run diverged (train only),
4 analyzer failure (range test, landscape, or verify mismatch).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .harness import (
    ConfigError,
    RunConfig,
    batch_sweep,
    compare_policies,
    load_checkpoints,
    load_run_config,
    train,
    verify_run,
)
from .landscape import (
    build_trajectory_matrix,
    loss_surface_grid,
    pca_project,
    write_pca_meta_json,
    write_surface_csv,
    write_trajectory_csv,
)
from .range_test import (
    RangeTestError,
    run_range_test,
    select_lr_bounds,
    write_bounds_json,
    write_curve_csv,
)
from .schedules import policy_from_spec
from .tasks import eval_loss, make_task

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_ANALYZER = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("range-test", help="sweep the lr upward and select bounds")
    p.add_argument("--config", required=True)
    p.add_argument("--lr-start", type=float, required=True)
    p.add_argument("--lr-end", type=float, required=True)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--log-sweep", action="store_true",
                   help="geometric sweep instead of linear (for spans over ~3 decades)")
    p.add_argument("--prefer-aggressive", action="store_true",
                   help="choose the pre-divergence rate mlr2 instead of the plateau "
                        "onset mlr1 (often overshoots into non-convergence)")
    p.add_argument("--out", default=None, help="output directory (default: run output_dir)")

    p = sub.add_parser("train", help="run one training config")
    p.add_argument("--config", required=True)

    p = sub.add_parser("compare", help="train schedule/optimizer variants and tabulate")
    p.add_argument("--config", required=True)
    p.add_argument("--policies", required=True,
                   help="comma-separated JSON files, each with optional "
                        "'schedule'/'optimizer' sections overriding the base config")
    p.add_argument("--out", default=None)

    p = sub.add_parser("batch-sweep", help="replicate one config across batch sizes")
    p.add_argument("--config", required=True)
    p.add_argument("--sizes", required=True, help="comma-separated batch sizes")
    p.add_argument("--out", default=None)

    p = sub.add_parser("landscape", help="trajectory PCA + loss surface for a stored run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--extent", type=float, default=None,
                   help="grid half-width (default: 1.2x the max projected radius)")
    p.add_argument("--resolution", type=int, default=25)

    p = sub.add_parser("verify", help="replay the lr column of a stored run")
    p.add_argument("--run-dir", required=True)
    return parser


def _cmd_range_test(args) -> int:
    config = RunConfig.load(args.config)
    config.validate()
    task = make_task(config.task)
    opt = config.optimizer
    curve = run_range_test(
        task,
        opt.get("kind", "sgd"),
        args.lr_start,
        args.lr_end,
        args.steps,
        batch_size=config.batch_size,
        seed=config.seed,
        sweep_mode="logarithmic" if args.log_sweep else "linear",
        momentum=opt.get("momentum", 0.9),
        beta1=opt.get("beta1", 0.9),
        beta2=opt.get("beta2", 0.999),
        eps=opt.get("eps", 1e-8),
    )
    bounds = select_lr_bounds(curve, prefer_aggressive=args.prefer_aggressive)
    out = args.out or config.output_dir or "."
    os.makedirs(out, exist_ok=True)
    write_curve_csv(curve, os.path.join(out, "range_curve.csv"))
    write_bounds_json(bounds, curve.diverged, os.path.join(out, "lr_bounds.json"))
    print(
        f"range test: {len(curve.samples)} samples"
        + (" (diverged, truncated)" if curve.diverged else "")
    )
    print(
        f"base_lr={bounds.base_lr!r} mlr1={bounds.mlr1!r} mlr2={bounds.mlr2!r} "
        f"chosen_max={bounds.chosen_max!r}"
    )
    print(f"wrote {out}/range_curve.csv and {out}/lr_bounds.json")
    return EXIT_OK


def _cmd_train(args) -> int:
    config = RunConfig.load(args.config)
    run = train(config)
    best = run.best()
    where = config.output_dir or "(not persisted: no output_dir)"
    print(f"run {run.name}: status={run.status} steps={len(run.steps)} -> {where}")
    if best is not None:
        print(f"best val metric {best[0]!r} at epoch {best[1]}")
    if run.status == "diverged":
        print(f"diverged at step {run.diverged_step}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_compare(args) -> int:
    base = RunConfig.load(args.config)
    variants = []
    for path in args.policies.split(","):
        path = path.strip()
        try:
            with open(path) as fh:
                override = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read policy override {path}: {exc}") from exc
        raw = base.to_dict()
        for section in ("schedule", "optimizer"):
            if section in override:
                raw[section] = override[section]
        raw["run"].pop("output_dir", None)
        variants.append(RunConfig.from_dict(raw))
    rows = compare_policies(variants, out_dir=args.out or base.output_dir)
    print(f"{'policy':<32} {'best_val_metric':>16} {'best_epoch':>10} status")
    for row in rows:
        metric = "-" if row.best_metric is None else f"{row.best_metric:.6g}"
        epoch = "-" if row.best_epoch is None else str(row.best_epoch)
        print(f"{row.name:<32} {metric:>16} {epoch:>10} {row.status}")
    return EXIT_OK


def _cmd_batch_sweep(args) -> int:
    config = RunConfig.load(args.config)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --sizes value: {exc}") from exc
    report = batch_sweep(config, sizes, out_dir=args.out or config.output_dir)
    print("batch_size,best_val,best_epoch,diverged")
    for e in report.entries:
        best_val = "" if e.best_val is None else f"{e.best_val:.6g}"
        best_epoch = "" if e.best_epoch is None else str(e.best_epoch)
        print(f"{e.batch_size},{best_val},{best_epoch},{str(e.diverged).lower()}")
    return EXIT_OK


def _cmd_landscape(args) -> int:
    run_dir = args.run_dir
    config, payload = load_run_config(run_dir)
    epochs, vectors = load_checkpoints(run_dir)
    if len(vectors) < 3:
        print(f"need at least 3 checkpoints for a trajectory, found {len(vectors)}",
              file=sys.stderr)
        return EXIT_ANALYZER
    task = make_task(config.task)
    policy = policy_from_spec(config.schedule)
    matrix = build_trajectory_matrix(vectors)
    proj = pca_project(matrix)
    # lr at the last completed step of each checkpoint epoch (epoch 0 = init)
    lrs = [policy.lr_at(max(0, e * config.iters_per_epoch - 1)) for e in epochs]
    losses = [eval_loss(task, v) for v in vectors]
    write_trajectory_csv(os.path.join(run_dir, "trajectory.csv"),
                         epochs, proj.coords, lrs, losses)
    write_pca_meta_json(os.path.join(run_dir, "pca_meta.json"), proj)
    if proj.degenerate:
        print("degenerate trajectory (all checkpoints identical); surface skipped")
        return EXIT_OK
    radius = float(np.max(np.linalg.norm(proj.coords, axis=1)))
    extent = args.extent if args.extent is not None else 1.2 * radius
    if extent <= 0:
        extent = 1.0
    grid = loss_surface_grid(
        task, matrix.center, proj.directions[0], proj.directions[1],
        extent, args.resolution,
    )
    write_surface_csv(os.path.join(run_dir, "surface.csv"), grid)
    ev1, ev2 = proj.explained_variance
    print(f"explained variance: pc1={ev1:.4f} pc2={ev2:.4f} (sum {ev1 + ev2:.4f})")
    print(f"wrote trajectory.csv, surface.csv, pca_meta.json under {run_dir}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    checked, mismatches = verify_run(args.run_dir)
    if mismatches:
        print(f"lr replay FAILED: {len(mismatches)}/{checked} rows mismatch "
              f"(first at step {mismatches[0]})", file=sys.stderr)
        return EXIT_ANALYZER
    print(f"lr replay OK: {checked} rows match the schedule exactly")
    return EXIT_OK


_COMMANDS = {
    "range-test": _cmd_range_test,
    "train": _cmd_train,
    "compare": _cmd_compare,
    "batch-sweep": _cmd_batch_sweep,
    "landscape": _cmd_landscape,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RangeTestError as exc:
        print(f"range test failed: {exc}", file=sys.stderr)
        return EXIT_ANALYZER
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
