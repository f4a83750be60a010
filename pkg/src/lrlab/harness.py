"""Experiment orchestration: seeded training runs, policy comparisons, batch
sweeps, and plain-text run records.

Everything an experiment needs lives in one :class:`RunConfig` (four
sections: task, optimizer, schedule, run scalars), which round-trips through
JSON losslessly.  A run writes ``steps.csv``, ``epochs.csv``, ``run.json``
and a checkpoint directory; identical configs produce byte-identical
records.  The lr column of a finished run can always be recomputed from the
schedule spec alone, which ``verify_run`` exploits to replay and cross-check
stored records.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .optimizers import AdamState, DivergenceError, SgdState, adam_step, sgd_step
from .schedules import ClrPolicy, policy_from_spec, validate_step_size
from .tasks import eval_grad, eval_loss, make_task

__all__ = [
    "ConfigError",
    "RunConfig",
    "TrainingRun",
    "CompareRow",
    "SweepEntry",
    "SweepReport",
    "train",
    "compare_policies",
    "batch_sweep",
    "run_name",
    "format_rate",
    "save_run",
    "load_run_config",
    "load_checkpoints",
    "verify_run",
    "write_sweep_csv",
    "write_compare_csv",
]

_BATCH_TAG = 0x77
# first-loss reference window for the 10x blow-up rule
_DIVERGENCE_REF_STEPS = 10
_DIVERGENCE_FACTOR = 10.0


class ConfigError(ValueError):
    """Configuration rejected before any compute."""


@dataclass(frozen=True)
class RunConfig:
    task: dict
    optimizer: dict
    schedule: dict
    batch_size: int
    epochs: int
    iters_per_epoch: int
    seed: int
    checkpoint_every: int = 1
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        try:
            sections = {k: dict(raw[k]) for k in ("task", "optimizer", "schedule")}
            run = dict(raw["run"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(
                "config must contain 'task', 'optimizer', 'schedule' and 'run' sections"
            ) from exc
        known = {"batch_size", "epochs", "iters_per_epoch", "seed", "checkpoint_every",
                 "output_dir"}
        unknown = set(run) - known
        if unknown:
            raise ConfigError(f"unknown run fields: {sorted(unknown)}")
        try:
            return cls(
                task=sections["task"],
                optimizer=sections["optimizer"],
                schedule=sections["schedule"],
                batch_size=int(run["batch_size"]),
                epochs=int(run["epochs"]),
                iters_per_epoch=int(run["iters_per_epoch"]),
                seed=int(run["seed"]),
                checkpoint_every=int(run.get("checkpoint_every", 1)),
                output_dir=run.get("output_dir"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad run section: {exc}") from exc

    def to_dict(self) -> dict:
        run = {
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "iters_per_epoch": self.iters_per_epoch,
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
        }
        if self.output_dir is not None:
            run["output_dir"] = self.output_dir
        return {
            "task": dict(self.task),
            "optimizer": dict(self.optimizer),
            "schedule": dict(self.schedule),
            "run": run,
        }

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def validate(self) -> None:
        for name in ("batch_size", "epochs", "iters_per_epoch", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        try:
            task = make_task(self.task)
            policy_from_spec(self.schedule)
            _init_optimizer(self.optimizer, task.param_dim)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        n_train = task.train_size()
        if n_train is not None and self.batch_size > n_train:
            raise ConfigError(
                f"batch_size {self.batch_size} exceeds the training split ({n_train})"
            )


def _init_optimizer(spec: dict, dim: int):
    if not isinstance(spec, dict):
        raise ValueError(f"optimizer spec must be a mapping, got {type(spec).__name__}")
    kind = spec.get("kind")
    if kind == "sgd":
        state = SgdState.init(dim, momentum_mu=spec.get("momentum", 0.9))
        return state, sgd_step
    if kind == "adam":
        state = AdamState.init(
            dim,
            beta1=spec.get("beta1", 0.9),
            beta2=spec.get("beta2", 0.999),
            eps=spec.get("eps", 1e-8),
        )
        return state, adam_step
    raise ValueError(f"optimizer kind must be 'sgd' or 'adam', got {kind!r}")


def format_rate(x: float) -> str:
    """Compact rate spelling for run names: 0.0005 -> '5e-4', 6.9 -> '6.9'."""
    if x != 0 and (abs(x) < 1e-3 or abs(x) >= 1e4):
        mantissa, exponent = f"{x:.4e}".split("e")
        mantissa = mantissa.rstrip("0").rstrip(".")
        return f"{mantissa}e{int(exponent)}"
    return f"{x:.6g}"


def run_name(config: RunConfig) -> str:
    """Directory-friendly run label: <opt>_<policy>_<shrink>_<rate>."""
    opt = config.optimizer.get("kind", "opt")
    sched = config.schedule
    policy = sched.get("policy")
    if policy == "clr":
        shrink = "yshrink" if sched.get("gamma", 1.0) != 1.0 else "nshrink"
        return f"{opt}_cyc_{shrink}_{format_rate(sched['max_lr'])}"
    if policy == "inv":
        return f"{opt}_inv_{format_rate(sched['peak_lr'])}"
    if policy == "constant":
        return f"{opt}_const_{format_rate(sched['lr'])}"
    return f"{opt}_{policy}"


@dataclass
class TrainingRun:
    config: RunConfig
    name: str
    status: str                      # completed | diverged | error
    diverged_step: int | None
    steps: list[tuple[int, int, float, float]]      # (step, epoch, lr, train_loss)
    epoch_records: list[tuple[int, float, float]]   # (epoch, val_loss, val_metric)
    checkpoints: dict[int, np.ndarray]              # epoch -> weights
    metric_mode: str                 # 'max' (accuracy) or 'min' (loss)
    final_params: np.ndarray

    def best(self) -> tuple[float, int] | None:
        """(best val metric, epoch it occurred) or None when no epoch finished."""
        if not self.epoch_records:
            return None
        records = [(metric, epoch) for epoch, _, metric in self.epoch_records]
        if self.metric_mode == "max":
            metric, epoch = max(records, key=lambda r: (r[0], -r[1]))
        else:
            metric, epoch = min(records, key=lambda r: (r[0], r[1]))
        return metric, epoch


def train(config: RunConfig) -> TrainingRun:
    """Run epochs x iters_per_epoch optimizer steps under the configured policy.

    The recorded lr at each step is exactly the schedule's closed-form value.
    Divergence (non-finite loss, or loss above 10x the mean of the first few
    losses) halts the run and records the first offending step.  Checkpoints
    are stored at epoch 0, every ``checkpoint_every`` epochs, and the final
    epoch.
    """
    config.validate()
    task = make_task(config.task)
    policy = policy_from_spec(config.schedule)
    if isinstance(policy, ClrPolicy):
        advice = validate_step_size(policy.step_size, config.iters_per_epoch)
        if not advice.within_guideline:
            warnings.warn(advice.message, stacklevel=2)

    params = task.initial_params(config.seed)
    state, step_fn = _init_optimizer(config.optimizer, task.param_dim)
    n_train = task.train_size()
    val_handle = task.val_batch()

    steps: list[tuple[int, int, float, float]] = []
    epoch_records: list[tuple[int, float, float]] = []
    checkpoints: dict[int, np.ndarray] = {0: params.copy()}
    status = "completed"
    diverged_step: int | None = None
    ref_losses: list[float] = []
    ref: float | None = None

    total = config.epochs * config.iters_per_epoch
    done = False
    for epoch in range(1, config.epochs + 1):
        for i in range(config.iters_per_epoch):
            t = (epoch - 1) * config.iters_per_epoch + i
            lr = policy.lr_at(t)
            if n_train is None:
                batch = None
            else:
                batch = task.sample_batch((config.seed, _BATCH_TAG, t), config.batch_size)
            loss = eval_loss(task, params, batch)
            steps.append((t, epoch, lr, loss))
            if not math.isfinite(loss):
                status, diverged_step, done = "diverged", t, True
                break
            if ref is None:
                ref_losses.append(loss)
                if len(ref_losses) == min(_DIVERGENCE_REF_STEPS, total):
                    ref = sum(ref_losses) / len(ref_losses)
            if ref is not None and loss > _DIVERGENCE_FACTOR * ref:
                status, diverged_step, done = "diverged", t, True
                break
            try:
                grad = eval_grad(task, params, batch)
                params, state = step_fn(params, grad, lr, state)
            except DivergenceError:
                status, diverged_step, done = "diverged", t, True
                break
            if not np.all(np.isfinite(params)):
                status, diverged_step, done = "diverged", t, True
                break
        if done:
            break
        val_loss = eval_loss(task, params, val_handle)
        if task.classification:
            val_metric = task.accuracy(params, val_handle)
        else:
            val_metric = val_loss
        epoch_records.append((epoch, val_loss, val_metric))
        if epoch % config.checkpoint_every == 0 or epoch == config.epochs:
            checkpoints[epoch] = params.copy()

    run = TrainingRun(
        config=config,
        name=run_name(config),
        status=status,
        diverged_step=diverged_step,
        steps=steps,
        epoch_records=epoch_records,
        checkpoints=checkpoints,
        metric_mode="max" if task.classification else "min",
        final_params=params,
    )
    if config.output_dir:
        save_run(run, config.output_dir)
    return run


# ---------------------------------------------------------------- persistence

def save_run(run: TrainingRun, run_dir) -> None:
    os.makedirs(run_dir, exist_ok=True)
    with open(os.path.join(run_dir, "steps.csv"), "w") as fh:
        fh.write("step,epoch,lr,train_loss\n")
        for t, epoch, lr, loss in run.steps:
            fh.write(f"{t},{epoch},{lr!r},{loss!r}\n")
    with open(os.path.join(run_dir, "epochs.csv"), "w") as fh:
        fh.write("epoch,val_loss,val_metric\n")
        for epoch, val_loss, val_metric in run.epoch_records:
            fh.write(f"{epoch},{val_loss!r},{val_metric!r}\n")
    payload = {
        "name": run.name,
        "status": run.status,
        "diverged_step": run.diverged_step,
        "metric_mode": run.metric_mode,
        "config": run.config.to_dict(),
    }
    with open(os.path.join(run_dir, "run.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    ckpt_dir = os.path.join(run_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    manifest = {"param_dim": int(run.final_params.shape[0]), "entries": []}
    for epoch in sorted(run.checkpoints):
        fname = f"epoch_{epoch:04d}.txt"
        weights = run.checkpoints[epoch]
        with open(os.path.join(ckpt_dir, fname), "w") as fh:
            fh.write("\n".join(repr(float(x)) for x in weights) + "\n")
        manifest["entries"].append({"epoch": epoch, "file": fname})
    with open(os.path.join(ckpt_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_run_config(run_dir) -> tuple[RunConfig, dict]:
    with open(os.path.join(run_dir, "run.json")) as fh:
        payload = json.load(fh)
    return RunConfig.from_dict(payload["config"]), payload


def load_checkpoints(run_dir) -> tuple[list[int], list[np.ndarray]]:
    ckpt_dir = os.path.join(run_dir, "checkpoints")
    with open(os.path.join(ckpt_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    epochs, vectors = [], []
    for entry in manifest["entries"]:
        with open(os.path.join(ckpt_dir, entry["file"])) as fh:
            vec = np.array([float(line) for line in fh.read().split()], dtype=np.float64)
        if vec.shape[0] != manifest["param_dim"]:
            raise ValueError(
                f"checkpoint {entry['file']} has {vec.shape[0]} entries, "
                f"manifest says {manifest['param_dim']}"
            )
        epochs.append(int(entry["epoch"]))
        vectors.append(vec)
    return epochs, vectors


def verify_run(run_dir) -> tuple[int, list[int]]:
    """Replay the lr column of a stored run from its schedule spec alone.

    Returns (rows checked, list of mismatching step indices); stored and
    recomputed rates must agree exactly, not approximately.
    """
    config, _ = load_run_config(run_dir)
    policy = policy_from_spec(config.schedule)
    mismatches = []
    checked = 0
    with open(os.path.join(run_dir, "steps.csv")) as fh:
        header = fh.readline().strip()
        if header != "step,epoch,lr,train_loss":
            raise ValueError(f"unexpected steps.csv header: {header}")
        for line in fh:
            cells = line.strip().split(",")
            step = int(cells[0])
            stored = float(cells[2])
            if stored != policy.lr_at(step):
                mismatches.append(step)
            checked += 1
    return checked, mismatches


# ------------------------------------------------------------- orchestration

@dataclass
class CompareRow:
    name: str
    best_metric: float | None
    best_epoch: int | None
    status: str


def compare_policies(configs: list[RunConfig], out_dir=None) -> list[CompareRow]:
    """Train each config and tabulate (name, best val metric, best epoch, status).

    Configs must differ only in their schedule/optimizer sections; anything
    else would confound the comparison.  Rows come back best-first.
    """
    if len(configs) < 2:
        raise ConfigError("need at least 2 configs to compare")
    reference = configs[0]
    for other in configs[1:]:
        same = (
            other.task == reference.task
            and other.batch_size == reference.batch_size
            and other.seed == reference.seed
            and other.epochs == reference.epochs
            and other.iters_per_epoch == reference.iters_per_epoch
        )
        if not same:
            raise ConfigError(
                "confounded comparison: configs may differ only in schedule/optimizer"
            )
    rows = []
    modes = set()
    for index, config in enumerate(configs):
        if out_dir is not None:
            sub = os.path.join(out_dir, f"{index:02d}_{run_name(config)}")
            config = replace(config, output_dir=sub)
        run = train(config)
        modes.add(run.metric_mode)
        best = run.best()
        rows.append(
            CompareRow(
                name=run.name,
                best_metric=None if best is None else best[0],
                best_epoch=None if best is None else best[1],
                status=run.status,
            )
        )
    mode = modes.pop()

    def sort_key(row: CompareRow):
        if row.best_metric is None:
            return math.inf
        return -row.best_metric if mode == "max" else row.best_metric

    rows.sort(key=sort_key)
    if out_dir is not None:
        write_compare_csv(os.path.join(out_dir, "compare.csv"), rows)
    return rows


def write_compare_csv(path, rows: list[CompareRow]) -> None:
    lines = ["policy,best_val_metric,best_epoch,status"]
    for row in rows:
        metric = "" if row.best_metric is None else repr(row.best_metric)
        epoch = "" if row.best_epoch is None else str(row.best_epoch)
        lines.append(f"{row.name},{metric},{epoch},{row.status}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class SweepEntry:
    batch_size: int
    final_val: float | None
    best_val: float | None
    best_epoch: int | None
    diverged: bool


@dataclass
class SweepReport:
    entries: list[SweepEntry] = field(default_factory=list)


def batch_sweep(base_config: RunConfig, batch_sizes: list[int], out_dir=None) -> SweepReport:
    """One training run per batch size, identical otherwise.

    All runs share the parameter-init seed; each samples its own batches.  A
    diverged run is flagged in its own entry and never disturbs the others.
    """
    if not batch_sizes:
        raise ConfigError("need at least one batch size")
    if any(not isinstance(b, int) or b < 1 for b in batch_sizes):
        raise ConfigError(f"batch sizes must be positive integers, got {batch_sizes}")
    if len(set(batch_sizes)) != len(batch_sizes):
        raise ConfigError(f"batch sizes must be distinct, got {batch_sizes}")
    task = make_task(base_config.task)
    n_train = task.train_size()
    if n_train is not None:
        too_big = [b for b in batch_sizes if b > n_train]
        if too_big:
            raise ConfigError(
                f"batch sizes {too_big} exceed the training split size {n_train}"
            )
    report = SweepReport()
    for bs in batch_sizes:
        config = replace(base_config, batch_size=bs)
        if out_dir is not None:
            config = replace(config, output_dir=os.path.join(out_dir, f"bs_{bs:05d}"))
        run = train(config)
        val_losses = [(val_loss, epoch) for epoch, val_loss, _ in run.epoch_records]
        if val_losses:
            best_val, best_epoch = min(val_losses, key=lambda r: (r[0], r[1]))
            final_val = val_losses[-1][0]
        else:
            best_val = best_epoch = final_val = None
        report.entries.append(
            SweepEntry(
                batch_size=bs,
                final_val=final_val,
                best_val=best_val,
                best_epoch=best_epoch,
                diverged=run.status == "diverged",
            )
        )
    if out_dir is not None:
        write_sweep_csv(os.path.join(out_dir, "sweep.csv"), report)
    return report


def write_sweep_csv(path, report: SweepReport) -> None:
    lines = ["batch_size,best_val,best_epoch,diverged"]
    for e in report.entries:
        best_val = "" if e.best_val is None else repr(e.best_val)
        best_epoch = "" if e.best_epoch is None else str(e.best_epoch)
        lines.append(f"{e.batch_size},{best_val},{best_epoch},{str(e.diverged).lower()}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
