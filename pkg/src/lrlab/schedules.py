"""Closed-form learning-rate policies.

Each policy is an immutable value and each rate is a pure function of the
global optimizer step index, so the lr column of any training run can be
replayed exactly from the policy alone.  Conventions:

* the cyclical (triangular) policy and the constant policy use 0-based
  steps: step 0 is the first update and sits at ``base_lr``;
* the warmup/inverse-sqrt policy is 1-based internally (the decay formula
  is undefined at 0); its ``lr_at`` adapts 0-based harness steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ClrPolicy",
    "InvPolicy",
    "ConstantPolicy",
    "StepSizeAdvice",
    "clr_lr",
    "inv_lr",
    "validate_step_size",
    "policy_from_spec",
    "policy_to_spec",
]


def _require_positive(name: str, value) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValueError(f"{name} must be a number, got {value!r}")
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


def _require_count(name: str, value) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ValueError(f"{name} must be an integer >= 1, got {value!r}")


@dataclass(frozen=True)
class ClrPolicy:
    """Triangular cyclical learning rate.

    The rate climbs linearly from ``base_lr`` to ``max_lr`` over
    ``step_size`` steps, descends back over the next ``step_size`` steps,
    and repeats with period ``2 * step_size``.  ``gamma`` shrinks the
    triangle's amplitude once per cycle: the peak of cycle k is
    ``base_lr + (max_lr - base_lr) * gamma**(k - 1)``, so the rate never
    falls below ``base_lr``.  ``gamma = 1`` keeps every cycle identical.
    """

    base_lr: float
    max_lr: float
    step_size: int
    gamma: float = 1.0

    def __post_init__(self) -> None:
        _require_positive("base_lr", self.base_lr)
        _require_positive("max_lr", self.max_lr)
        if self.base_lr >= self.max_lr:
            raise ValueError(
                f"base_lr must be strictly below max_lr, got "
                f"base_lr={self.base_lr} max_lr={self.max_lr}"
            )
        _require_count("step_size", self.step_size)
        if not isinstance(self.gamma, (int, float)) or not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma!r}")

    @property
    def shrinks(self) -> bool:
        return self.gamma != 1.0

    def lr_at(self, step: int) -> float:
        return clr_lr(step, self)


@dataclass(frozen=True)
class InvPolicy:
    """Linear warmup to ``peak_lr``, then inverse-square-root decay.

    With 1-based step t: ``peak_lr * t / warmup_steps`` while
    ``t <= warmup_steps``, afterwards ``peak_lr * sqrt(warmup_steps / t)``.
    The rate peaks exactly at the warmup boundary and is non-increasing
    from there on.
    """

    peak_lr: float
    warmup_steps: int

    def __post_init__(self) -> None:
        _require_positive("peak_lr", self.peak_lr)
        _require_count("warmup_steps", self.warmup_steps)

    def lr_at(self, step: int) -> float:
        # harness steps are 0-based; the decay formula is 1-based
        return inv_lr(step + 1, self)


@dataclass(frozen=True)
class ConstantPolicy:
    """Fixed learning rate, the baseline control."""

    lr: float

    def __post_init__(self) -> None:
        _require_positive("lr", self.lr)

    def lr_at(self, step: int) -> float:
        if step < 0:
            raise ValueError(f"step must be >= 0, got {step}")
        return self.lr


def clr_lr(t: int, p: ClrPolicy) -> float:
    """Triangular rate at 0-based step ``t``.

    cycle = floor(1 + t / (2 * step_size)) counts cycles from 1; within a
    cycle the rate is a tent function of the phase x, with the amplitude
    scaled by gamma**(cycle - 1).
    """
    if t < 0:
        raise ValueError(f"step must be >= 0, got {t}")
    cycle = math.floor(1 + t / (2 * p.step_size))
    x = abs(t / p.step_size - 2 * cycle + 1)
    amplitude = (p.max_lr - p.base_lr) * p.gamma ** (cycle - 1)
    return p.base_lr + amplitude * max(0.0, 1.0 - x)


def inv_lr(t: int, p: InvPolicy) -> float:
    """Warmup/inverse-sqrt rate at 1-based step ``t``."""
    if t < 1:
        raise ValueError(f"step must be >= 1 (decay is undefined at 0), got {t}")
    if t <= p.warmup_steps:
        return p.peak_lr * t / p.warmup_steps
    return p.peak_lr * math.sqrt(p.warmup_steps / t)


@dataclass(frozen=True)
class StepSizeAdvice:
    """Advisory outcome of the half-cycle length guideline check."""

    within_guideline: bool
    lower: int
    upper: int
    message: str


def validate_step_size(step_size: int, iters_per_epoch: int) -> StepSizeAdvice:
    """Check a half-cycle length against the 2-10 epochs-per-half-cycle guideline.

    Purely advisory: the result carries a warning message when the value is
    out of range but never blocks execution.
    """
    _require_count("step_size", step_size)
    _require_count("iters_per_epoch", iters_per_epoch)
    lower = 2 * iters_per_epoch
    upper = 10 * iters_per_epoch
    within = lower <= step_size <= upper
    if within:
        message = (
            f"step_size={step_size} is within the guideline range "
            f"[{lower}, {upper}] for {iters_per_epoch} iterations/epoch"
        )
    else:
        message = (
            f"step_size={step_size} is outside the guideline range "
            f"[{lower}, {upper}] (2-10 epochs per half-cycle at "
            f"{iters_per_epoch} iterations/epoch); the run will proceed"
        )
    return StepSizeAdvice(within_guideline=within, lower=lower, upper=upper, message=message)


def policy_from_spec(spec: dict) -> ClrPolicy | InvPolicy | ConstantPolicy:
    """Build a policy from a plain config mapping (``policy`` key selects the kind)."""
    if not isinstance(spec, dict):
        raise ValueError(f"schedule spec must be a mapping, got {type(spec).__name__}")
    kind = spec.get("policy")
    known = {"clr", "inv", "constant"}
    if kind not in known:
        raise ValueError(f"schedule policy must be one of {sorted(known)}, got {kind!r}")
    fields = {k: v for k, v in spec.items() if k != "policy"}
    try:
        if kind == "clr":
            return ClrPolicy(**fields)
        if kind == "inv":
            return InvPolicy(**fields)
        return ConstantPolicy(**fields)
    except TypeError as exc:
        raise ValueError(f"bad fields for {kind} schedule: {exc}") from exc


def policy_to_spec(policy: ClrPolicy | InvPolicy | ConstantPolicy) -> dict:
    """Inverse of :func:`policy_from_spec`."""
    if isinstance(policy, ClrPolicy):
        return {
            "policy": "clr",
            "base_lr": policy.base_lr,
            "max_lr": policy.max_lr,
            "step_size": policy.step_size,
            "gamma": policy.gamma,
        }
    if isinstance(policy, InvPolicy):
        return {"policy": "inv", "peak_lr": policy.peak_lr, "warmup_steps": policy.warmup_steps}
    if isinstance(policy, ConstantPolicy):
        return {"policy": "constant", "lr": policy.lr}
    raise TypeError(f"not a schedule policy: {policy!r}")
