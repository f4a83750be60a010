"""Momentum SGD and Adam on flat float64 parameter vectors.

Update rules (per step, learning rate supplied by the caller):

    sgd:   v <- mu * v + g
           p <- p - lr * v

    adam:  t <- t + 1
           m <- b1 * m + (1 - b1) * g
           v <- b2 * v + (1 - b2) * g**2
           p <- p - lr * (m / (1 - b1**t)) / (sqrt(v / (1 - b2**t)) + eps)

Steps never mutate their inputs; identical inputs give bit-identical
outputs.  All arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["DivergenceError", "SgdState", "AdamState", "sgd_step", "adam_step"]


class DivergenceError(RuntimeError):
    """Raised when a gradient carries non-finite entries."""


@dataclass
class SgdState:
    velocity: np.ndarray
    momentum_mu: float = 0.0

    @classmethod
    def init(cls, dim: int, momentum_mu: float = 0.0) -> "SgdState":
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if not (0.0 <= momentum_mu < 1.0):
            raise ValueError(f"momentum_mu must lie in [0, 1), got {momentum_mu}")
        return cls(velocity=np.zeros(dim, dtype=np.float64), momentum_mu=float(momentum_mu))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def init(
        cls, dim: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
    ) -> "AdamState":
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if not (0.0 <= beta1 < 1.0) or not (0.0 <= beta2 < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        if not (eps > 0.0 and math.isfinite(eps)):
            raise ValueError(f"eps must be a small positive number, got {eps}")
        return cls(
            m=np.zeros(dim, dtype=np.float64),
            v=np.zeros(dim, dtype=np.float64),
            beta1=float(beta1),
            beta2=float(beta2),
            eps=float(eps),
            t=0,
        )


def _check_inputs(params, grad, state_dim: int, lr: float) -> tuple[np.ndarray, np.ndarray]:
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.ndim != 1 or grad.ndim != 1:
        raise ValueError("params and grad must be flat 1-D vectors")
    if params.shape != grad.shape or params.shape[0] != state_dim:
        raise ValueError(
            f"dimension mismatch: params {params.shape[0]}, grad {grad.shape[0]}, "
            f"state {state_dim}"
        )
    if not (math.isfinite(lr) and lr > 0):
        raise ValueError(f"lr must be positive and finite, got {lr}")
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("gradient contains non-finite entries")
    return params, grad


def sgd_step(params, grad, lr: float, state: SgdState) -> tuple[np.ndarray, SgdState]:
    """One momentum-SGD update; returns (new params, new state)."""
    params, grad = _check_inputs(params, grad, state.velocity.shape[0], lr)
    velocity = state.momentum_mu * state.velocity + grad
    new_params = params - lr * velocity
    return new_params, SgdState(velocity=velocity, momentum_mu=state.momentum_mu)


def adam_step(params, grad, lr: float, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One Adam update with bias correction; returns (new params, new state)."""
    params, grad = _check_inputs(params, grad, state.m.shape[0], lr)
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, AdamState(
        m=m, v=v, beta1=state.beta1, beta2=state.beta2, eps=state.eps, t=t
    )
