"""Seeded, differentiable desk-scale objectives with hand-coded gradients.

Every task exposes the same surface: a flat float64 parameter vector,
loss/grad evaluated on an optional batch handle, seeded batch sampling,
and a ``metadata`` dict of known analytic constants that tests and the
range-test oracles rely on.  Datasets are regenerated from the task seed
at construction time; nothing is persisted.

Batch handles are arrays of absolute row indices into the task's dataset
(``None`` means the full training split; analytic tasks ignore batches
entirely).  Correctness of every hand-coded gradient is enforced by
:func:`gradient_check` against central finite differences.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Task",
    "QuadraticTask",
    "PlateauTask",
    "LogisticTask",
    "TinyAttentionTask",
    "eval_loss",
    "eval_grad",
    "gd_stability_threshold",
    "gradient_check",
    "make_task",
]

# entropy tags keeping the independent RNG streams apart
_INIT_TAG = 0x11
_DATA_TAG = 0x22
_SPLIT_TAG = 0x33
_CHECK_TAG = 0x44


def _rng(*entropy) -> np.random.Generator:
    parts = []
    for e in entropy:
        if isinstance(e, (tuple, list)):
            parts.extend(int(x) for x in e)
        else:
            parts.append(int(e))
    return np.random.default_rng(np.random.SeedSequence(parts))


class Task:
    """Common surface for all objectives."""

    param_dim: int
    classification: bool = False
    metadata: dict

    def loss(self, params: np.ndarray, batch=None) -> float:
        raise NotImplementedError

    def grad(self, params: np.ndarray, batch=None) -> np.ndarray:
        raise NotImplementedError

    def sample_batch(self, seed, batch_size: int):
        """Seeded minibatch handle; analytic tasks have no data and return None."""
        return None

    def val_batch(self):
        """Held-out split handle, or None when the task has no dataset."""
        return None

    def train_size(self) -> int | None:
        return None

    def initial_params(self, seed) -> np.ndarray:
        return _rng(seed, _INIT_TAG).standard_normal(self.param_dim)

    def accuracy(self, params: np.ndarray, batch=None) -> float:
        raise NotImplementedError(f"{type(self).__name__} is not a classification task")


class QuadraticTask(Task):
    """Diagonal quadratic bowl: loss = 0.5 * sum(spectrum_i * theta_i**2).

    Constant-rate gradient descent on this objective converges iff the rate
    is strictly below 2 / max(spectrum), which makes the task the analytic
    oracle for divergence detection.
    """

    def __init__(self, spectrum):
        spectrum = np.asarray(spectrum, dtype=np.float64)
        if spectrum.ndim != 1 or spectrum.size == 0:
            raise ValueError("spectrum must be a non-empty 1-D vector")
        if not np.all(np.isfinite(spectrum)) or not np.all(spectrum > 0):
            raise ValueError("spectrum entries must be positive and finite")
        self.spectrum = spectrum
        self.param_dim = int(spectrum.size)
        lam_max = float(spectrum.max())
        self.metadata = {
            "max_eigenvalue": lam_max,
            "stability_threshold": 2.0 / lam_max,
            "min_loss": 0.0,
        }

    def loss(self, params, batch=None) -> float:
        return float(0.5 * np.sum(self.spectrum * params * params))

    def grad(self, params, batch=None) -> np.ndarray:
        return self.spectrum * params


class PlateauTask(Task):
    """Long shallow ramp feeding a quadratic basin, joined with a continuous derivative.

    Coordinate 0 carries the construct: the loss falls at the constant rate
    ``plateau_gradient`` across [0, plateau_length], then a quadratic basin of
    curvature ``basin_curvature`` catches the descent.  The global minimum
    value is 0 and sits just past the ramp.  Any extra coordinates are
    independent quadratics of curvature ``extra_curvature``.

    Gradient descent at constant rate lr advances lr * plateau_gradient per
    step on the ramp, so traversing it needs about
    plateau_length / (lr * plateau_gradient) steps; that bound is what makes
    slow-vs-cyclical escape comparisons quantitative.
    """

    def __init__(
        self,
        plateau_gradient: float = 0.05,
        plateau_length: float = 10.0,
        basin_curvature: float = 1.0,
        extra_dims: int = 0,
        extra_curvature: float = 1.0,
    ):
        for name, value in [
            ("plateau_gradient", plateau_gradient),
            ("plateau_length", plateau_length),
            ("basin_curvature", basin_curvature),
            ("extra_curvature", extra_curvature),
        ]:
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not isinstance(extra_dims, int) or extra_dims < 0:
            raise ValueError(f"extra_dims must be an integer >= 0, got {extra_dims!r}")
        self.plateau_gradient = float(plateau_gradient)
        self.plateau_length = float(plateau_length)
        self.basin_curvature = float(basin_curvature)
        self.extra_dims = extra_dims
        self.extra_curvature = float(extra_curvature)
        self.param_dim = 1 + extra_dims
        # junction at x = plateau_length with matched value and slope
        self.x_min = self.plateau_length + self.plateau_gradient / self.basin_curvature
        self.entry_loss = (
            self.plateau_gradient * self.plateau_length
            + self.plateau_gradient**2 / (2.0 * self.basin_curvature)
        )
        self.metadata = {
            "plateau_gradient": self.plateau_gradient,
            "plateau_length": self.plateau_length,
            "basin_curvature": self.basin_curvature,
            "entry_loss": self.entry_loss,
            "min_loss": 0.0,
            "argmin_x": self.x_min,
        }

    def _f1(self, x: float) -> float:
        if x <= self.plateau_length:
            return self.entry_loss - self.plateau_gradient * x
        return 0.5 * self.basin_curvature * (x - self.x_min) ** 2

    def _g1(self, x: float) -> float:
        if x <= self.plateau_length:
            return -self.plateau_gradient
        return self.basin_curvature * (x - self.x_min)

    def loss(self, params, batch=None) -> float:
        value = self._f1(float(params[0]))
        if self.extra_dims:
            value += 0.5 * self.extra_curvature * float(np.sum(params[1:] ** 2))
        return float(value)

    def grad(self, params, batch=None) -> np.ndarray:
        g = np.empty(self.param_dim, dtype=np.float64)
        g[0] = self._g1(float(params[0]))
        if self.extra_dims:
            g[1:] = self.extra_curvature * params[1:]
        return g

    def initial_params(self, seed) -> np.ndarray:
        # coordinate 0 starts at the ramp entrance; extras start off-center
        params = np.zeros(self.param_dim, dtype=np.float64)
        if self.extra_dims:
            params[1:] = _rng(seed, _INIT_TAG).standard_normal(self.extra_dims)
        return params


class _DatasetTask(Task):
    """Shared train/val split and index-batch plumbing for data-bearing tasks."""

    _n: int
    _train_idx: np.ndarray
    _val_idx: np.ndarray

    def _split(self, seed, n: int, val_fraction: float) -> None:
        if not (0.0 < val_fraction < 1.0):
            raise ValueError(f"val_fraction must lie in (0, 1), got {val_fraction}")
        perm = _rng(seed, _SPLIT_TAG).permutation(n)
        n_val = max(1, int(round(val_fraction * n)))
        self._n = n
        self._val_idx = np.sort(perm[:n_val])
        self._train_idx = np.sort(perm[n_val:])

    def sample_batch(self, seed, batch_size: int) -> np.ndarray:
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if batch_size > self._train_idx.size:
            raise ValueError(
                f"batch_size {batch_size} exceeds training split size {self._train_idx.size}"
            )
        return _rng(seed).choice(self._train_idx, size=batch_size, replace=False)

    def val_batch(self) -> np.ndarray:
        return self._val_idx

    def train_size(self) -> int:
        return int(self._train_idx.size)

    def _resolve(self, batch) -> np.ndarray:
        if batch is None:
            return self._train_idx
        return np.asarray(batch, dtype=np.intp)


class LogisticTask(_DatasetTask):
    """Logistic regression on two seeded Gaussian blobs.

    Blob centers sit ``class_separation`` apart along coordinate 0, and the
    coordinate-0 noise is truncated short of the midpoint, so the classes
    are linearly separable by construction.  Parameters are the weight
    vector plus a bias term.
    """

    classification = True

    def __init__(
        self,
        n_samples: int = 400,
        n_features: int = 8,
        class_separation: float = 4.0,
        seed: int = 0,
        val_fraction: float = 0.2,
    ):
        if n_samples < 10:
            raise ValueError(f"n_samples must be >= 10, got {n_samples}")
        if n_features < 1:
            raise ValueError(f"n_features must be >= 1, got {n_features}")
        if not (class_separation > 0 and math.isfinite(class_separation)):
            raise ValueError(f"class_separation must be positive, got {class_separation}")
        self.n_samples = int(n_samples)
        self.n_features = int(n_features)
        self.class_separation = float(class_separation)
        self.seed = int(seed)
        rng = _rng(seed, _DATA_TAG)
        y = np.arange(n_samples) % 2
        noise = rng.standard_normal((n_samples, n_features))
        # keep coordinate-0 noise short of the midpoint: strict separability
        margin = 0.475 * self.class_separation
        noise[:, 0] = np.clip(noise[:, 0], -margin, margin)
        x = noise
        x[:, 0] += (2.0 * y - 1.0) * (self.class_separation / 2.0)
        self._x = x
        self._y = y.astype(np.float64)
        self._split(seed, n_samples, val_fraction)
        self.param_dim = n_features + 1
        self.metadata = {
            "bayes_accuracy": 1.0,
            "n_train": self.train_size(),
            "n_val": int(self._val_idx.size),
        }

    def _margins(self, params, idx) -> np.ndarray:
        return self._x[idx] @ params[:-1] + params[-1]

    def loss(self, params, batch=None) -> float:
        idx = self._resolve(batch)
        z = self._margins(params, idx)
        # mean of -log sigma(z) for y=1 and -log(1 - sigma(z)) for y=0, stably
        return float(np.mean(np.logaddexp(0.0, z) - self._y[idx] * z))

    def grad(self, params, batch=None) -> np.ndarray:
        idx = self._resolve(batch)
        z = self._margins(params, idx)
        # sigmoid without overflow on either tail
        p = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                     np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
        residual = (p - self._y[idx]) / idx.size
        g = np.empty(self.param_dim, dtype=np.float64)
        g[:-1] = self._x[idx].T @ residual
        g[-1] = residual.sum()
        return g

    def accuracy(self, params, batch=None) -> float:
        idx = self._resolve(batch)
        z = self._margins(params, idx)
        return float(np.mean((z > 0.0) == (self._y[idx] > 0.5)))


class TinyAttentionTask(_DatasetTask):
    """Single-head self-attention + mean pool + linear softmax classifier.

    Sequences are uniform random token ids; the label is the most frequent
    token in the sequence with ties broken toward the smallest id, so
    attention pooling can solve the task exactly.  Forward and backward
    passes are hand-coded on one flat parameter vector laid out as
    [embedding, Wq, Wk, Wv, Wout, bout].
    """

    classification = True

    def __init__(
        self,
        vocab_size: int = 6,
        seq_len: int = 8,
        d_model: int = 8,
        seed: int = 0,
        n_samples: int = 256,
        val_fraction: float = 0.2,
    ):
        if vocab_size < 2 or seq_len < 2 or d_model < 2:
            raise ValueError("vocab_size, seq_len and d_model must all be >= 2")
        if n_samples < 10:
            raise ValueError(f"n_samples must be >= 10, got {n_samples}")
        self.vocab_size = int(vocab_size)
        self.seq_len = int(seq_len)
        self.d_model = int(d_model)
        self.seed = int(seed)
        self.n_samples = int(n_samples)
        rng = _rng(seed, _DATA_TAG)
        self._tokens = rng.integers(0, vocab_size, size=(n_samples, seq_len))
        counts = np.zeros((n_samples, vocab_size), dtype=np.int64)
        np.add.at(counts, (np.arange(n_samples)[:, None], self._tokens), 1)
        # argmax returns the first maximum, i.e. the smallest token id on ties
        self._labels = np.argmax(counts, axis=1)
        self._split(seed, n_samples, val_fraction)
        v, d = self.vocab_size, self.d_model
        self._shapes = [("emb", (v, d)), ("wq", (d, d)), ("wk", (d, d)),
                        ("wv", (d, d)), ("wo", (d, v)), ("bo", (v,))]
        self.param_dim = sum(int(np.prod(s)) for _, s in self._shapes)
        self.metadata = {
            "bayes_accuracy": 1.0,
            "n_train": self.train_size(),
            "n_val": int(self._val_idx.size),
        }

    def _unpack(self, params: np.ndarray) -> dict:
        out, offset = {}, 0
        for name, shape in self._shapes:
            size = int(np.prod(shape))
            out[name] = params[offset : offset + size].reshape(shape)
            offset += size
        return out

    def initial_params(self, seed) -> np.ndarray:
        scale = 1.0 / math.sqrt(self.d_model)
        return _rng(seed, _INIT_TAG).standard_normal(self.param_dim) * scale

    def forward(self, params: np.ndarray, batch=None) -> dict:
        """Full forward pass; returns intermediates for diagnostics and backprop."""
        idx = self._resolve(batch)
        w = self._unpack(np.asarray(params, dtype=np.float64))
        tokens = self._tokens[idx]
        labels = self._labels[idx]
        emb = w["emb"][tokens]                      # (B, L, D)
        q = emb @ w["wq"]
        k = emb @ w["wk"]
        v = emb @ w["wv"]
        scores = q @ k.transpose(0, 2, 1) / math.sqrt(self.d_model)
        scores -= scores.max(axis=-1, keepdims=True)
        attn = np.exp(scores)
        attn /= attn.sum(axis=-1, keepdims=True)    # rows sum to 1
        mixed = attn @ v                            # (B, L, D)
        pooled = mixed.mean(axis=1)                 # (B, D)
        logits = pooled @ w["wo"] + w["bo"]         # (B, V)
        shifted = logits - logits.max(axis=-1, keepdims=True)
        log_z = np.log(np.sum(np.exp(shifted), axis=-1))
        log_probs = shifted - log_z[:, None]
        loss = float(-np.mean(log_probs[np.arange(idx.size), labels]))
        return {
            "idx": idx, "tokens": tokens, "labels": labels, "weights": w,
            "emb": emb, "q": q, "k": k, "v": v, "attn": attn,
            "mixed": mixed, "pooled": pooled, "logits": logits,
            "class_probs": np.exp(log_probs), "loss": loss,
        }

    def loss(self, params, batch=None) -> float:
        return self.forward(params, batch)["loss"]

    def grad(self, params, batch=None) -> np.ndarray:
        f = self.forward(params, batch)
        w, b = f["weights"], f["idx"].size
        d_sqrt = math.sqrt(self.d_model)
        d_logits = f["class_probs"].copy()
        d_logits[np.arange(b), f["labels"]] -= 1.0
        d_logits /= b
        d_wo = f["pooled"].T @ d_logits
        d_bo = d_logits.sum(axis=0)
        d_pooled = d_logits @ w["wo"].T
        d_mixed = np.repeat(d_pooled[:, None, :], self.seq_len, axis=1) / self.seq_len
        d_attn = d_mixed @ f["v"].transpose(0, 2, 1)
        d_v = f["attn"].transpose(0, 2, 1) @ d_mixed
        # softmax backward, then undo the score scaling
        d_scores = f["attn"] * (d_attn - np.sum(d_attn * f["attn"], axis=-1, keepdims=True))
        d_q = d_scores @ f["k"] / d_sqrt
        d_k = d_scores.transpose(0, 2, 1) @ f["q"] / d_sqrt
        d_wq = np.einsum("bld,ble->de", f["emb"], d_q)
        d_wk = np.einsum("bld,ble->de", f["emb"], d_k)
        d_wv = np.einsum("bld,ble->de", f["emb"], d_v)
        d_emb_rows = d_q @ w["wq"].T + d_k @ w["wk"].T + d_v @ w["wv"].T
        d_emb = np.zeros_like(w["emb"])
        np.add.at(d_emb, f["tokens"].reshape(-1), d_emb_rows.reshape(-1, self.d_model))
        return np.concatenate(
            [d_emb.ravel(), d_wq.ravel(), d_wk.ravel(), d_wv.ravel(), d_wo.ravel(), d_bo]
        )

    def accuracy(self, params, batch=None) -> float:
        f = self.forward(params, batch)
        return float(np.mean(np.argmax(f["logits"], axis=1) == f["labels"]))


def eval_loss(task: Task, params, batch=None) -> float:
    """Validated loss evaluation: finite 1-D params of the task's dimension."""
    params = _check_params(task, params)
    return float(task.loss(params, batch))


def eval_grad(task: Task, params, batch=None) -> np.ndarray:
    """Validated gradient evaluation; returns a float64 vector of task dimension."""
    params = _check_params(task, params)
    g = np.asarray(task.grad(params, batch), dtype=np.float64)
    if g.shape != (task.param_dim,):
        raise ValueError(f"gradient has shape {g.shape}, expected ({task.param_dim},)")
    return g


def _check_params(task: Task, params) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.shape[0] != task.param_dim:
        raise ValueError(
            f"params must be a flat vector of dimension {task.param_dim}, "
            f"got shape {params.shape}"
        )
    if not np.all(np.isfinite(params)):
        raise ValueError("params contain non-finite entries")
    return params


def gd_stability_threshold(task: QuadraticTask) -> float:
    """Largest stable constant rate for plain gradient descent: 2 / max(spectrum)."""
    if not isinstance(task, QuadraticTask):
        raise TypeError("stability threshold is defined for QuadraticTask only")
    return task.metadata["stability_threshold"]


def gradient_check(
    task: Task,
    n_points: int = 100,
    step: float = 1e-6,
    seed: int = 0,
    batch_size: int = 16,
    point_scale: float = 0.5,
) -> float:
    """Worst norm-relative error between hand-coded grads and central differences.

    At each of ``n_points`` random parameter points the full gradient is
    compared against per-coordinate central differences of the loss; the
    error at a point is ||fd - g|| / max(||fd||, ||g||).  Returns the max
    over points.
    """
    rng = _rng(seed, _CHECK_TAG)
    n_train = task.train_size()
    worst = 0.0
    for point in range(n_points):
        params = rng.standard_normal(task.param_dim) * point_scale
        if n_train is None:
            batch = None
        else:
            batch = task.sample_batch((seed, _CHECK_TAG, point), min(batch_size, n_train))
        g = eval_grad(task, params, batch)
        fd = np.empty_like(g)
        probe = params.copy()
        for i in range(task.param_dim):
            orig = probe[i]
            probe[i] = orig + step
            hi = task.loss(probe, batch)
            probe[i] = orig - step
            lo = task.loss(probe, batch)
            probe[i] = orig
            fd[i] = (hi - lo) / (2.0 * step)
        denom = max(float(np.linalg.norm(fd)), float(np.linalg.norm(g)), 1e-12)
        worst = max(worst, float(np.linalg.norm(fd - g)) / denom)
    return worst


def make_task(spec: dict) -> Task:
    """Build a task from a plain config mapping (``kind`` key selects the type)."""
    if not isinstance(spec, dict):
        raise ValueError(f"task spec must be a mapping, got {type(spec).__name__}")
    kind = spec.get("kind")
    builders = {
        "quadratic": QuadraticTask,
        "plateau": PlateauTask,
        "logistic": LogisticTask,
        "tiny_attention": TinyAttentionTask,
    }
    if kind not in builders:
        raise ValueError(f"task kind must be one of {sorted(builders)}, got {kind!r}")
    fields = {k: v for k, v in spec.items() if k != "kind"}
    try:
        return builders[kind](**fields)
    except TypeError as exc:
        raise ValueError(f"bad fields for {kind} task: {exc}") from exc
