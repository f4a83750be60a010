"""Optimizer-trajectory PCA and 2-D loss-surface evaluation.

Per-epoch weight checkpoints become rows of a trajectory matrix, centered on
the final checkpoint so the end of training sits at the origin.  The top two
right singular vectors of that matrix give the projection plane; the loss is
then evaluated on a grid spanned by those directions around the center.
"""

from __future__ import annotations

import json
import math

import numpy as np
from dataclasses import dataclass

from .tasks import Task

__all__ = [
    "TrajectoryMatrix",
    "PcaProjection",
    "SurfaceGrid",
    "build_trajectory_matrix",
    "pca_project",
    "loss_surface_grid",
    "write_trajectory_csv",
    "write_surface_csv",
    "write_pca_meta_json",
]


@dataclass
class TrajectoryMatrix:
    rows: np.ndarray    # (E, P): row i = checkpoint i - final checkpoint
    center: np.ndarray  # final checkpoint (P,)


@dataclass
class PcaProjection:
    coords: np.ndarray              # (E, 2)
    directions: np.ndarray          # (2, P), orthonormal rows
    explained_variance: tuple[float, float]
    degenerate: bool = False


@dataclass
class SurfaceGrid:
    alphas: np.ndarray   # (R,)
    betas: np.ndarray    # (R,)
    losses: np.ndarray   # (R, R): losses[i][j] at center + alphas[i]*d1 + betas[j]*d2
    center: np.ndarray
    directions: np.ndarray


def build_trajectory_matrix(checkpoints) -> TrajectoryMatrix:
    """Stack >= 3 equal-length weight vectors, subtracting the final one from each."""
    vectors = [np.asarray(c, dtype=np.float64) for c in checkpoints]
    if len(vectors) < 3:
        raise ValueError(f"need at least 3 checkpoints, got {len(vectors)}")
    dim = vectors[0].shape
    if any(v.ndim != 1 or v.shape != dim for v in vectors):
        raise ValueError("checkpoints must all be flat vectors of equal dimension")
    stacked = np.stack(vectors)
    center = stacked[-1].copy()
    return TrajectoryMatrix(rows=stacked - center, center=center)


def pca_project(tm: TrajectoryMatrix) -> PcaProjection:
    """Project the trajectory onto its top-2 principal directions.

    explained_variance_i = sigma_i^2 / sum_j sigma_j^2 over all singular
    values of the end-centered matrix.  An all-zero matrix (every checkpoint
    identical) yields the explicit degenerate result: zero coordinates and
    zero explained variance with the flag set.
    """
    m = tm.rows
    n_epochs, dim = m.shape
    if dim < 2:
        raise ValueError("need at least 2 parameters to define a projection plane")
    if not np.any(m):
        return PcaProjection(
            coords=np.zeros((n_epochs, 2)),
            directions=np.zeros((2, dim)),
            explained_variance=(0.0, 0.0),
            degenerate=True,
        )
    _, sigma, vt = np.linalg.svd(m, full_matrices=False)
    directions = vt[:2].copy()
    # fix the sign convention so repeated runs agree bit for bit
    for row in directions:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    total = float(np.sum(sigma**2))
    ev = (float(sigma[0] ** 2 / total), float(sigma[1] ** 2 / total))
    coords = m @ directions.T
    return PcaProjection(coords=coords, directions=directions, explained_variance=ev)


def loss_surface_grid(
    task: Task,
    center,
    d1,
    d2,
    extent: float,
    resolution: int,
) -> SurfaceGrid:
    """Evaluate the full-data loss on a (resolution x resolution) grid.

    Cell (i, j) sits at center + alphas[i] * d1 + betas[j] * d2 with both
    offsets spanning [-extent, extent] uniformly.  Non-finite losses are
    recorded as NaN cells rather than raised.
    """
    center = np.asarray(center, dtype=np.float64)
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    if not np.any(d1) or not np.any(d2):
        raise ValueError("direction vectors must be nonzero")
    if center.shape != d1.shape or center.shape != d2.shape:
        raise ValueError("center and directions must share one dimension")
    if resolution < 3:
        raise ValueError(f"resolution must be >= 3, got {resolution}")
    if not (extent > 0 and math.isfinite(extent)):
        raise ValueError(f"extent must be positive and finite, got {extent}")
    alphas = np.linspace(-extent, extent, resolution)
    betas = np.linspace(-extent, extent, resolution)
    losses = np.empty((resolution, resolution))
    for i, a in enumerate(alphas):
        base = center + a * d1
        for j, b in enumerate(betas):
            value = task.loss(base + b * d2)
            losses[i, j] = value if math.isfinite(value) else math.nan
    return SurfaceGrid(alphas=alphas, betas=betas, losses=losses,
                       center=center, directions=np.stack([d1, d2]))


def write_trajectory_csv(path, epochs, coords, lrs, losses) -> None:
    coords = np.asarray(coords)
    lines = ["epoch,pc1,pc2,lr_at_epoch,loss"]
    for e, (pc1, pc2), lr, loss in zip(epochs, coords, lrs, losses):
        lines.append(
            f"{e},{float(pc1)!r},{float(pc2)!r},{float(lr)!r},{float(loss)!r}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_surface_csv(path, grid: SurfaceGrid) -> None:
    lines = ["alpha,beta,loss"]
    for i, a in enumerate(grid.alphas):
        for j, b in enumerate(grid.betas):
            value = grid.losses[i, j]
            cell = "" if math.isnan(value) else repr(float(value))
            lines.append(f"{float(a)!r},{float(b)!r},{cell}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_pca_meta_json(path, proj: PcaProjection) -> None:
    payload = {
        "explained_variance_1": proj.explained_variance[0],
        "explained_variance_2": proj.explained_variance[1],
        "degenerate": bool(proj.degenerate),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
