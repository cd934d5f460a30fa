"""Row normalization and the cosine-similarity matrix with exact backward pass.

Representations enter the ranking loss only through the cosine similarities
of their unit-normalized rows, so this module owns the normalization, the
dense similarity matrix and the chain rule back to the raw vectors.  Dense
is fine at the intended scale (a few thousand rows).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DegenerateInputError",
    "NORM_FLOOR",
    "normalize",
    "cosine_similarity_matrix",
    "backprop_similarity",
]

# Rows with a norm at or below this have no usable direction; erroring out
# (rather than clamping) makes encoder collapse visible immediately.
NORM_FLOOR = 1e-12


class DegenerateInputError(ValueError):
    """A representation row has (near-)zero norm, so its direction is undefined."""


def _as_matrix(vectors) -> tuple[np.ndarray, bool]:
    v = np.asarray(vectors, dtype=np.float64)
    was_1d = v.ndim == 1
    if was_1d:
        v = v[None, :]
    if v.ndim != 2 or v.shape[1] < 1:
        raise ValueError(f"expected a (rows, dim) matrix, got shape {np.shape(vectors)}")
    if not np.all(np.isfinite(v)):
        raise DegenerateInputError("representation vectors must be finite")
    return v, was_1d


def _row_norms(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms <= NORM_FLOOR):
        bad = int(np.argmax(norms <= NORM_FLOOR))
        raise DegenerateInputError(
            f"row {bad} has norm {norms[bad]:.3e} <= {NORM_FLOOR:g}; "
            "cannot normalize a (near-)zero vector"
        )
    return norms


def normalize(vectors) -> np.ndarray:
    """Scale every row to unit Euclidean norm, preserving its direction."""
    v, was_1d = _as_matrix(vectors)
    out = v / _row_norms(v)[:, None]
    return out[0] if was_1d else out


def cosine_similarity_matrix(vectors) -> np.ndarray:
    """Pairwise cosine similarities of the rows.

    The result is symmetric with entries clipped to [-1, 1] and the
    diagonal pinned to exactly 1 (round-off would otherwise leak past
    both).
    """
    v, _ = _as_matrix(vectors)
    unit = v / _row_norms(v)[:, None]
    sim = unit @ unit.T
    np.clip(sim, -1.0, 1.0, out=sim)
    np.fill_diagonal(sim, 1.0)
    return sim


def backprop_similarity(vectors, grad_sim) -> np.ndarray:
    """Gradient of ``sum(grad_sim * cosine_similarity_matrix(vectors))``.

    Differentiates through both the inner product and the row
    normalization; the normalization Jacobian ``(I - u u^T) / ||r||``
    projects out the radial component, which is why diagonal entries (and
    any uniform scaling of a row) contribute nothing.
    """
    v, _ = _as_matrix(vectors)
    g = np.asarray(grad_sim, dtype=np.float64)
    n = v.shape[0]
    if g.shape != (n, n):
        raise ValueError(f"grad_sim shape {g.shape} does not match {n} vectors")
    norms = _row_norms(v)
    unit = v / norms[:, None]
    # each entry sim[u, v] = unit_u . unit_v, so d/d unit = (G + G^T) @ unit
    gu = (g + g.T) @ unit
    radial = np.sum(gu * unit, axis=1, keepdims=True)
    return (gu - radial * unit) / norms[:, None]
