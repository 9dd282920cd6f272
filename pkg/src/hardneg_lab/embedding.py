"""Dense-vector helpers for unit-norm embeddings.

Everything here works in float64. Single vectors are 1-D arrays, batches
are 2-D arrays with one embedding per row.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, ZeroVector

ZERO_NORM = 1e-12
UNIT_TOL = 1e-9


def as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty 1-D vector, got shape {arr.shape}")
    return arr


def normalize(v) -> np.ndarray:
    """Scale ``v`` to unit l2 norm.

    Raises:
        ZeroVector: if ``||v|| <= 1e-12``.
    """
    arr = as_vector(v)
    norm = float(np.sqrt(np.dot(arr, arr)))
    if norm <= ZERO_NORM:
        raise ZeroVector(f"cannot normalize vector with norm {norm:.3e}")
    return arr / norm


def normalize_rows(m) -> np.ndarray:
    """Row-wise :func:`normalize` for a 2-D batch."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D batch, got shape {arr.shape}")
    norms = np.sqrt(np.einsum("ij,ij->i", arr, arr))
    if arr.shape[0] and norms.min() <= ZERO_NORM:
        raise ZeroVector(f"row {int(norms.argmin())} has norm {norms.min():.3e}")
    return arr / norms[:, None]


def cosine_sim(a, b) -> float:
    """Cosine similarity of two nonzero vectors, clamped to [-1, 1]."""
    a = as_vector(a)
    b = as_vector(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension {a.shape[0]} vs {b.shape[0]}")
    na = float(np.sqrt(np.sum(a * a)))
    nb = float(np.sqrt(np.sum(b * b)))
    if na <= ZERO_NORM or nb <= ZERO_NORM:
        raise ZeroVector("cosine similarity of a zero vector")
    # a*b is commutative elementwise, so the result is exactly symmetric
    return float(min(1.0, max(-1.0, float(np.sum(a * b)) / (na * nb))))


def cosine_sims(q, negatives) -> np.ndarray:
    """Cosine similarity of one query against every row of ``negatives``."""
    q = as_vector(q)
    negs = np.asarray(negatives, dtype=np.float64)
    if negs.ndim != 2 or negs.shape[1] != q.shape[0]:
        raise DimensionMismatch(f"negatives of shape {negs.shape} vs query dim {q.shape[0]}")
    # same reductions as cosine_sim, so both agree bit for bit
    qn = float(np.sqrt(np.sum(q * q)))
    nn = np.sqrt(np.sum(negs * negs, axis=1))
    if qn <= ZERO_NORM or (nn.size and nn.min() <= ZERO_NORM):
        raise ZeroVector("cosine similarity of a zero vector")
    return np.clip(np.sum(negs * q, axis=1) / (nn * qn), -1.0, 1.0)


def is_unit(v, tol: float = UNIT_TOL) -> bool:
    arr = np.asarray(v, dtype=np.float64)
    norms = np.sqrt(np.sum(arr * arr, axis=-1))
    return bool(np.all(np.abs(norms - 1.0) <= tol))
