"""Per-query selection of the hardest negatives, plus hardness summaries."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import cosine_sims
from .errors import DimensionMismatch, EmptyNegatives


@dataclass(frozen=True)
class HardSet:
    """Indices of the hardest negatives, most similar first."""

    indices: np.ndarray
    similarities: np.ndarray

    def __len__(self) -> int:
        return int(self.indices.shape[0])


@dataclass(frozen=True)
class HardnessStats:
    mean: float
    std: float
    min: float
    max: float
    p50: float
    p90: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("mean", "std", "min", "max", "p50", "p90")}


def _rank_desc(sims: np.ndarray) -> np.ndarray:
    # stable sort on the negated values: equal similarities keep index order
    return np.argsort(-sims, axis=-1, kind="stable")


def top_n_hardest(q, negatives, n: int) -> HardSet:
    """Pick the ``n`` negatives with the largest cosine similarity to ``q``.

    Ties are broken towards the lower index so that reruns are identical.
    Returns ``min(n, len(negatives))`` entries sorted by decreasing
    similarity.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    negs = np.asarray(negatives, dtype=np.float64)
    if negs.ndim != 2 or negs.shape[0] == 0:
        raise EmptyNegatives("no negatives to mine from")
    sims = cosine_sims(q, negs)
    order = _rank_desc(sims)[:n]
    return HardSet(indices=order, similarities=sims[order])


def top_n_hardest_batch(queries: np.ndarray, negatives: np.ndarray, n: int):
    """Batched mining for unit-norm queries against unit-norm negatives.

    Returns ``(indices, sims)`` where ``indices`` has shape ``(B, n')`` and
    ``sims`` is the full ``(B, K)`` similarity matrix (reused for
    hardness metrics by the trainer). Same ordering and tie-break as
    :func:`top_n_hardest`.
    """
    if negatives.shape[0] == 0:
        raise EmptyNegatives("no negatives to mine from")
    if queries.shape[1] != negatives.shape[1]:
        raise DimensionMismatch("query and negative dimensions differ")
    sims = np.clip(queries @ negatives.T, -1.0, 1.0)
    K = sims.shape[1]
    if n >= K:
        return _rank_desc(sims), sims
    # partial selection, then an exact (similarity desc, index asc) sort of the survivors
    picked = np.argpartition(-sims, n - 1, axis=1)[:, :n]
    picked_sims = np.take_along_axis(sims, picked, axis=1)
    cutoff = picked_sims.min(axis=1, keepdims=True)
    # rows where a value equal to the cutoff was left out need the full sort to honour the tie-break
    tied = (sims >= cutoff).sum(axis=1) > n
    order = np.lexsort((picked, -picked_sims), axis=1)
    out = np.take_along_axis(picked, order, axis=1)
    if tied.any():
        out[tied] = _rank_desc(sims[tied])[:, :n]
    return out, sims


def hardness_stats(q, negatives) -> HardnessStats:
    negs = np.asarray(negatives, dtype=np.float64)
    if negs.ndim != 2 or negs.shape[0] == 0:
        raise EmptyNegatives("hardness of an empty negative set")
    return summarize(cosine_sims(q, negs))


def summarize(sims) -> HardnessStats:
    """Summary statistics of a flat collection of similarities."""
    s = np.asarray(sims, dtype=np.float64).ravel()
    if s.size == 0:
        raise EmptyNegatives("no similarities to summarize")
    p50, p90 = np.percentile(s, [50, 90])
    return HardnessStats(
        mean=float(s.mean()),
        std=float(s.std()),
        min=float(s.min()),
        max=float(s.max()),
        p50=float(p50),
        p90=float(p90),
    )
