"""Synthetic hard negatives built from a query's hardest real negatives.

Two mixing rules are provided:

* ``pair-mix``: ``normalize(a * n_i + (1 - a) * n_j)`` for two distinct
  members of the hard set, ``a ~ U(mix_low, mix_high)``.
* ``query-mix``: ``normalize(b * q + (1 - b) * n_i)``, ``b ~ U(mix_low, mix_high)``.

Synthetic samples are plain arrays; nothing downstream differentiates
through them.

Random draws are laid out so that one batched call consumes exactly the
same stream as the equivalent sequence of per-query calls: every query
takes a ``(3, L)`` block of uniforms (first parent, second parent,
coefficient). Degenerate mixtures are redrawn afterwards, three uniforms
per attempt.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import ZERO_NORM, as_vector
from .errors import DegenerateSynthesis, DimensionMismatch, EmptyNegatives
from .mining import HardSet

PAIR_MIX = "pair-mix"
QUERY_MIX = "query-mix"
MAX_ATTEMPTS = 10


@dataclass(frozen=True)
class SynthesisStrategy:
    kind: str = PAIR_MIX
    mix_low: float = 0.2
    mix_high: float = 0.8

    def __post_init__(self):
        lo, hi = self.mix_low, self.mix_high
        if self.kind == PAIR_MIX:
            ok = 0.0 < lo <= hi < 1.0
            bounds = "(0, 1)"
        elif self.kind == QUERY_MIX:
            ok = 0.0 < lo <= hi <= 0.5
            bounds = "(0, 0.5]"
        else:
            raise ValueError(f"unknown synthesis kind {self.kind!r}")
        if not ok:
            raise ValueError(f"{self.kind} needs mix_low <= mix_high inside {bounds}, got [{lo}, {hi}]")

    @classmethod
    def default(cls, kind: str) -> "SynthesisStrategy":
        if kind == QUERY_MIX:
            return cls(QUERY_MIX, 0.1, 0.5)
        return cls(PAIR_MIX, 0.2, 0.8)


@dataclass(frozen=True)
class SyntheticBatch:
    """``samples`` is ``(L, d)``; ``parent_indices`` is ``(L, 2)`` positions
    in the hard set (second column is -1 for query-mix)."""

    samples: np.ndarray
    parent_indices: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __len__(self) -> int:
        return int(self.samples.shape[0])


def mix_pair(n_i, n_j, alpha: float) -> np.ndarray:
    return alpha * np.asarray(n_i, dtype=np.float64) + (1.0 - alpha) * np.asarray(n_j, dtype=np.float64)


def mix_query(q, n_i, beta: float) -> np.ndarray:
    return beta * np.asarray(q, dtype=np.float64) + (1.0 - beta) * np.asarray(n_i, dtype=np.float64)


def _decode(u: np.ndarray, h: int, strategy: SynthesisStrategy):
    """Map uniforms of shape ``(..., 3, L)`` to parent positions and coefficients."""
    first = np.minimum((u[..., 0, :] * h).astype(np.int64), h - 1)
    if strategy.kind == PAIR_MIX and h > 1:
        second = np.minimum((u[..., 1, :] * (h - 1)).astype(np.int64), h - 2)
        second = second + (second >= first)
    elif strategy.kind == PAIR_MIX:
        second = first.copy()
    else:
        second = np.full_like(first, -1)
    coef = strategy.mix_low + (strategy.mix_high - strategy.mix_low) * u[..., 2, :]
    return first, second, coef


def _raw_mix(q, negatives, hard_idx, first, second, coef, kind):
    """Unnormalized mixtures. ``hard_idx`` maps hard-set positions to rows of ``negatives``."""
    c = coef[..., None]
    out = negatives[np.take_along_axis(hard_idx, first, axis=-1)]
    if kind == PAIR_MIX:
        b = negatives[np.take_along_axis(hard_idx, second, axis=-1)]
        out *= c
        out += (1.0 - c) * b
        return out
    # the query carries the coefficient
    out *= 1.0 - c
    out += c * q[..., None, :]
    return out


def _redraw(q, negatives, hard_idx, strategy, rng, raw, first, second, coef):
    """Fix samples whose mixture cancelled; works on a single query's arrays in place."""
    h = hard_idx.shape[0]
    norms = np.sqrt(np.einsum("ld,ld->l", raw, raw))
    for pos in np.flatnonzero(norms <= ZERO_NORM):
        for _ in range(MAX_ATTEMPTS):
            u = rng.random(3).reshape(3, 1)
            f, s, c = _decode(u, h, strategy)
            cand = _raw_mix(q, negatives, hard_idx, f, s, c, strategy.kind)[0]
            if np.sqrt(cand @ cand) > ZERO_NORM:
                raw[pos], first[pos], second[pos], coef[pos] = cand, f[0], s[0], c[0]
                break
        else:
            raise DegenerateSynthesis(f"sample {pos} cancelled to zero in {MAX_ATTEMPTS} attempts")
    return raw


def synthesize(q, hard: HardSet, negatives, L: int, strategy: SynthesisStrategy,
               rng: np.random.Generator) -> SyntheticBatch:
    """Draw ``L`` unit-norm synthetic negatives for query ``q``."""
    q = as_vector(q)
    if L < 0:
        raise ValueError("L must be non-negative")
    if L == 0:
        return SyntheticBatch(np.zeros((0, q.shape[0])))
    if len(hard) == 0:
        raise EmptyNegatives("synthesis needs a non-empty hard set")
    negs = np.asarray(negatives, dtype=np.float64)
    if negs.ndim != 2 or negs.shape[1] != q.shape[0]:
        raise DimensionMismatch("negatives and query dimensions differ")
    hard_idx = np.asarray(hard.indices, dtype=np.int64)
    u = rng.random((3, L))
    first, second, coef = _decode(u, hard_idx.shape[0], strategy)
    raw = _raw_mix(q, negs, hard_idx, first, second, coef, strategy.kind)
    raw = _redraw(q, negs, hard_idx, strategy, rng, raw, first, second, coef)
    samples = raw / np.sqrt(np.einsum("ld,ld->l", raw, raw))[:, None]
    return SyntheticBatch(samples, np.stack([first, second], axis=1))


def synthesize_batch(queries: np.ndarray, hard_indices: np.ndarray, negatives: np.ndarray,
                     L: int, strategy: SynthesisStrategy, rng: np.random.Generator,
                     workspace: dict | None = None) -> np.ndarray:
    """Vectorized :func:`synthesize` over a batch of queries.

    ``hard_indices`` is ``(B, h)`` into ``negatives``. Returns samples of
    shape ``(B, L, d)``. Consumes the random stream exactly like ``B``
    sequential :func:`synthesize` calls as long as no redraw is needed.

    ``workspace`` is an optional dict of scratch arrays reused across
    calls; the returned array then lives in it and is overwritten by the
    next call.
    """
    B, d = queries.shape
    if L == 0:
        return np.zeros((B, 0, d))
    u = rng.random((B, 3, L))
    first, second, coef = _decode(u, hard_indices.shape[1], strategy)
    shape = (B, L, d)
    ws = workspace if workspace is not None else {}
    if ws.get("out") is None or ws["out"].shape != shape:
        ws["out"], ws["tmp"] = np.empty(shape), np.empty(shape)
    raw, tmp = ws["out"], ws["tmp"]
    c = coef[..., None]
    np.take(negatives, np.take_along_axis(hard_indices, first, axis=1), axis=0, out=raw)
    if strategy.kind == PAIR_MIX:
        np.take(negatives, np.take_along_axis(hard_indices, second, axis=1), axis=0, out=tmp)
        raw *= c
        tmp *= 1.0 - c
    else:
        raw *= 1.0 - c
        np.multiply(c, queries[:, None, :], out=tmp)
    raw += tmp
    norms = np.sqrt(np.einsum("bld,bld->bl", raw, raw))
    if norms.min() <= ZERO_NORM:
        for b in np.flatnonzero((norms <= ZERO_NORM).any(axis=1)):
            _redraw(queries[b], negatives, hard_indices[b], strategy, rng, raw[b], first[b],
                    second[b], coef[b])
        norms = np.sqrt(np.einsum("bld,bld->bl", raw, raw))
    raw /= norms[..., None]
    return raw


def synth_count(fraction: float, capacity: int) -> int:
    """Number of synthetic negatives per query: ``fraction * capacity``, rounded half up."""
    return int(np.floor(fraction * capacity + 0.5))


def effective_count(epoch: int, total_epochs: int, cooldown_epochs: int, base_L: int,
                    queue_size: int, N: int) -> int:
    """Synthetic negatives to generate at ``epoch``.

    Zero during the final ``cooldown_epochs`` epochs and while the queue
    holds fewer than ``N`` entries.
    """
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    if not 0 <= cooldown_epochs < total_epochs:
        raise ValueError("cooldown_epochs must be in [0, total_epochs)")
    if epoch >= total_epochs - cooldown_epochs or queue_size < N:
        return 0
    return base_L
