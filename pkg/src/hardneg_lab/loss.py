"""InfoNCE with a queue of negatives: value and analytic gradients.

For one query ``q``, positive key ``k`` and negatives ``n_1..n_M`` the
logits are ``[q.k, q.n_1, ..., q.n_M] / tau`` and the loss is the softmax
cross-entropy with target 0. Negatives are constants; gradients flow to
``q`` and ``k`` only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import as_vector
from .errors import DimensionMismatch, InvalidTemperature


@dataclass(frozen=True)
class LossOutput:
    value: float
    grad_q: np.ndarray
    grad_k: np.ndarray


def _check(q, k, negatives, tau):
    if not tau > 0:
        raise InvalidTemperature(f"temperature must be positive, got {tau}")
    q = as_vector(q)
    k = as_vector(k)
    if q.shape != k.shape:
        raise DimensionMismatch("query and key dimensions differ")
    negs = np.asarray(negatives, dtype=np.float64)
    if negs.size == 0:
        return q, k, np.zeros((0, q.shape[0]))
    if negs.ndim != 2 or negs.shape[1] != q.shape[0]:
        raise DimensionMismatch(f"negatives of shape {negs.shape} vs dimension {q.shape[0]}")
    return q, k, negs


def _softmax_parts(logits: np.ndarray):
    shift = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - shift)
    z = e.sum(axis=-1, keepdims=True)
    return e / z, shift[..., 0] + np.log(z[..., 0])


def infonce_forward(q, k, negatives, tau: float) -> float:
    q, k, negs = _check(q, k, negatives, tau)
    logits = np.concatenate(([q @ k], negs @ q)) / tau
    _, lse = _softmax_parts(logits)
    return float(max(0.0, lse - logits[0]))


def infonce_backward(q, k, negatives, tau: float) -> LossOutput:
    q, k, negs = _check(q, k, negatives, tau)
    logits = np.concatenate(([q @ k], negs @ q)) / tau
    p, lse = _softmax_parts(logits)
    grad_q = ((p[0] - 1.0) * k + p[1:] @ negs) / tau
    grad_k = (p[0] - 1.0) * q / tau
    return LossOutput(float(max(0.0, lse - logits[0])), grad_q, grad_k)


def infonce_batch(queries: np.ndarray, keys: np.ndarray, negatives: np.ndarray,
                  synthetic: np.ndarray | None, tau: float):
    """Per-query losses and query gradients for a whole batch.

    ``negatives`` ``(K, d)`` is shared by every query; ``synthetic``
    ``(B, L, d)`` holds each query's own extra negatives. Returns
    ``(losses (B,), grad_q (B, d), probs_real (B, K), probs_syn (B, L))``.
    """
    if not tau > 0:
        raise InvalidTemperature(f"temperature must be positive, got {tau}")
    pos = np.einsum("bd,bd->b", queries, keys)[:, None]
    parts = [pos, queries @ negatives.T]
    if synthetic is not None and synthetic.shape[1]:
        parts.append(np.einsum("bd,bld->bl", queries, synthetic))
    logits = np.concatenate(parts, axis=1) / tau
    p, lse = _softmax_parts(logits)
    losses = np.maximum(0.0, lse - logits[:, 0])
    K = negatives.shape[0]
    p_real = p[:, 1:1 + K]
    p_syn = p[:, 1 + K:]
    grad = (p[:, :1] - 1.0) * keys + p_real @ negatives
    if p_syn.shape[1]:
        grad = grad + np.einsum("bl,bld->bd", p_syn, synthetic)
    return losses, grad / tau, p_real, p_syn
