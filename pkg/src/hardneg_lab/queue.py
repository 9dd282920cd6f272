"""Fixed-capacity FIFO of target-encoder embeddings (the real negatives)."""
from __future__ import annotations

import numpy as np

from .embedding import UNIT_TOL
from .errors import DimensionMismatch


class NegativeQueue:
    """FIFO of unit-norm embeddings holding at most ``capacity`` rows.

    Storage is a ring buffer; :meth:`snapshot` always returns a fresh
    array ordered oldest first, so callers can hold on to it while the
    queue keeps moving.
    """

    def __init__(self, capacity: int, dim: int | None = None):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.dim = dim
        self._buf = None if dim is None else np.zeros((capacity, dim))
        self._head = 0  # index of the oldest entry
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def enqueue(self, batch) -> "NegativeQueue":
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim == 1:
            batch = batch[None, :]
        if batch.ndim != 2 or batch.shape[0] < 1:
            raise ValueError("enqueue needs a non-empty batch of embeddings")
        if self.dim is None:
            self.dim = batch.shape[1]
            self._buf = np.zeros((self.capacity, self.dim))
        elif batch.shape[1] != self.dim:
            raise DimensionMismatch(f"queue holds d={self.dim}, batch has d={batch.shape[1]}")
        norms = np.sqrt(np.einsum("ij,ij->i", batch, batch))
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise ValueError("queue entries must be unit-norm")

        # only the newest `capacity` rows can survive
        if batch.shape[0] > self.capacity:
            batch = batch[-self.capacity:]
        n = batch.shape[0]
        tail = (self._head + self._size) % self.capacity
        idx = (tail + np.arange(n)) % self.capacity
        self._buf[idx] = batch
        overflow = max(0, self._size + n - self.capacity)
        self._head = (self._head + overflow) % self.capacity
        self._size = min(self.capacity, self._size + n)
        return self

    def snapshot(self) -> np.ndarray:
        if self._size == 0:
            return np.zeros((0, self.dim or 0))
        idx = (self._head + np.arange(self._size)) % self.capacity
        return self._buf[idx]  # fancy indexing copies


def enqueue_batch(queue: NegativeQueue, batch) -> NegativeQueue:
    return queue.enqueue(batch)


def as_negatives(queue: NegativeQueue) -> np.ndarray:
    return queue.snapshot()
