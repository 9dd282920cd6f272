"""Frozen-feature evaluation: linear probe and cosine kNN."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .encoder import backbone_features
from .errors import DimensionMismatch, SingleClass

TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class FeatureTable:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, idx) -> "FeatureTable":
        return FeatureTable(self.features[idx], self.labels[idx], self.num_classes)


def extract_features(checkpoint, data: Dataset) -> FeatureTable:
    """Eval-mode projection-head outputs of the online encoder, unnormalized."""
    enc = checkpoint.config.encoder
    if data.input_dim != enc.input_dim:
        raise DimensionMismatch(f"checkpoint expects input_dim {enc.input_dim}, data has {data.input_dim}")
    feats = backbone_features(checkpoint.online, enc, data.features)
    return FeatureTable(feats, data.labels.copy(), data.num_classes)


def split_indices(n: int, seed: int, train_fraction: float = TRAIN_FRACTION):
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(round(train_fraction * n))
    return np.sort(perm[:cut]), np.sort(perm[cut:])


def split_table(table: FeatureTable, seed: int):
    tr, te = split_indices(len(table), seed)
    return table.subset(tr), table.subset(te)


def _check_pair(train: FeatureTable, test: FeatureTable) -> int:
    if train.features.shape[1] != test.features.shape[1]:
        raise DimensionMismatch("train and test features have different widths")
    if np.unique(train.labels).size < 2:
        raise SingleClass("training labels contain a single class")
    return max(train.num_classes, test.num_classes)


def linear_probe(train: FeatureTable, test: FeatureTable, epochs: int = 100, lr: float = 1.0,
                 momentum: float = 0.9) -> float:
    """Softmax regression by full-batch gradient descent; returns test top-1.

    Features are standardized with training-set statistics. Weights start
    at zero, so the result is deterministic.
    """
    num_classes = _check_pair(train, test)
    mu = train.features.mean(axis=0)
    sd = train.features.std(axis=0) + 1e-8
    X = (train.features - mu) / sd
    Xt = (test.features - mu) / sd
    n, f = X.shape
    Y = np.zeros((n, num_classes))
    Y[np.arange(n), train.labels] = 1.0
    W = np.zeros((f, num_classes))
    b = np.zeros(num_classes)
    vW = np.zeros_like(W)
    vb = np.zeros_like(b)
    for _ in range(epochs):
        logits = X @ W + b
        logits -= logits.max(axis=1, keepdims=True)
        P = np.exp(logits)
        P /= P.sum(axis=1, keepdims=True)
        G = (P - Y) / n
        vW = momentum * vW + X.T @ G
        vb = momentum * vb + G.sum(axis=0)
        W -= lr * vW
        b -= lr * vb
    pred = np.argmax(Xt @ W + b, axis=1)
    return float(np.mean(pred == test.labels))


def _unit_rows(m: np.ndarray) -> np.ndarray:
    return m / np.maximum(np.linalg.norm(m, axis=1, keepdims=True), 1e-12)


def knn_predict(train: FeatureTable, test: FeatureTable, k: int) -> np.ndarray:
    """Cosine kNN majority vote; ties go to the larger summed similarity, then the lower class id."""
    num_classes = _check_pair(train, test)
    if not 1 <= k <= len(train):
        raise ValueError(f"k must be in [1, {len(train)}], got {k}")
    sims = _unit_rows(test.features) @ _unit_rows(train.features).T
    nbrs = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    nbr_sims = np.take_along_axis(sims, nbrs, axis=1)
    nbr_labels = train.labels[nbrs]
    rows = np.repeat(np.arange(len(test)), k)
    votes = np.zeros((len(test), num_classes))
    weight = np.zeros((len(test), num_classes))
    np.add.at(votes, (rows, nbr_labels.ravel()), 1.0)
    np.add.at(weight, (rows, nbr_labels.ravel()), nbr_sims.ravel())
    top = votes == votes.max(axis=1, keepdims=True)
    return np.argmax(np.where(top, weight, -np.inf), axis=1)


def knn_eval(train: FeatureTable, test: FeatureTable, k: int = 20) -> float:
    return float(np.mean(knn_predict(train, test, k) == test.labels))


def evaluate(checkpoint, data: Dataset, split_seed: int, probe_epochs: int = 100,
             probe_lr: float = 1.0, k: int = 20) -> dict:
    """Linear-probe and kNN accuracy on an 80/20 split of ``data``."""
    train, test = split_table(extract_features(checkpoint, data), split_seed)
    return {
        "top1": linear_probe(train, test, epochs=probe_epochs, lr=probe_lr),
        "knn_top1": knn_eval(train, test, k=min(k, len(train))),
        "split_seed": split_seed,
    }
