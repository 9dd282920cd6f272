"""Synthetic labelled clusters, CSV ingestion and the two-view augmentation."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import CenterSeparationFailure, ParseError, RaggedRows

MAX_CENTER_SIMILARITY = 0.8
MAX_CENTER_ATTEMPTS = 100


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, input_dim)
    labels: np.ndarray  # (n,) int64
    num_classes: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ValueError("features must be (n, d) with one label per row")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class AugmentationSpec:
    """Stand-in view distribution: random scale, Gaussian noise, coordinate masking."""

    noise_sigma: float = 0.1
    mask_prob: float = 0.1
    scale_low: float = 0.8
    scale_high: float = 1.2

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 <= self.mask_prob <= 1.0:
            raise ValueError("mask_prob must be in [0, 1]")
        if not 0.0 < self.scale_low <= self.scale_high:
            raise ValueError("need 0 < scale_low <= scale_high")

    def to_dict(self) -> dict:
        return asdict(self)


def make_clusters(num_classes: int = 10, per_class: int = 500, input_dim: int = 32,
                  sigma: float = 0.15, seed: int = 0) -> Dataset:
    """Gaussian blobs around random unit-vector class centers.

    Centers are redrawn until every pair has cosine similarity <= 0.8.
    Samples are grouped by class (class 0 first).
    """
    if num_classes < 2 or per_class < 1 or input_dim < 2:
        raise ValueError("need num_classes >= 2, per_class >= 1, input_dim >= 2")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_CENTER_ATTEMPTS):
        centers = rng.normal(size=(num_classes, input_dim))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        sims = centers @ centers.T
        np.fill_diagonal(sims, -1.0)
        if sims.max() <= MAX_CENTER_SIMILARITY:
            break
    else:
        raise CenterSeparationFailure(
            f"no center set with pairwise similarity <= {MAX_CENTER_SIMILARITY} "
            f"after {MAX_CENTER_ATTEMPTS} draws")
    labels = np.repeat(np.arange(num_classes), per_class)
    features = centers[labels] + sigma * rng.normal(size=(labels.size, input_dim))
    return Dataset(features, labels.astype(np.int64), num_classes)


def augment(x: np.ndarray, spec: AugmentationSpec, rng: np.random.Generator) -> np.ndarray:
    """One random view of a single vector or of every row of a batch."""
    x = np.asarray(x, dtype=np.float64)
    lead = x.shape[:-1]
    scale = rng.uniform(spec.scale_low, spec.scale_high, size=lead + (1,))
    noise = rng.normal(0.0, 1.0, size=x.shape) * spec.noise_sigma
    keep = rng.random(x.shape) >= spec.mask_prob
    return (x * scale + noise) * keep


def two_views(x, spec_q: AugmentationSpec, spec_k: AugmentationSpec, rng: np.random.Generator):
    """Independent query/key views ``(x_q, x_k)`` of ``x``."""
    return augment(x, spec_q, rng), augment(x, spec_k, rng)


def load_csv(path) -> Dataset:
    """Read ``label,f0,f1,...`` rows (header required)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ParseError("empty file, expected a 'label,f0,...' header", line=1)
        if header[0].strip() != "label" or len(header) < 2:
            raise ParseError(f"bad header {','.join(header)!r}", line=1)
        width = len(header)
        labels, rows = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise RaggedRows(f"expected {width} fields, got {len(row)}", line=line)
            try:
                labels.append(int(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ParseError(str(exc), line=line) from None
            if labels[-1] < 0:
                raise ParseError(f"negative label {labels[-1]}", line=line)
    if not rows:
        raise ParseError("no data rows", line=2)
    features = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(features)):
        raise ParseError("non-finite feature value")
    lab = np.array(labels, dtype=np.int64)
    return Dataset(features, lab, int(lab.max()) + 1)


def save_csv(data: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i}" for i in range(data.input_dim)])
        for label, row in zip(data.labels, data.features):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


PRESETS = {
    "clusters10": dict(num_classes=10, per_class=500, input_dim=32, sigma=0.15, seed=0),
}


def resolve_data(source: str) -> Dataset:
    """A bundled preset name or a path to a CSV file."""
    if source in PRESETS:
        return make_clusters(**PRESETS[source])
    return load_csv(source)
