"""Training configuration, JSON round-tripping and bundled presets."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .data import AugmentationSpec
from .encoder import EncoderConfig
from .synthesis import SynthesisStrategy, synth_count

OPTIMIZERS = ("adamw", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    tau: float = 0.2
    queue_capacity: int = 512
    top_n: int = 64
    synth_fraction: float = 0.125
    strategy: SynthesisStrategy = field(default_factory=SynthesisStrategy)
    m_start: float = 0.99
    epochs: int = 60
    cooldown_epochs: int = 20
    batch_size: int = 64
    base_lr: float = 1e-3
    weight_decay: float = 1e-4
    optimizer: str = "adamw"
    symmetrize_loss: bool = True
    seed: int = 0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    augment_q: AugmentationSpec = field(default_factory=AugmentationSpec)
    augment_k: AugmentationSpec = field(default_factory=AugmentationSpec)
    data: str = "clusters10"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.queue_capacity < 1 or self.top_n < 1:
            raise ValueError("queue_capacity and top_n must be >= 1")
        if self.top_n > self.queue_capacity:
            raise ValueError("top_n must not exceed queue_capacity")
        if not 0.0 <= self.synth_fraction <= 1.0:
            raise ValueError("synth_fraction must be in [0, 1]")
        if self.epochs < 1 or not 0 <= self.cooldown_epochs < self.epochs:
            raise ValueError("need epochs >= 1 and 0 <= cooldown_epochs < epochs")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.m_start <= 1.0:
            raise ValueError("m_start must be in [0, 1]")
        if not self.base_lr > 0 or self.weight_decay < 0:
            raise ValueError("need base_lr > 0 and weight_decay >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")

    @property
    def synth_count(self) -> int:
        return synth_count(self.synth_fraction, self.queue_capacity)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        kw = dict(raw)
        nested = {"strategy": SynthesisStrategy, "encoder": EncoderConfig,
                  "augment_q": AugmentationSpec, "augment_k": AugmentationSpec}
        for key, typ in nested.items():
            if key in kw and isinstance(kw[key], dict):
                kw[key] = typ(**kw[key])
        return cls(**kw)

    def with_overrides(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


def load_config(path) -> TrainConfig:
    with Path(path).open(encoding="utf-8") as fh:
        return TrainConfig.from_dict(json.load(fh))


def save_config(config: TrainConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")


def desk_preset(**overrides) -> TrainConfig:
    """Single-core configuration on the bundled ``clusters10`` data."""
    return TrainConfig(**overrides)


def large_preset(**overrides) -> TrainConfig:
    """Large-scale hyperparameters; far too slow for one core, kept for reference."""
    base = dict(
        tau=0.2, queue_capacity=4096, top_n=256, synth_fraction=1 / 16, m_start=0.99,
        epochs=300, cooldown_epochs=100, batch_size=512, base_lr=0.03, weight_decay=1e-4,
        optimizer="adamw",
        encoder=EncoderConfig(drop_path_online=0.1, drop_path_target=0.0),
    )
    base.update(overrides)
    return TrainConfig(**base)
