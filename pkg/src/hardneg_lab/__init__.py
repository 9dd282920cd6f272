"""Contrastive pretraining with synthetic hard negatives on a momentum encoder + queue."""

from .config import TrainConfig, desk_preset, large_preset
from .data import AugmentationSpec, Dataset, make_clusters
from .encoder import EncoderConfig
from .synthesis import SynthesisStrategy
from .trainer import MetricsRow, pretrain, run_ablation_grid

__all__ = [
    "AugmentationSpec",
    "Dataset",
    "EncoderConfig",
    "MetricsRow",
    "SynthesisStrategy",
    "TrainConfig",
    "desk_preset",
    "make_clusters",
    "large_preset",
    "pretrain",
    "run_ablation_grid",
]

__version__ = "0.1.0"
