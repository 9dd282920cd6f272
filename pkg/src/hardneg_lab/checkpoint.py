"""JSON checkpoints: config echo plus named, ordered parameter arrays.

Floats are written with Python's shortest round-trip repr, so a
save/load cycle reproduces every parameter bit for bit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .encoder import EncoderParams

FORMAT = "hardneg-lab-checkpoint/1"


@dataclass
class Checkpoint:
    config: TrainConfig
    online: EncoderParams
    target: EncoderParams
    step: int = 0
    optimizer_state: dict | None = field(default=None, repr=False)

    @property
    def seed(self) -> int:
        return self.config.seed


def _pack(arrays: dict[str, np.ndarray]) -> list[dict]:
    return [{"name": k, "shape": list(v.shape), "values": v.ravel().tolist()} for k, v in arrays.items()]


def _unpack(entries: list[dict]) -> dict[str, np.ndarray]:
    out = {}
    for e in entries:
        out[e["name"]] = np.array(e["values"], dtype=np.float64).reshape(e["shape"])
    return out


def to_json(ckpt: Checkpoint) -> str:
    doc = {
        "format": FORMAT,
        "config": ckpt.config.to_dict(),
        "seed": ckpt.config.seed,
        "step": ckpt.step,
        "online": {"weights": _pack(ckpt.online.weights), "buffers": _pack(ckpt.online.buffers)},
        "target": {"weights": _pack(ckpt.target.weights), "buffers": _pack(ckpt.target.buffers)},
    }
    return json.dumps(doc)


def from_json(text: str) -> Checkpoint:
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise ValueError(f"not a checkpoint (format={doc.get('format')!r})")
    enc = {}
    for side in ("online", "target"):
        enc[side] = EncoderParams(_unpack(doc[side]["weights"]), _unpack(doc[side]["buffers"]))
    return Checkpoint(TrainConfig.from_dict(doc["config"]), enc["online"], enc["target"], int(doc["step"]))


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).write_text(to_json(ckpt), encoding="utf-8")


def load_checkpoint(path) -> Checkpoint:
    return from_json(Path(path).read_text(encoding="utf-8"))
