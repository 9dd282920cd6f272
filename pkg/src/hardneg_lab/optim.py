"""AdamW / SGD steps over named parameter dicts, and the cosine lr schedule."""
from __future__ import annotations

import math

import numpy as np


def init_adamw_state(params: dict[str, np.ndarray]) -> dict:
    return {
        "step": 0,
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }


def adamw_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: dict, lr: float,
               betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
               weight_decay: float = 0.0):
    """One AdamW update; returns ``(new_params, new_state)``.

    Weight decay is decoupled and applied first (``p -= lr * wd * p``),
    then the bias-corrected Adam step. Inputs are not modified.
    """
    b1, b2 = betas
    t = state["step"] + 1
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        p = p - lr * weight_decay * p
        m = b1 * state["m"][name] + (1.0 - b1) * g
        v = b2 * state["v"][name] + (1.0 - b2) * g * g
        p = p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        new_params[name], new_m[name], new_v[name] = p, m, v
    return new_params, {"step": t, "m": new_m, "v": new_v}


def init_sgd_state(params: dict[str, np.ndarray]) -> dict:
    return {"step": 0, "buf": {k: np.zeros_like(v) for k, v in params.items()}}


def sgd_step(params, grads, state, lr: float, momentum: float = 0.9, weight_decay: float = 0.0):
    """Heavy-ball SGD with L2 weight decay folded into the gradient."""
    new_params, new_buf = {}, {}
    for name, p in params.items():
        g = grads[name] + weight_decay * p
        buf = momentum * state["buf"][name] + g
        new_params[name] = p - lr * buf
        new_buf[name] = buf
    return new_params, {"step": state["step"] + 1, "buf": new_buf}


def cosine_lr(step: int, total_steps: int, base_lr: float) -> float:
    """Cosine decay from ``base_lr`` at step 0 towards 0 at ``total_steps``."""
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))
