"""Residual-MLP online/target encoders with hand-written backprop.

The backbone is a stack of residual blocks ``h + W2 gelu(W1 h + b1) + b2``
at the input width, each subject to drop path (stochastic depth). Heads
are ``linear -> norm -> gelu -> linear``. The online encoder stacks a
prediction head on top of the projection head; the target encoder has no
prediction head and is only ever moved by :func:`momentum_update`.

Weight matrices are stored ``(fan_in, fan_out)`` and applied as ``x @ W``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionMismatch, StaleCache

ONLINE = "online"
TARGET = "target"
PER_SAMPLE = "per-sample"
PER_BATCH = "per-batch"

NORM_EPS = 1e-5
RUNNING_MOMENTUM = 0.9
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int = 32
    hidden_dim: int = 64
    num_blocks: int = 2
    embed_dim: int = 32
    drop_path_online: float = 0.1
    drop_path_target: float = 0.0
    head_norm: str = PER_SAMPLE

    def __post_init__(self):
        for name in ("input_dim", "hidden_dim", "num_blocks", "embed_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("drop_path_online", "drop_path_target"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")
        if self.head_norm not in (PER_SAMPLE, PER_BATCH):
            raise ValueError(f"head_norm must be {PER_SAMPLE!r} or {PER_BATCH!r}")

    def drop_rate(self, mode: str) -> float:
        return self.drop_path_online if mode == ONLINE else self.drop_path_target

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EncoderParams:
    """Named weight arrays plus non-trainable normalization buffers."""

    weights: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def has_predictor(self) -> bool:
        return "pred.w1" in self.weights

    def copy(self) -> "EncoderParams":
        return EncoderParams({k: v.copy() for k, v in self.weights.items()},
                             {k: v.copy() for k, v in self.buffers.items()})

    def target_copy(self) -> "EncoderParams":
        """Copy without the prediction head, used to start the target encoder."""
        keep = {k: v.copy() for k, v in self.weights.items() if not k.startswith("pred.")}
        bufs = {k: v.copy() for k, v in self.buffers.items() if not k.startswith("pred.")}
        return EncoderParams(keep, bufs)


def _head_shapes(prefix, fan_in, hidden, out):
    return [
        (f"{prefix}.w1", (fan_in, hidden)),
        (f"{prefix}.b1", (hidden,)),
        (f"{prefix}.norm.gamma", (hidden,)),
        (f"{prefix}.norm.beta", (hidden,)),
        (f"{prefix}.w2", (hidden, out)),
        (f"{prefix}.b2", (out,)),
    ]


def param_shapes(config: EncoderConfig, predictor: bool = True) -> list[tuple[str, tuple]]:
    shapes = []
    for i in range(config.num_blocks):
        shapes += [
            (f"blocks.{i}.w1", (config.input_dim, config.hidden_dim)),
            (f"blocks.{i}.b1", (config.hidden_dim,)),
            (f"blocks.{i}.w2", (config.hidden_dim, config.input_dim)),
            (f"blocks.{i}.b2", (config.input_dim,)),
        ]
    shapes += _head_shapes("proj", config.input_dim, config.hidden_dim, config.embed_dim)
    if predictor:
        shapes += _head_shapes("pred", config.embed_dim, config.hidden_dim, config.embed_dim)
    return shapes


def init_params(config: EncoderConfig, rng: np.random.Generator, predictor: bool = True) -> EncoderParams:
    weights = {}
    for name, shape in param_shapes(config, predictor):
        leaf = name.rsplit(".", 1)[1]
        if leaf == "gamma":
            weights[name] = np.ones(shape)
        elif leaf.startswith("b") or leaf == "beta":
            weights[name] = np.zeros(shape)
        else:
            std = 1.0 / math.sqrt(shape[0])
            if name.startswith("blocks.") and leaf == "w2":
                # keep the residual branch small at init
                std *= 0.5
            weights[name] = rng.normal(0.0, std, size=shape)
    buffers = {}
    for prefix in ("proj", "pred") if predictor else ("proj",):
        buffers[f"{prefix}.norm.running_mean"] = np.zeros(config.hidden_dim)
        buffers[f"{prefix}.norm.running_var"] = np.ones(config.hidden_dim)
    return EncoderParams(weights, buffers)


def gelu(x):
    t = np.tanh(_GELU_C * x * (1.0 + _GELU_A * x * x))
    return 0.5 * x * (1.0 + t), t


def gelu_grad(x, t):
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)


class EncodeCache:
    """Activations kept from :func:`encode` for one backward pass."""

    def __init__(self, params: EncoderParams, config: EncoderConfig, mode: str, squeeze: bool):
        self.params = params
        self.config = config
        self.mode = mode
        self.squeeze = squeeze
        self.blocks: list[tuple] = []
        self.heads: dict[str, tuple] = {}
        self.batch_stats: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self.out = None
        self.out_norm = None
        self.consumed = False


def _norm_forward(z, gamma, beta, params, prefix, config, train, cache):
    if config.head_norm == PER_SAMPLE:
        mu = z.mean(axis=1, keepdims=True)
        var = ((z - mu) ** 2).mean(axis=1, keepdims=True)
        axis = 1
    elif train:
        mu = z.mean(axis=0, keepdims=True)
        var = ((z - mu) ** 2).mean(axis=0, keepdims=True)
        cache.batch_stats[prefix] = (mu[0], var[0])
        axis = 0
    else:
        mu = params.buffers[f"{prefix}.norm.running_mean"][None, :]
        var = params.buffers[f"{prefix}.norm.running_var"][None, :]
        axis = None
    inv = 1.0 / np.sqrt(var + NORM_EPS)
    xhat = (z - mu) * inv
    return gamma * xhat + beta, (xhat, inv, axis)


def _norm_backward(dy, gamma, state):
    xhat, inv, axis = state
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    if axis is None:
        return dxhat * inv, dgamma, dbeta
    dz = inv * (dxhat - dxhat.mean(axis=axis, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=axis, keepdims=True))
    return dz, dgamma, dbeta


def _head_forward(h, params, prefix, config, train, cache):
    w = params.weights
    z1 = h @ w[f"{prefix}.w1"] + w[f"{prefix}.b1"]
    n, nstate = _norm_forward(z1, w[f"{prefix}.norm.gamma"], w[f"{prefix}.norm.beta"],
                              params, prefix, config, train, cache)
    a, t = gelu(n)
    cache.heads[prefix] = (h, n, t, a, nstate)
    return a @ w[f"{prefix}.w2"] + w[f"{prefix}.b2"]


def _head_backward(dout, params, prefix, cache, grads):
    w = params.weights
    h, n, t, a, nstate = cache.heads[prefix]
    grads[f"{prefix}.w2"] = a.T @ dout
    grads[f"{prefix}.b2"] = dout.sum(axis=0)
    dn = (dout @ w[f"{prefix}.w2"].T) * gelu_grad(n, t)
    dz1, grads[f"{prefix}.norm.gamma"], grads[f"{prefix}.norm.beta"] = _norm_backward(
        dn, w[f"{prefix}.norm.gamma"], nstate)
    grads[f"{prefix}.w1"] = h.T @ dz1
    grads[f"{prefix}.b1"] = dz1.sum(axis=0)
    return dz1 @ w[f"{prefix}.w1"].T


def drop_path_scales(rate: float, num_blocks: int, batch: int, rng, train: bool) -> np.ndarray:
    """Per-(block, sample) multipliers on the residual branch.

    Kept branches are rescaled by ``1 / (1 - rate)``; ``rate == 1`` drops
    every branch. No random numbers are consumed unless ``0 < rate < 1``
    in train mode.
    """
    if not train or rate <= 0.0:
        return np.ones((num_blocks, batch))
    if rate >= 1.0:
        return np.zeros((num_blocks, batch))
    keep = rng.random((num_blocks, batch)) >= rate
    return keep / (1.0 - rate)


def encode(params: EncoderParams, config: EncoderConfig, x, mode: str = ONLINE,
           rng: np.random.Generator | None = None, train: bool = False,
           drop_scales: np.ndarray | None = None):
    """Embed ``x`` (one input vector or a ``(B, input_dim)`` batch).

    Returns ``(embedding, cache)`` with unit-norm embeddings. ``drop_scales``
    overrides the sampled drop-path mask (shape ``(num_blocks, B)``), which
    lets gradient checks freeze a mask.
    """
    if mode not in (ONLINE, TARGET):
        raise ValueError(f"mode must be {ONLINE!r} or {TARGET!r}")
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    X = x[None, :] if squeeze else x
    if X.ndim != 2 or X.shape[1] != config.input_dim:
        raise DimensionMismatch(f"expected inputs of width {config.input_dim}, got shape {x.shape}")
    if mode == ONLINE and not params.has_predictor:
        raise DimensionMismatch("online mode needs prediction-head parameters")

    cache = EncodeCache(params, config, mode, squeeze)
    w = params.weights
    B = X.shape[0]
    if drop_scales is None:
        drop_scales = drop_path_scales(config.drop_rate(mode), config.num_blocks, B, rng, train)

    h = X
    for i in range(config.num_blocks):
        z1 = h @ w[f"blocks.{i}.w1"] + w[f"blocks.{i}.b1"]
        a, t = gelu(z1)
        scale = drop_scales[i][:, None]
        cache.blocks.append((h, z1, t, a, scale))
        if np.any(scale):
            h = h + scale * (a @ w[f"blocks.{i}.w2"] + w[f"blocks.{i}.b2"])
    out = _head_forward(h, params, "proj", config, train, cache)
    if mode == ONLINE:
        out = _head_forward(out, params, "pred", config, train, cache)
    norm = np.sqrt(np.einsum("bd,bd->b", out, out))[:, None]
    emb = out / norm
    cache.out, cache.out_norm = emb, norm
    return (emb[0] if squeeze else emb), cache


def encode_backward(cache: EncodeCache, grad_out) -> dict[str, np.ndarray]:
    """Parameter gradients of ``sum(grad_out * embedding)``.

    A cache supports exactly one backward pass.
    """
    if cache.consumed:
        raise StaleCache("activation cache already used for a backward pass")
    cache.consumed = True
    params, config = cache.params, cache.config
    w = params.weights
    g = np.asarray(grad_out, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    y = cache.out
    # through y = r / |r|
    dout = (g - y * np.einsum("bd,bd->b", y, g)[:, None]) / cache.out_norm

    grads: dict[str, np.ndarray] = {}
    if cache.mode == ONLINE:
        dout = _head_backward(dout, params, "pred", cache, grads)
    dh = _head_backward(dout, params, "proj", cache, grads)
    for i in reversed(range(config.num_blocks)):
        h, z1, t, a, scale = cache.blocks[i]
        dz2 = dh * scale
        grads[f"blocks.{i}.w2"] = a.T @ dz2
        grads[f"blocks.{i}.b2"] = dz2.sum(axis=0)
        dz1 = (dz2 @ w[f"blocks.{i}.w2"].T) * gelu_grad(z1, t)
        grads[f"blocks.{i}.w1"] = h.T @ dz1
        grads[f"blocks.{i}.b1"] = dz1.sum(axis=0)
        dh = dh + dz1 @ w[f"blocks.{i}.w1"].T
    # keep the canonical parameter order
    return {name: grads[name] for name in w if name in grads}


def backbone_features(params: EncoderParams, config: EncoderConfig, x) -> np.ndarray:
    """Eval-mode projection-head output before l2 normalization."""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.shape[1] != config.input_dim:
        raise DimensionMismatch(f"expected inputs of width {config.input_dim}, got {X.shape[1]}")
    cache = EncodeCache(params, config, TARGET, False)
    w = params.weights
    h = X
    for i in range(config.num_blocks):
        a, _ = gelu(h @ w[f"blocks.{i}.w1"] + w[f"blocks.{i}.b1"])
        h = h + a @ w[f"blocks.{i}.w2"] + w[f"blocks.{i}.b2"]
    return _head_forward(h, params, "proj", config, False, cache)


def update_running_stats(params: EncoderParams, cache: EncodeCache,
                         momentum: float = RUNNING_MOMENTUM) -> None:
    """Fold the batch statistics seen in a train-mode forward into ``params``' buffers."""
    for prefix, (mu, var) in cache.batch_stats.items():
        rm = params.buffers[f"{prefix}.norm.running_mean"]
        rv = params.buffers[f"{prefix}.norm.running_var"]
        rm *= momentum
        rm += (1.0 - momentum) * mu
        rv *= momentum
        rv += (1.0 - momentum) * var


def momentum_update(theta_k: EncoderParams, theta_q: EncoderParams, m: float) -> EncoderParams:
    """EMA step ``theta_k <- m * theta_k + (1 - m) * theta_q`` on the shared weights.

    Only names present in ``theta_k`` are touched, so the online
    prediction head is skipped. Buffers of the target are carried over.
    """
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"momentum must be in [0, 1], got {m}")
    out = {}
    for name, wk in theta_k.weights.items():
        wq = theta_q.weights.get(name)
        if wq is None or wq.shape != wk.shape:
            raise DimensionMismatch(f"parameter {name!r} missing or mis-shaped in online encoder")
        if m == 0.0:
            out[name] = wq.copy()
        else:
            out[name] = m * wk + (1.0 - m) * wq
    return EncoderParams(out, {k: v.copy() for k, v in theta_k.buffers.items()})


def cosine_momentum(t: int, T: int, m_start: float) -> float:
    """Target momentum rising from ``m_start`` at ``t=0`` to 1 at ``t=T``."""
    if T < 1 or not 0 <= t <= T:
        raise ValueError(f"need 0 <= t <= T and T >= 1, got t={t}, T={T}")
    return 1.0 - (1.0 - m_start) * (math.cos(math.pi * t / T) + 1.0) / 2.0
