"""Pretraining loop and ablation grid.

One training step:

1. two augmented views of a batch;
2. online encoder on view A gives queries, target encoder on view B gives
   keys (plus the mirrored pair when the loss is symmetrized);
3. every query mines its hardest negatives from the same queue snapshot
   and, outside warmup/cooldown, mixes them into its own synthetic
   negatives;
4. InfoNCE over queue + synthetic negatives, backprop into the online
   encoder only, optimizer step;
5. EMA update of the target encoder, then the view-B keys enter the queue.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .checkpoint import Checkpoint
from .config import TrainConfig
from .data import Dataset, augment
from .encoder import (ONLINE, TARGET, cosine_momentum, encode, encode_backward, init_params,
                      momentum_update, update_running_stats)
from .errors import DimensionMismatch, NonFiniteLoss
from .loss import infonce_batch
from .mining import top_n_hardest_batch
from .optim import adamw_step, cosine_lr, init_adamw_state, init_sgd_state, sgd_step
from .probe import evaluate
from .queue import NegativeQueue
from .synthesis import effective_count, synthesize_batch

log = logging.getLogger(__name__)

METRICS_FIELDS = ("epoch", "mean_loss", "mean_hardness_real", "mean_hardness_synthetic",
                  "synthetic_count", "momentum", "learning_rate")


@dataclass(frozen=True)
class MetricsRow:
    """Per-epoch averages. Hardness values are NaN when nothing was measured."""

    epoch: int
    mean_loss: float
    mean_hardness_real: float
    mean_hardness_synthetic: float
    synthetic_count: int
    momentum: float
    learning_rate: float


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.6f}"


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_FIELDS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, name)) for name in METRICS_FIELDS])
    return buf.getvalue()


def _rng_streams(seed: int):
    names = ("init", "shuffle", "augment", "drop_path", "synthesis")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(s) for name, s in zip(names, children)}


def _add(total, grads):
    if total is None:
        return dict(grads)
    return {k: total[k] + grads[k] for k in total}


def pretrain(config: TrainConfig, data: Dataset, on_epoch=None):
    """Train the online/target encoder pair on ``data``.

    Returns ``(checkpoint, metrics_rows)``. ``on_epoch`` is called with each
    :class:`MetricsRow` as it is produced.
    """
    enc = config.encoder
    if data.input_dim != enc.input_dim:
        raise DimensionMismatch(f"data has {data.input_dim} features, encoder expects {enc.input_dim}")
    n = len(data)
    B = config.batch_size
    steps_per_epoch = n // B
    if steps_per_epoch == 0:
        raise ValueError(f"dataset of {n} samples is smaller than batch_size {B}")
    total_steps = config.epochs * steps_per_epoch
    rngs = _rng_streams(config.seed)

    online = init_params(enc, rngs["init"], predictor=True)
    target = online.target_copy()
    if config.optimizer == "adamw":
        opt_state = init_adamw_state(online.weights)
    else:
        opt_state = init_sgd_state(online.weights)
    queue = NegativeQueue(config.queue_capacity, enc.embed_dim)
    base_L = config.synth_count
    N = config.top_n

    workspace = {}
    rows = []
    step = 0
    for epoch in range(config.epochs):
        perm = rngs["shuffle"].permutation(n)
        loss_sum = 0.0
        real_sum, real_n = 0.0, 0
        syn_sum, syn_n = 0.0, 0
        syn_count = 0
        lr = m = float("nan")
        for s in range(steps_per_epoch):
            x = data.features[perm[s * B:(s + 1) * B]]
            xa = augment(x, config.augment_q, rngs["augment"])
            xb = augment(x, config.augment_k, rngs["augment"])

            q_a, cache_a = encode(online, enc, xa, ONLINE, rngs["drop_path"], train=True)
            k_b, tcache_b = encode(target, enc, xb, TARGET, rngs["drop_path"], train=True)
            pairs = [(q_a, k_b, cache_a)]
            target_caches = [tcache_b]
            if config.symmetrize_loss:
                q_b, cache_b = encode(online, enc, xb, ONLINE, rngs["drop_path"], train=True)
                k_a, tcache_a = encode(target, enc, xa, TARGET, rngs["drop_path"], train=True)
                pairs.append((q_b, k_a, cache_b))
                target_caches.append(tcache_a)

            negatives = queue.snapshot()
            L = effective_count(epoch, config.epochs, config.cooldown_epochs, base_L, len(queue), N)
            grads = None
            step_loss = 0.0
            for q, k, cache in pairs:
                synthetic = None
                if negatives.shape[0]:
                    hard_idx, sims = top_n_hardest_batch(q, negatives, N)
                    real_sum += float(sims.mean())
                    real_n += 1
                    if L:
                        synthetic = synthesize_batch(q, hard_idx, negatives, L, config.strategy,
                                                     rngs["synthesis"], workspace)
                        syn_sum += float(np.einsum("bd,bld->bl", q, synthetic).mean())
                        syn_n += 1
                        syn_count += synthetic.shape[0] * synthetic.shape[1]
                losses, grad_q, _, _ = infonce_batch(q, k, negatives, synthetic, config.tau)
                step_loss += float(losses.mean()) / len(pairs)
                # keys come from the target encoder: their gradient is dropped
                grads = _add(grads, encode_backward(cache, grad_q / (q.shape[0] * len(pairs))))
            if not math.isfinite(step_loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NonFiniteLoss(step, step_loss)

            lr = cosine_lr(step, total_steps, config.base_lr)
            if config.optimizer == "adamw":
                online.weights, opt_state = adamw_step(online.weights, grads, opt_state, lr,
                                                       weight_decay=config.weight_decay)
            else:
                online.weights, opt_state = sgd_step(online.weights, grads, opt_state, lr,
                                                     weight_decay=config.weight_decay)
            for _, _, cache in pairs:
                update_running_stats(online, cache)
            for cache in target_caches:
                update_running_stats(target, cache)
            m = cosine_momentum(step, total_steps, config.m_start)
            target = momentum_update(target, online, m)
            queue.enqueue(k_b)
            loss_sum += step_loss
            step += 1

        row = MetricsRow(
            epoch=epoch,
            mean_loss=loss_sum / steps_per_epoch,
            mean_hardness_real=real_sum / real_n if real_n else float("nan"),
            mean_hardness_synthetic=syn_sum / syn_n if syn_n else float("nan"),
            synthetic_count=syn_count,
            momentum=m,
            learning_rate=lr,
        )
        rows.append(row)
        log.debug("epoch %d loss %.4f", epoch, row.mean_loss)
        if on_epoch is not None:
            on_epoch(row)

    ckpt = Checkpoint(config, online, target, step, optimizer_state=opt_state)
    return ckpt, rows


# ---------------------------------------------------------------- ablations

AXES = {
    "queue": "queue_capacity",
    "k": "queue_capacity",
    "queue_capacity": "queue_capacity",
    "temperature": "tau",
    "tau": "tau",
    "momentum": "m_start",
    "m_start": "m_start",
    "drop_path": "drop_path",
    "dpr": "drop_path",
    "hardness": "hardness",
    "head_norm": "head_norm",
}


def _pair(value: str, first=float, second=float):
    parts = value.split(":")
    if len(parts) != 2:
        raise ValueError(f"expected 'a:b', got {value!r}")
    return first(parts[0]), second(parts[1])


def apply_axis(base: TrainConfig, axis: str, value) -> TrainConfig:
    """Config for one grid cell. ``value`` may be a string straight from the command line."""
    key = AXES.get(axis.lower())
    if key is None:
        raise ValueError(f"unknown ablation axis {axis!r}; choose from {sorted(set(AXES))}")
    if key == "queue_capacity":
        K = int(value)
        return replace(base, queue_capacity=K, top_n=min(base.top_n, K))
    if key in ("tau", "m_start"):
        return replace(base, **{key: float(value)})
    if key == "drop_path":
        online, target = _pair(value) if isinstance(value, str) else value
        return replace(base, encoder=replace(base.encoder, drop_path_online=online,
                                             drop_path_target=target))
    if key == "hardness":
        top_n, fraction = _pair(value, int, float) if isinstance(value, str) else value
        return replace(base, top_n=int(top_n), synth_fraction=float(fraction))
    return replace(base, encoder=replace(base.encoder, head_norm=str(value)))


def run_ablation_grid(base: TrainConfig, axis: str, values, data: Dataset, on_row=None):
    """Train and probe one model per value; every run shares ``base.seed``.

    Returns a list of ``{"setting", "top1", "knn_top1", "final_loss"}`` dicts.
    """
    configs = [apply_axis(base, axis, v) for v in values]  # validate everything up front
    table = []
    for value, cfg in zip(values, configs):
        ckpt, rows = pretrain(cfg, data)
        result = evaluate(ckpt, data, split_seed=cfg.seed)
        row = {"setting": str(value), "top1": result["top1"], "knn_top1": result["knn_top1"],
               "final_loss": rows[-1].mean_loss}
        table.append(row)
        if on_row is not None:
            on_row(row)
    return table


def ablation_csv(axis: str, table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([axis, "top1", "knn_top1", "final_loss"])
    for row in table:
        writer.writerow([row["setting"], _fmt(row["top1"]), _fmt(row["knn_top1"]), _fmt(row["final_loss"])])
    return buf.getvalue()


def row_dict(row: MetricsRow) -> dict:
    return asdict(row)
