"""Command-line entry point.

Subcommands::

    pretrain --config cfg.json --out run/
    probe    --checkpoint run/checkpoint.json --data clusters10 --epochs 100
    knn      --checkpoint run/checkpoint.json --data clusters10 --k 20
    stats    --checkpoint run/checkpoint.json --data clusters10
    ablate   --config cfg.json --axis temperature --values 0.07,0.1,0.2,0.3 --out abl/

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, load_config
from .data import resolve_data
from .encoder import ONLINE, TARGET, encode
from .errors import HardnegError, UsageError
from .mining import summarize, top_n_hardest_batch
from .probe import evaluate, extract_features, knn_eval, linear_probe, split_table
from .queue import NegativeQueue
from .synthesis import synthesize_batch
from .trainer import ablation_csv, metrics_csv, pretrain, run_ablation_grid

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("hardneg_lab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hardneg-lab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="progress logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pretrain", help="train an encoder pair, write metrics.csv and checkpoint.json")
    p.add_argument("--config", help="JSON config (defaults to the desk preset)")
    p.add_argument("--out", required=True, help="output directory")

    for name, help_ in (("probe", "linear-probe accuracy on frozen features"),
                        ("knn", "cosine kNN accuracy on frozen features"),
                        ("stats", "hardness of real vs synthetic negatives")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", default=None, help="CSV path or preset name (default: the checkpoint's)")
        p.add_argument("--split-seed", type=int, default=None,
                       help="seed of the 80/20 split (default: the checkpoint's seed)")
        if name == "probe":
            p.add_argument("--epochs", type=int, default=100)
            p.add_argument("--lr", type=float, default=1.0)
        if name in ("probe", "knn"):
            p.add_argument("--k", type=int, default=20)
        if name == "stats":
            p.add_argument("--queries", type=int, default=256, help="number of queries to sample")

    p = sub.add_parser("ablate", help="one training run per value along an ablation axis")
    p.add_argument("--config", help="base JSON config (defaults to the desk preset)")
    p.add_argument("--axis", required=True,
                   help="queue | temperature | momentum | drop_path | hardness | head_norm")
    p.add_argument("--values", required=True,
                   help="comma list; drop_path takes online:target pairs, hardness takes N:fraction pairs")
    p.add_argument("--out", required=True)
    return parser


def _config(path) -> TrainConfig:
    if path is None:
        return TrainConfig()
    if not Path(path).is_file():
        raise UsageError(f"--config: no such file {path!r}")
    return load_config(path)


def _checkpoint_and_data(args):
    if not Path(args.checkpoint).is_file():
        raise UsageError(f"--checkpoint: no such file {args.checkpoint!r}")
    ckpt = load_checkpoint(args.checkpoint)
    data = resolve_data(args.data or ckpt.config.data)
    seed = ckpt.config.seed if args.split_seed is None else args.split_seed
    return ckpt, data, seed


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def cmd_pretrain(args) -> None:
    config = _config(args.config)
    data = resolve_data(config.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(row):
        log.info("epoch %d/%d loss=%.4f synthetic=%d", row.epoch + 1, config.epochs,
                 row.mean_loss, row.synthetic_count)

    ckpt, rows = pretrain(config, data, on_epoch=progress)
    (out / "metrics.csv").write_text(metrics_csv(rows), encoding="utf-8")
    save_checkpoint(ckpt, out / "checkpoint.json")
    log.info("wrote %s and %s", out / "metrics.csv", out / "checkpoint.json")


def cmd_probe(args) -> None:
    ckpt, data, seed = _checkpoint_and_data(args)
    _emit(evaluate(ckpt, data, split_seed=seed, probe_epochs=args.epochs, probe_lr=args.lr, k=args.k))


def cmd_knn(args) -> None:
    ckpt, data, seed = _checkpoint_and_data(args)
    train, test = split_table(extract_features(ckpt, data), seed)
    if not 1 <= args.k <= len(train):
        raise UsageError(f"--k must be in [1, {len(train)}]")
    _emit({"knn_top1": knn_eval(train, test, args.k), "k": args.k, "split_seed": seed})


def cmd_stats(args) -> None:
    """Fill a queue with target embeddings, then mine and synthesize for a sample of queries."""
    ckpt, data, seed = _checkpoint_and_data(args)
    cfg = ckpt.config
    rng = np.random.default_rng(seed)
    X = data.features
    keys, _ = encode(ckpt.target, cfg.encoder, X[rng.permutation(len(data))[:cfg.queue_capacity]],
                     TARGET, train=False)
    queue = NegativeQueue(cfg.queue_capacity, cfg.encoder.embed_dim).enqueue(keys)
    negatives = queue.snapshot()
    qidx = rng.choice(len(data), size=min(args.queries, len(data)), replace=False)
    queries, _ = encode(ckpt.online, cfg.encoder, X[qidx], ONLINE, train=False)
    hard_idx, sims = top_n_hardest_batch(queries, negatives, cfg.top_n)
    L = cfg.synth_count
    result = {
        "queries": int(queries.shape[0]),
        "queue_size": int(negatives.shape[0]),
        "top_n": cfg.top_n,
        "synthetic_per_query": L,
        "real": summarize(sims).as_dict(),
        "hard": summarize(np.take_along_axis(sims, hard_idx, axis=1)).as_dict(),
        "synthetic": None,
    }
    if L:
        syn = synthesize_batch(queries, hard_idx, negatives, L, cfg.strategy, rng)
        result["synthetic"] = summarize(np.einsum("bd,bld->bl", queries, syn)).as_dict()
    _emit(result)


def cmd_ablate(args) -> None:
    base = _config(args.config)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise UsageError("--values is empty")
    data = resolve_data(base.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(row):
        log.info("%s=%s top1=%.4f", args.axis, row["setting"], row["top1"])

    try:
        table = run_ablation_grid(base, args.axis, values, data, on_row=progress)
    except ValueError as exc:
        if "axis" in str(exc):
            raise UsageError(f"--axis: {exc}") from None
        raise
    text = ablation_csv(args.axis, table)
    (out / f"ablation_{args.axis}.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)


COMMANDS = {"pretrain": cmd_pretrain, "probe": cmd_probe, "knn": cmd_knn, "stats": cmd_stats,
            "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HardnegError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
