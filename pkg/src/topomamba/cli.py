"""Command-line entry point: ``lift``, ``stats``, ``train``, ``eval`` and ``bench-batching``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
import tracemalloc
from pathlib import Path

import numpy as np

from .complex import boundary_matrix, write_sparse
from .datasets import generate_synthetic, load_graph_dataset
from .errors import TopoMambaError
from .lifting import DEFAULT_CLIQUE_CEILING, clique_lift
from .model import TopoMambaModel, read_checkpoint
from .training import AdamState, TrainConfig, evaluate, load_config, run_experiment, split_dataset, train_epoch

RANK_NAMES = ("nodes", "edges", "triangles", "tetrahedra")


def _rank_name(r: int) -> str:
    return RANK_NAMES[r] if r < len(RANK_NAMES) else f"rank{r}"


def cmd_lift(args) -> int:
    bundle = load_graph_dataset(args.input)
    X = clique_lift(bundle.graph, args.max_rank, args.clique_ceiling)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for r in range(X.max_rank + 1):
        np.savetxt(out / f"cells_rank{r}.txt", X.cells_by_rank[r], fmt="%d")
    for r in range(1, X.max_rank + 1):
        with open(out / f"boundary_rank{r}.txt", "w") as fh:
            write_sparse(boundary_matrix(X, r), r, fh)
    print(f"lifted {bundle.name}: counts {X.counts} -> {out}")
    return 0


def cmd_stats(args) -> int:
    bundle = load_graph_dataset(args.data)
    X = clique_lift(bundle.graph, args.max_rank, args.clique_ceiling)
    header = ["dataset"] + [_rank_name(r) for r in range(X.max_rank + 1)]
    print("\t".join(header))
    print("\t".join([bundle.name] + [str(c) for c in X.counts]))
    return 0


def cmd_train(args) -> int:
    config = load_config(args.config) if args.config else TrainConfig()
    if args.full_batch:
        config.batch_size = None
    elif args.batch_size is not None:
        config.batch_size = args.batch_size
    if args.seed is not None:
        config.seed = args.seed
    bundle = load_graph_dataset(args.data)
    report = run_experiment(bundle, config, args.seeds, args.out)
    for r in report.runs:
        print(f"seed {r.seed}\tbest epoch {r.best_epoch}\tval {r.val_metric:.4f}\ttest {r.test_metric:.4f}")
    print(report.summary())
    if args.out:
        print(f"results written to {Path(args.out) / 'results.tsv'}")
    return 0


def cmd_eval(args) -> int:
    model, meta = read_checkpoint(args.checkpoint)
    bundle = load_graph_dataset(args.data)
    max_rank = int(meta.get("max_rank", 3))
    X = clique_lift(bundle.graph, max_rank, int(meta.get("clique_ceiling", DEFAULT_CLIQUE_CEILING)))
    metric = args.metric or meta.get("metric") or ("accuracy" if bundle.task == "classification" else "mae")
    out = model.forward(X, bundle.features.astype(np.float32))
    seed = args.split_seed if args.split_seed is not None else meta.get("seed")
    if seed is None:
        print(f"all\t{metric}\t{evaluate(out, bundle.labels, metric):.4f}")
        return 0
    masks = split_dataset(bundle.n_nodes, int(seed))
    for name in ("train", "val", "test"):
        idx = getattr(masks, name)
        print(f"{name}\t{metric}\t{evaluate(out[idx], bundle.labels[idx], metric):.4f}")
    return 0


def _bench_one(bundle, X, config, masks, epochs):
    model = TopoMambaModel.init(config.model_config(bundle), 0)
    features = bundle.features.astype(np.float32)
    train_idx = np.flatnonzero(masks.train)
    rng = np.random.default_rng(0)
    state = AdamState()
    tracemalloc.start()
    t0 = time.perf_counter()
    for _ in range(epochs):
        train_epoch(model, X, features, bundle.labels, train_idx, config, state, rng)
    seconds = (time.perf_counter() - t0) / epochs
    peak = tracemalloc.get_traced_memory()[1]
    tracemalloc.stop()
    return peak, seconds


def cmd_bench(args) -> int:
    if args.data:
        bundle = load_graph_dataset(args.data)
    else:
        n = args.synthetic_nodes
        bundle = generate_synthetic(n, n // 10, n, d_in=8, seed=0)
    X = clique_lift(bundle.graph, args.max_rank)
    masks = split_dataset(bundle.n_nodes, 0)
    model_options = {"d_h": args.d_h, "n_blocks": args.n_blocks}
    print(f"# {bundle.name}: counts {X.counts}")
    print("method\tbatch_size\tpeak_mib\tsec_per_epoch")
    rows = [("full", None)] + [(m, b) for b in args.batch_sizes for m in ("node_incidence", "per_rank")]
    for method, batch_size in rows:
        config = TrainConfig(
            batch_size=batch_size,
            batch_method="node_incidence" if method == "full" else method,
            max_rank=args.max_rank,
            model_options=model_options,
        )
        peak, seconds = _bench_one(bundle, X, config, masks, args.epochs)
        label = "full" if batch_size is None else str(batch_size)
        print(f"{method}\t{label}\t{peak / 2**20:.1f}\t{seconds:.3f}", flush=True)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topomamba", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for every epoch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lift", help="clique-lift a dataset and dump cells and boundary matrices")
    p.add_argument("--input", required=True, help="dataset directory")
    p.add_argument("--max-rank", type=int, default=3)
    p.add_argument("--output", required=True)
    p.add_argument("--clique-ceiling", type=int, default=DEFAULT_CLIQUE_CEILING)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("stats", help="print per-rank cell counts")
    p.add_argument("--data", required=True)
    p.add_argument("--max-rank", type=int, default=3)
    p.add_argument("--clique-ceiling", type=int, default=DEFAULT_CLIQUE_CEILING)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="multi-seed training with early stopping")
    p.add_argument("--data", required=True)
    p.add_argument("--config", help="key=value training config file")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--batch-size", type=int)
    group.add_argument("--full-batch", action="store_true")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--seed", type=int, help="first seed (overrides the config)")
    p.add_argument("--out", help="directory for results.tsv and checkpoints")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--metric", choices=("accuracy", "roc_auc", "mae"))
    p.add_argument("--split-seed", type=int, help="defaults to the seed stored in the checkpoint")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench-batching", help="time full-batch vs the two minibatch samplers")
    p.add_argument("--data", help="dataset directory (default: a synthetic graph)")
    p.add_argument("--synthetic-nodes", type=int, default=2000)
    p.add_argument("--batch-sizes", type=int, nargs="+", default=[128, 512])
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--max-rank", type=int, default=3)
    p.add_argument("--d-h", type=int, default=64)
    p.add_argument("--n-blocks", type=int, default=2)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TopoMambaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
