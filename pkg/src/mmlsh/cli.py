"""Benchmark command-line driver.

Verbs: build, groundtruth, query, compare, buffer-sweep. Every flag mirrors a
RunConfig field; a JSON config file supplies defaults and flags override it.
Exit codes: 0 success, 2 usage error, 3 data or format error.
"""

from __future__ import annotations

import argparse
import sys

from .bench import (RunConfig, build_artifacts, choose_queries, ensure_ground_truth,
                    load_artifacts, load_dataset, run_borda_baselines,
                    run_buffer_sweep, run_mmlsh_queries, write_report)
from .buffering import MMLSH, NS1, NS2
from .errors import (FeatureFileError, IndexFileError, ObjectMapError, ParameterError)

DATA_ERRORS = (FeatureFileError, ObjectMapError, IndexFileError, ParameterError,
               FileNotFoundError, ValueError)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with RunConfig fields")
    parser.add_argument("--vectors", dest="vectors_path")
    parser.add_argument("--object-map", dest="object_map_path")
    parser.add_argument("--synth-objects", type=int, dest="synth_objects")
    parser.add_argument("--synth-points", type=int, dest="synth_points_per_object")
    parser.add_argument("--synth-dim", type=int, dest="synth_dimension")
    parser.add_argument("--synth-spread", type=float, dest="synth_spread")
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--c", type=int)
    parser.add_argument("--w", type=float)
    parser.add_argument("--k", type=int)
    parser.add_argument("--k-primes", type=int, nargs="+", dest="k_primes")
    parser.add_argument("--num-queries", type=int, dest="num_queries")
    parser.add_argument("--query-size", type=int, dest="query_size",
                        help="points per query object (default: the whole object)")
    parser.add_argument("--buffer-mb", type=float, dest="buffer_mb")
    parser.add_argument("--buffer-sizes-mb", type=float, nargs="+", dest="buffer_sizes_mb")
    parser.add_argument("--strategy", choices=[NS1, NS2, MMLSH])
    parser.add_argument("--query-splits", type=int, dest="query_splits")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--alg-op-cost-ms", type=float, dest="alg_op_cost_ms")
    parser.add_argument("--index", dest="index_path")
    parser.add_argument("--profile", dest="profile_path")
    parser.add_argument("--groundtruth", dest="groundtruth_path")
    parser.add_argument("--out", dest="out_prefix")
    parser.add_argument("--json", action="store_true", help="also emit a JSON report")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items()
                 if v is not None and k not in ("config", "command", "json", "func")}
    if "k_primes" in overrides:
        overrides["k_primes"] = tuple(overrides["k_primes"])
    if "buffer_sizes_mb" in overrides:
        overrides["buffer_sizes_mb"] = tuple(overrides["buffer_sizes_mb"])
    if args.config:
        return RunConfig.from_file(args.config, overrides)
    return RunConfig(**overrides)


def cmd_build(args) -> int:
    cfg = _config_from_args(args)
    dataset = load_dataset(cfg)
    index, _profile = build_artifacts(cfg, dataset)
    p = index.params
    print(f"dataset: n={dataset.n} S={dataset.num_objects} d={dataset.dimension}")
    print(f"derived: m={p.m} l={p.l} p1={p.p1:.6f} p2={p.p2:.6f} z={p.z:.6f}")
    print(f"index written to {cfg.index_path}; frequency profile to {cfg.profile_path}")
    return 0


def cmd_groundtruth(args) -> int:
    cfg = _config_from_args(args)
    dataset = load_dataset(cfg)
    queries = choose_queries(dataset, cfg)
    truth = ensure_ground_truth(cfg, dataset, queries)
    print(f"ground truth for {len(truth)} queries in {cfg.groundtruth_path}")
    return 0


def cmd_query(args) -> int:
    cfg = _config_from_args(args)
    dataset = load_dataset(cfg)
    index, profile = load_artifacts(cfg)
    queries = choose_queries(dataset, cfg)
    truth = ensure_ground_truth(cfg, dataset, queries)
    rows = run_mmlsh_queries(cfg, dataset, index, queries, truth, profile=profile)
    print(write_report(rows, cfg, emit_json=args.json))
    return 0


def cmd_compare(args) -> int:
    cfg = _config_from_args(args)
    dataset = load_dataset(cfg)
    index, profile = load_artifacts(cfg)
    queries = choose_queries(dataset, cfg)
    truth = ensure_ground_truth(cfg, dataset, queries)
    rows = run_mmlsh_queries(cfg, dataset, index, queries, truth, profile=profile)
    rows += run_borda_baselines(cfg, dataset, index, queries, truth)
    print(write_report(rows, cfg, emit_json=args.json))
    return 0


def cmd_buffer_sweep(args) -> int:
    cfg = _config_from_args(args)
    dataset = load_dataset(cfg)
    index, profile = load_artifacts(cfg)
    queries = choose_queries(dataset, cfg)
    truth = ensure_ground_truth(cfg, dataset, queries)
    rows = run_buffer_sweep(cfg, dataset, index, queries, truth, profile)
    print(write_report(rows, cfg, emit_json=args.json))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmlsh", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, doc in (
        ("build", cmd_build, "build the index and frequency profile"),
        ("groundtruth", cmd_groundtruth, "compute or reuse the exact ranking cache"),
        ("query", cmd_query, "run object queries under one strategy"),
        ("compare", cmd_compare, "compare against Linear-Borda and C2LSH-Borda"),
        ("buffer-sweep", cmd_buffer_sweep, "NS1 vs MMLSH across buffer sizes"),
    ):
        p = sub.add_parser(name, help=doc)
        _add_common(p)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
