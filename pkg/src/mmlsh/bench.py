"""Benchmark protocol: build, ground truth, query runs, comparisons, sweeps.

Timing is modeled (HDD cost model plus a fixed per-operation algorithm cost),
not measured; wall-clock time is reported separately as informational only,
so repeated runs with the same config and seed produce identical reports.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import asdict, dataclass

import numpy as np

from .baselines import (borda_aggregate, full_ranking, load_ground_truth,
                        point_knn_c2lsh, point_knn_linear, save_ground_truth)
from .buffering import (MMLSH, NS1, NS2, POINT_ID_BYTES, BufferState, CostModel,
                        FrequencyProfile, SchedulerConfig, _MmlshEvictor,
                        access_bucket, build_frequency_profile, evict_lru,
                        schedule_ns1, schedule_ns2, split_queries)
from .engine import DEFAULT_ALG_OP_COST_MS, QueryStats, knn_objects
from .errors import ParameterError
from .lsh import DEFAULT_C, DEFAULT_W, build_index, derive_params, load_index, save_index
from .model import Dataset, QueryObject, load_feature_file, load_object_map, synth_dataset
from .similarity import GammaParams, object_ratio

MB = 1_000_000


@dataclass
class RunConfig:
    """Fully resolved benchmark configuration; embedded in report headers."""

    # dataset: either file paths or a synthetic spec
    vectors_path: str | None = None
    object_map_path: str | None = None
    synth_objects: int = 200
    synth_points_per_object: int = 20
    synth_dimension: int = 32
    synth_spread: float = 0.1

    # search quality knobs
    gamma: float = 0.3
    delta: float = 0.1
    beta: float | None = None       # None -> 25 / S
    epsilon: float | None = None    # None -> 2 * delta
    c: int = DEFAULT_C
    w: float = DEFAULT_W

    # protocol
    k: int = 25
    k_primes: tuple = (25, 50, 100)
    num_queries: int = 10
    query_size: int | None = None   # points per query object; None = all
    buffer_mb: float = 30.0
    buffer_sizes_mb: tuple = (20.0, 30.0, 40.0, 50.0)
    strategy: str = MMLSH
    query_splits: int = 10
    seed: int = 0
    alg_op_cost_ms: float = DEFAULT_ALG_OP_COST_MS

    # artifact locations
    index_path: str = "mmlsh.index"
    profile_path: str = "mmlsh.profile.npz"
    groundtruth_path: str = "groundtruth.csv"
    out_prefix: str = "report"

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.update(overrides or {})
        return cls(**data)

    def resolved_beta(self, S: int) -> float:
        return self.beta if self.beta is not None else min(25.0 / S, 0.999)

    def gamma_params(self, S: int) -> GammaParams:
        return GammaParams(gamma=self.gamma, delta=self.delta,
                           beta=self.resolved_beta(S), epsilon=self.epsilon)


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.vectors_path:
        if not cfg.object_map_path:
            raise ParameterError("vectors_path requires object_map_path")
        points = load_feature_file(cfg.vectors_path)
        return load_object_map(cfg.object_map_path, points)
    return synth_dataset(cfg.synth_objects, cfg.synth_points_per_object,
                         cfg.synth_dimension, cfg.synth_spread, seed=cfg.seed)


def choose_queries(dataset: Dataset, cfg: RunConfig) -> list[QueryObject]:
    """Sample query objects (and optionally subsample their points) by seed."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    count = min(cfg.num_queries, dataset.num_objects)
    chosen = rng.choice(dataset.object_ids, size=count, replace=False)
    queries = []
    for oid in sorted(int(o) for o in chosen):
        q = QueryObject.from_object(dataset, oid)
        if cfg.query_size is not None and cfg.query_size < len(q.points):
            keep = rng.choice(len(q.points), size=cfg.query_size, replace=False)
            q = QueryObject(object_id=oid, points=[q.points[i] for i in sorted(keep)])
        queries.append(q)
    return queries


def build_artifacts(cfg: RunConfig, dataset: Dataset):
    """Derive parameters, build and persist the index and frequency profile."""
    params = derive_params(cfg.delta, cfg.resolved_beta(dataset.num_objects), cfg.c, cfg.w)
    index = build_index(dataset, params, seed=cfg.seed)
    save_index(index, cfg.index_path)
    profile = build_frequency_profile(index, dataset, seed=cfg.seed)
    profile.save(cfg.profile_path)
    return index, profile


def ensure_ground_truth(cfg: RunConfig, dataset: Dataset, queries) -> dict:
    """Load the exact-ranking cache, computing and saving it when absent."""
    if os.path.exists(cfg.groundtruth_path):
        cached = load_ground_truth(cfg.groundtruth_path)
        if all(q.object_id in cached for q in queries):
            return cached
    truths = [full_ranking(q, dataset, cfg.gamma) for q in queries]
    save_ground_truth(truths, cfg.groundtruth_path)
    return {gt.query_object_id: gt for gt in truths}


def _ratio_against_truth(returned_dists, truth, k):
    value, flagged = object_ratio(returned_dists, truth.distances[:k])
    return value, flagged


def _row(query, method, strategy, buffer_mb, k_prime, ratio, flagged, stats: QueryStats,
         stop="", levels=0, wall_ms=0.0):
    return {
        "query_object_id": query.object_id,
        "method": method,
        "strategy": strategy,
        "buffer_mb": buffer_mb,
        "k_prime": k_prime,
        "or_gamma": ratio,
        "or_flagged": int(flagged),
        "total_ms": stats.total_ms,
        "alg_ms": stats.alg_ms,
        "index_io_ms": stats.index_io_ms,
        "hits": stats.buffer_hits,
        "misses": stats.buffer_misses,
        "stop": stop,
        "levels": levels,
        "wall_ms": wall_ms,
    }


def _bucket_size_fn(index, g: int):
    lo_g, hi_g = int(index.bucket_lo[g]), int(index.bucket_hi[g])
    sizes = index.bucket_sizes(g, lo_g, hi_g + 1)

    def size_of(bucket: int) -> int:
        if bucket < lo_g or bucket > hi_g:
            return 0
        return int(sizes[bucket - lo_g]) * POINT_ID_BYTES

    return size_of


def _charge(stats: QueryStats, buffer: BufferState, key, size: int, evict) -> None:
    hit, ms = access_bucket(key, size, buffer, evict)
    stats.buckets_read += 1
    stats.index_io_ms += ms
    if hit:
        stats.buffer_hits += 1
    else:
        stats.buffer_misses += 1
        stats.bytes_read += size
        stats.seeks += 1


def replay_plans(strategy: str, plans, index, buffer: BufferState,
                 stats_list, scheduler: SchedulerConfig) -> None:
    """Charge modeled IO for recorded query plans under one strategy.

    plans[i] is the pass list knn_objects recorded for query i; stats_list[i]
    is mutated in place. NS1 and MMLSH execute queries one after another; NS2
    batches the whole set, reading each distinct useful bucket once per
    (level, projection) pass and checking every batched query against it.
    """
    if strategy == NS2:
        _replay_ns2_batch(plans, index, buffer, stats_list)
        return
    evictor = evict_lru
    if strategy == MMLSH:
        evictor = _MmlshEvictor(scheduler, scheduler.profile)
    for stats, plan in zip(stats_list, plans):
        for g, R, ranges in plan:
            size_of = _bucket_size_fn(index, g)
            if strategy == NS1:
                for _qi, lo, hi in schedule_ns1(ranges):
                    for bucket in range(lo, hi):
                        size = size_of(bucket)
                        if size:
                            _charge(stats, buffer, (g, R, bucket), size, evict_lru)
            else:
                for _qi, lo, hi in split_queries(ranges, scheduler.query_splits):
                    stats.alg_ops += 1  # segment dispatch overhead
                    for bucket in range(lo, hi):
                        size = size_of(bucket)
                        if not size:
                            continue
                        evictor.current_bucket = (g, R, bucket)
                        _charge(stats, buffer, (g, R, bucket), size, evictor)
                        buffer.note_use((g, R, bucket))


def _replay_ns2_batch(plans, index, buffer: BufferState, stats_list) -> None:
    """Batched per-bucket execution across all queries (NS2 semantics).

    Each bucket's read is billed to its first consumer; every query range in
    the pass pays one membership-check operation per bucket read.
    """
    passes: dict[tuple, list] = {}
    for query_idx, plan in enumerate(plans):
        for g, R, ranges in plan:
            passes.setdefault((R, g), []).extend(
                (query_idx, lo, hi) for _qi, lo, hi in ranges)
    for (R, g) in sorted(passes):
        ranges = passes[(R, g)]
        size_of = _bucket_size_fn(index, g)
        for bucket, consumers in schedule_ns2(ranges):
            size = size_of(bucket)
            if not size:
                continue
            _charge(stats_list[consumers[0]], buffer, (g, R, bucket), size, evict_lru)
            for query_idx, _lo, _hi in ranges:
                stats_list[query_idx].alg_ops += 1


def record_query_plans(cfg: RunConfig, dataset, index, queries) -> tuple[list, list, list]:
    """Run every query once without IO accounting, keeping its pass plan.

    Returns (results, plans, wall_ms) aligned with `queries`. The plans can
    then be replayed under any strategy and buffer size without recomputing
    the collision counting.
    """
    gparams = cfg.gamma_params(dataset.num_objects)
    results, plans, walls = [], [], []
    for q in queries:
        plan: list = []
        t0 = time.perf_counter()
        res = knn_objects(q, cfg.k, index, dataset, gparams,
                          alg_op_cost_ms=cfg.alg_op_cost_ms, plan=plan)
        walls.append((time.perf_counter() - t0) * 1e3)
        results.append(res)
        plans.append(plan)
    return results, plans, walls


def rows_from_results(cfg: RunConfig, queries, results, walls, truth,
                      strategy: str, buffer_mb: float) -> list[dict]:
    rows = []
    for q, res, wall_ms in zip(queries, results, walls):
        res.stats.alg_ms = res.stats.alg_ops * cfg.alg_op_cost_ms
        k_eff = min(cfg.k, len(res.top_k))
        ratio, flagged = _ratio_against_truth([d for _, d in res.top_k[:k_eff]],
                                              truth[q.object_id], k_eff)
        rows.append(_row(q, "mmLSH", strategy, buffer_mb, "", ratio, flagged,
                         res.stats, res.stop_condition, res.levels_used, wall_ms))
    return rows


def run_mmlsh_queries(cfg: RunConfig, dataset, index, queries, truth,
                      strategy: str | None = None, buffer_mb: float | None = None,
                      profile: FrequencyProfile | None = None,
                      shared_buffer: BufferState | None = None) -> list[dict]:
    """Run the object engine for each query under one scheduling strategy."""
    strategy = strategy or cfg.strategy
    buffer_mb = buffer_mb if buffer_mb is not None else cfg.buffer_mb
    scheduler = SchedulerConfig(strategy=strategy, query_splits=cfg.query_splits,
                                profile=profile)
    buffer = shared_buffer or BufferState(int(buffer_mb * MB), CostModel())
    results, plans, walls = record_query_plans(cfg, dataset, index, queries)
    replay_plans(strategy, plans, index, buffer, [r.stats for r in results], scheduler)
    return rows_from_results(cfg, queries, results, walls, truth, strategy, buffer_mb)


def run_borda_baselines(cfg: RunConfig, dataset, index, queries, truth) -> list[dict]:
    """LinearSearch-Borda and C2LSH-Borda rows for every configured k'."""
    from .similarity import gamma_distance

    rows = []
    gparams = cfg.gamma_params(dataset.num_objects)
    for k_prime in cfg.k_primes:
        if k_prime < cfg.k:
            continue
        for q in queries:
            # exact point retrieval: no index, no buffer, modeled scan cost only
            t0 = time.perf_counter()
            rankings = [point_knn_linear(p.coords, dataset, k_prime) for p in q.points]
            top = borda_aggregate(rankings, dataset, cfg.k, k_prime)
            wall_ms = (time.perf_counter() - t0) * 1e3
            stats = QueryStats(alg_ops=len(q.points) * dataset.n)
            stats.alg_ms = stats.alg_ops * cfg.alg_op_cost_ms
            dists = [gamma_distance(q.coords, dataset.object_coords(oid), cfg.gamma)
                     for oid, _ in top]
            k_eff = len(top)
            ratio, flagged = _ratio_against_truth(dists, truth[q.object_id], k_eff)
            rows.append(_row(q, "Linear-Borda", "", "", k_prime, ratio, flagged,
                             stats, wall_ms=wall_ms))

            t0 = time.perf_counter()
            stats = QueryStats()
            buffer = BufferState(int(cfg.buffer_mb * MB), CostModel())
            rankings = []
            for p in q.points:
                ranking, _complete = point_knn_c2lsh(p.coords, index, dataset, k_prime,
                                                     buffer=buffer, stats=stats)
                rankings.append(ranking)
            top = borda_aggregate(rankings, dataset, cfg.k, k_prime)
            wall_ms = (time.perf_counter() - t0) * 1e3
            stats.alg_ms = stats.alg_ops * cfg.alg_op_cost_ms
            dists = [gamma_distance(q.coords, dataset.object_coords(oid), cfg.gamma)
                     for oid, _ in top]
            k_eff = len(top)
            ratio, flagged = _ratio_against_truth(dists, truth[q.object_id], k_eff)
            rows.append(_row(q, "C2LSH-Borda", NS1, cfg.buffer_mb, k_prime, ratio,
                             flagged, stats, wall_ms=wall_ms))
    return rows


def run_buffer_sweep(cfg: RunConfig, dataset, index, queries, truth,
                     profile: FrequencyProfile) -> list[dict]:
    """NS1 and MMLSH at every configured buffer size, shared buffer per run."""
    rows = []
    for size_mb in cfg.buffer_sizes_mb:
        for strategy in (NS1, MMLSH):
            shared = BufferState(int(size_mb * MB), CostModel())
            rows.extend(run_mmlsh_queries(cfg, dataset, index, queries, truth,
                                          strategy=strategy, buffer_mb=size_mb,
                                          profile=profile, shared_buffer=shared))
    return rows


def aggregate(rows: list[dict]) -> list[dict]:
    """Mean and standard deviation per (method, strategy, buffer, k')."""
    groups = {}
    for row in rows:
        key = (row["method"], row["strategy"], row["buffer_mb"], row["k_prime"])
        groups.setdefault(key, []).append(row)
    out = []
    for key, members in sorted(groups.items(), key=lambda t: str(t[0])):
        ratios = [r["or_gamma"] for r in members if np.isfinite(r["or_gamma"])]
        agg = {
            "query_object_id": "MEAN",
            "method": key[0], "strategy": key[1], "buffer_mb": key[2], "k_prime": key[3],
            "or_gamma": float(np.mean(ratios)) if ratios else float("inf"),
            "or_flagged": sum(r["or_flagged"] for r in members),
            "total_ms": float(np.mean([r["total_ms"] for r in members])),
            "alg_ms": float(np.mean([r["alg_ms"] for r in members])),
            "index_io_ms": float(np.mean([r["index_io_ms"] for r in members])),
            "hits": float(np.mean([r["hits"] for r in members])),
            "misses": float(np.mean([r["misses"] for r in members])),
            "stop": "", "levels": float(np.mean([r["levels"] for r in members])),
            "wall_ms": float(np.mean([r["wall_ms"] for r in members])),
        }
        out.append(agg)
        std = dict(agg)
        std["query_object_id"] = "STD"
        for col in ("or_gamma", "total_ms", "alg_ms", "index_io_ms", "hits", "misses", "levels", "wall_ms"):
            vals = [r[col] for r in members if np.isfinite(r[col])] or [float("nan")]
            std[col] = float(np.std(vals))
        out.append(std)
    return out


REPORT_COLUMNS = ["query_object_id", "method", "strategy", "buffer_mb", "k_prime",
                  "or_gamma", "or_flagged", "total_ms", "alg_ms", "index_io_ms",
                  "hits", "misses", "stop", "levels", "wall_ms"]


def write_report(rows: list[dict], cfg: RunConfig, out_prefix: str | None = None,
                 emit_json: bool = False) -> str:
    """Write CSV (+ optional JSON) and return an aligned human-readable table.

    The resolved config is embedded as comment lines at the top of the CSV so
    every report is self-describing.
    """
    prefix = out_prefix or cfg.out_prefix
    all_rows = rows + aggregate(rows)
    csv_path = prefix + ".csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write("# config: " + json.dumps(asdict(cfg), default=str) + "\n")
        fh.write(f"# alg_op_cost_ms: {cfg.alg_op_cost_ms}\n")
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in all_rows:
            writer.writerow(row)
    if emit_json:
        with open(prefix + ".json", "w") as fh:
            json.dump({"config": asdict(cfg), "rows": all_rows}, fh, indent=2, default=str)

    widths = {col: max(len(col), *(len(_fmt(r[col])) for r in all_rows)) for col in REPORT_COLUMNS}
    lines = ["  ".join(col.ljust(widths[col]) for col in REPORT_COLUMNS)]
    for row in all_rows:
        lines.append("  ".join(_fmt(row[col]).ljust(widths[col]) for col in REPORT_COLUMNS))
    return "\n".join(lines)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def load_artifacts(cfg: RunConfig):
    index = load_index(cfg.index_path)
    profile = FrequencyProfile.load(cfg.profile_path) if os.path.exists(cfg.profile_path) else None
    return index, profile
