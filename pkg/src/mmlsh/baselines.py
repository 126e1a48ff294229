"""Ground-truth oracles and comparison baselines.

The exact object k-NN oracle brute-forces the object distance to every
object and is the single correctness reference for accuracy metrics. The two
baselines mirror the classical aggregation pipeline: retrieve top-k' points
per query point (exactly, or approximately with point-level collision
counting over the same index), then fuse the per-point rankings into an
object ranking with a positional Borda count.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ParameterError
from .lsh import LshIndex
from .model import Dataset, QueryObject
from .similarity import gamma_distance


@dataclass
class BordaConfig:
    """Depth of point-level retrieval (k') and final object count (k)."""

    k_prime: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.k_prime:
            raise ParameterError(f"need k_prime >= k >= 1, got k'={self.k_prime}, k={self.k}")


@dataclass
class GroundTruth:
    """Full exact object ranking for one query: ids and distances, ascending."""

    query_object_id: int
    object_ids: list
    distances: list

    def prefix(self, k: int):
        return list(zip(self.object_ids[:k], self.distances[:k]))


def exact_knn_objects(query: QueryObject, dataset: Dataset, k: int, gamma: float) -> list:
    """Exact top-k objects by brute-force object distance; ties by object id."""
    return full_ranking(query, dataset, gamma).prefix(k)


def full_ranking(query: QueryObject, dataset: Dataset, gamma: float) -> GroundTruth:
    scored = []
    for obj in dataset.objects:
        d = gamma_distance(query.coords, dataset.object_coords(obj.object_id), gamma)
        scored.append((d, obj.object_id))
    scored.sort(key=lambda t: (t[0], t[1]))
    return GroundTruth(query_object_id=query.object_id,
                       object_ids=[oid for _, oid in scored],
                       distances=[d for d, _ in scored])


def point_knn_linear(q_coords, dataset: Dataset, k_prime: int) -> list:
    """Exact Euclidean top-k' points by linear scan; returns (point_id, dist)."""
    q = np.asarray(q_coords, dtype=np.float64).reshape(1, -1)
    dists = cdist(q, dataset.coords.astype(np.float64))[0]
    point_ids = np.array([p.point_id for p in dataset.points])
    order = np.lexsort((point_ids, dists))[:k_prime]
    return [(int(point_ids[i]), float(dists[i])) for i in order]


def point_knn_c2lsh(q_coords, index: LshIndex, dataset: Dataset, k_prime: int,
                    beta_n: float | None = None, max_levels: int = 62,
                    buffer=None, stats=None):
    """Approximate top-k' points by collision counting with virtual rehashing.

    Point-level analog of the object search: a point becomes a candidate once
    its collision count reaches l; the scan stops when k' candidates are
    verified within c*R at a level start, or when k' + beta*n candidates
    exist. Returns ((point_id, dist) list, complete flag).

    When a BufferState and a QueryStats are supplied, every level's bucket
    range is pulled through the buffer under LRU so the baseline's modeled IO
    is comparable to the object engine's.
    """
    from .buffering import POINT_ID_BYTES, access_bucket  # local to avoid a cycle

    q = np.asarray(q_coords, dtype=np.float64)
    params = index.params
    n = index.n
    allowed_fp = beta_n if beta_n is not None else params.beta * n
    counts = np.zeros(n, dtype=np.int32)
    q_base = index.hash_query(q)
    lo_cov = np.full(index.m, np.iinfo(np.int64).max, dtype=np.int64)
    hi_cov = np.full(index.m, np.iinfo(np.int64).min, dtype=np.int64)

    # dyadic level intervals never cross bucket 0, so coverage can only ever
    # reach the part of each projection's range on the query's side of zero
    q_nonneg = q_base >= 0
    reach_lo = np.where(q_nonneg, np.maximum(index.bucket_lo, 0), index.bucket_lo)
    reach_hi = np.where(q_nonneg, index.bucket_hi + 1, np.minimum(index.bucket_hi + 1, 0))

    dists = cdist(q.reshape(1, -1), dataset.coords.astype(np.float64))[0]
    point_ids = np.array([p.point_id for p in dataset.points])

    def ranked_candidates():
        rows = np.nonzero(counts >= params.l)[0]
        order = np.lexsort((point_ids[rows], dists[rows]))
        return [(int(point_ids[rows[i]]), float(dists[rows[i]])) for i in order]

    R = 1
    num_iter = 1
    for _ in range(max_levels):
        cand_rows = np.nonzero(counts >= params.l)[0]
        if cand_rows.size and np.count_nonzero(dists[cand_rows] <= params.c * R) >= k_prime:
            return ranked_candidates()[:k_prime], True
        if cand_rows.size >= k_prime + allowed_fp:
            return ranked_candidates()[:k_prime], True
        covered = bool(np.all(
            (reach_lo >= reach_hi) | ((lo_cov <= reach_lo) & (hi_cov >= reach_hi))))
        if covered:
            break
        for g in range(index.m):
            qb = int(np.floor_divide(q_base[g], R))
            lo, hi = qb * R, qb * R + R
            if buffer is not None:
                blo = max(lo, int(index.bucket_lo[g]))
                bhi = min(hi, int(index.bucket_hi[g]) + 1)
                if blo < bhi:
                    sizes = index.bucket_sizes(g, blo, bhi)
                    for off, bucket in enumerate(range(blo, bhi)):
                        size = int(sizes[off]) * POINT_ID_BYTES
                        if not size:
                            continue
                        hit, ms = access_bucket((g, R, bucket), size, buffer)
                        if stats is not None:
                            stats.buckets_read += 1
                            stats.index_io_ms += ms
                            if hit:
                                stats.buffer_hits += 1
                            else:
                                stats.buffer_misses += 1
                                stats.bytes_read += size
                                stats.seeks += 1
            if lo_cov[g] > hi_cov[g]:
                segments = [(lo, hi)]
            else:
                segments = [(lo, int(lo_cov[g])), (int(hi_cov[g]), hi)]
            for s0, s1 in segments:
                s0 = max(s0, int(index.bucket_lo[g]))
                s1 = min(s1, int(index.bucket_hi[g]) + 1)
                if s0 < s1:
                    rows = index.range_rows(g, s0, s1)
                    counts[rows] += 1
                    if stats is not None:
                        stats.collision_increments += rows.size
                        stats.alg_ops += rows.size
            lo_cov[g], hi_cov[g] = lo, hi
        R = params.c ** num_iter
        num_iter += 1
    result = ranked_candidates()[:k_prime]
    return result, len(result) >= k_prime


def borda_aggregate(per_point_rankings, dataset: Dataset, k: int, k_prime: int | None = None) -> list:
    """Fuse per-point rankings into an object ranking by positional scoring.

    A point at 1-based rank r contributes k' - r + 1 to its owning object;
    unranked objects score zero. Objects are returned best first, ties broken
    by ascending object id; the result is the top-k (object_id, score) list.
    """
    if k_prime is None:
        k_prime = max((len(r) for r in per_point_rankings), default=0)
    scores = {}
    owner = {p.point_id: p.object_id for p in dataset.points}
    for ranking in per_point_rankings:
        if len(ranking) > k_prime:
            raise ValueError("ranking longer than k_prime")
        for r, item in enumerate(ranking, start=1):
            pid = item[0] if isinstance(item, tuple) else item
            oid = owner[pid]
            scores[oid] = scores.get(oid, 0) + (k_prime - r + 1)
    ranked = sorted(scores.items(), key=lambda t: (-t[1], t[0]))
    return ranked[:k]


def save_ground_truth(truths: list, path) -> None:
    """Persist exact rankings as `query_object_id,rank,object_id,gamma_distance`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_object_id", "rank", "object_id", "gamma_distance"])
        for gt in truths:
            for rank, (oid, dist) in enumerate(zip(gt.object_ids, gt.distances), start=1):
                writer.writerow([gt.query_object_id, rank, oid, repr(dist)])


def load_ground_truth(path) -> dict:
    """Load a ground-truth cache back into {query_object_id: GroundTruth}."""
    by_query = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            qid = int(row["query_object_id"])
            entry = by_query.setdefault(qid, GroundTruth(qid, [], []))
            entry.object_ids.append(int(row["object_id"]))
            entry.distances.append(float(row["gamma_distance"]))
    return by_query
