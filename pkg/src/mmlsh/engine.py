"""Collision-counting k-NN object search with virtual rehashing.

The search proceeds in levels R = 1, c, c^2, ...; at level R two points
collide in a projection when their base buckets agree after integer division
by R. Per (query point, projection) a point is counted at most once across
levels, so the per-pair collision count never exceeds m. Objects whose
collision index reaches (1 - epsilon) * gamma enter the candidate list, and
the search stops when either

* T1 — at least k + beta * S candidates exist (checked after each projection
  pass, all scheduling strategies included), or
* T2 — at the start of a level, at least k candidates have exact object
  distance <= c * R.

Bucket accesses are routed through the buffer simulation when a scheduler is
supplied; scheduling changes cost statistics only, never the counts or the
answer, because counting is applied at strategy-independent barriers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .buffering import (MMLSH, NS1, NS2, BufferState, SchedulerConfig, _MmlshEvictor,
                        POINT_ID_BYTES, access_bucket, evict_lru, schedule_ns1,
                        schedule_ns2, split_queries)
from .errors import ParameterError
from .lsh import LshIndex
from .model import Dataset, QueryObject
from .similarity import GammaParams, gamma_distance

# modeled cost of one algorithm operation (collision increment or per-bucket
# query check); absolute hardware numbers are not portable, only structure is
DEFAULT_ALG_OP_COST_MS = 1e-6

T1 = "T1"
T2 = "T2"
EXHAUSTED = "EXHAUSTED"

_MAX_LEVELS = 62  # R = c**level must stay inside int64


@dataclass
class QueryStats:
    buckets_read: int = 0
    buffer_hits: int = 0
    buffer_misses: int = 0
    bytes_read: int = 0
    seeks: int = 0
    index_io_ms: float = 0.0
    collision_increments: int = 0
    alg_ops: int = 0
    alg_ms: float = 0.0

    @property
    def total_ms(self) -> float:
        return self.alg_ms + self.index_io_ms


@dataclass
class QueryResult:
    top_k: list  # (object_id, exact object distance), ascending
    stop_condition: str
    levels_used: int
    complete: bool
    stats: QueryStats
    bound_warning: bool = False

    @property
    def object_ids(self):
        return [oid for oid, _ in self.top_k]


def gamma_min_bound(q_size: int, min_object_size: int, delta: float,
                    epsilon: float, beta: float) -> float:
    """Smallest gamma for which the approximation guarantee is proved.

    sqrt(max(ln(1/delta) / ((eps-delta)^2 |Q| L), 2 ln(2/beta) / (beta^2 |Q| L))).
    """
    if q_size < 1 or min_object_size < 1:
        raise ParameterError("|Q| and L must be >= 1")
    for name, v in (("delta", delta), ("epsilon", epsilon), ("beta", beta)):
        if not 0.0 < v < 1.0:
            raise ParameterError(f"{name} must be in (0, 1), got {v}")
    if epsilon <= delta:
        raise ParameterError(f"epsilon ({epsilon}) must exceed delta ({delta})")
    ql = q_size * min_object_size
    term1 = math.log(1.0 / delta) / ((epsilon - delta) ** 2 * ql)
    term2 = 2.0 * math.log(2.0 / beta) / (beta ** 2 * ql)
    return math.sqrt(max(term1, term2))


class CollisionState:
    """All mutable per-query search state: counts, collision indexes, coverage."""

    def __init__(self, q_count: int, index: LshIndex, dataset: Dataset):
        self.q_count = q_count
        self.counts = np.zeros((q_count, dataset.n), dtype=np.int32)
        self.qualifying_pairs = np.zeros(dataset.num_objects, dtype=np.int64)
        self.pair_totals = q_count * dataset.object_sizes
        # covered base-bucket interval per (query point, projection); empty at start
        self.cov_lo = np.full((q_count, index.m), np.iinfo(np.int64).max, dtype=np.int64)
        self.cov_hi = np.full((q_count, index.m), np.iinfo(np.int64).min, dtype=np.int64)
        self.level = 1
        self.num_iter = 1

    @property
    def ci(self) -> np.ndarray:
        return self.qualifying_pairs / self.pair_totals

    def candidate_mask(self, gparams: GammaParams) -> np.ndarray:
        return self.ci >= gparams.candidate_threshold


def count_collisions(qi: int, q_bucket: int, g: int, R: int, index: LshIndex,
                     dataset: Dataset, state: CollisionState) -> int:
    """Count new collisions for query point qi in projection g at level R.

    The level-R bucket of the query is the base-bucket interval
    [qb*R, qb*R + R); only the part not covered at earlier levels is counted,
    which enforces the once-per-projection rule. Returns the increment count.
    """
    qb = q_bucket if R == 1 else int(np.floor_divide(q_bucket, R))
    lo, hi = qb * R, qb * R + R
    old_lo, old_hi = int(state.cov_lo[qi, g]), int(state.cov_hi[qi, g])
    if old_lo > old_hi:
        segments = [(lo, hi)]
    else:
        segments = [(lo, old_lo), (old_hi, hi)]
    l = index.params.l
    incremented = 0
    for s0, s1 in segments:
        s0 = max(s0, int(index.bucket_lo[g]))
        s1 = min(s1, int(index.bucket_hi[g]) + 1)
        if s0 >= s1:
            continue
        rows = index.range_rows(g, s0, s1)
        if rows.size == 0:
            continue
        current = state.counts[qi, rows]
        crossing = rows[current == l - 1]
        if crossing.size:
            np.add.at(state.qualifying_pairs, dataset.point_object_index[crossing], 1)
        state.counts[qi, rows] = current + 1
        incremented += rows.size
    state.cov_lo[qi, g] = lo
    state.cov_hi[qi, g] = hi
    return incremented


def check_t1(cl_count: int, k: int, beta: float, S: int) -> bool:
    """T1: at least k + beta*S candidates found."""
    return cl_count >= k + beta * S


def check_t2(candidate_dists, k: int, c_radius: float) -> bool:
    """T2: at least k candidates verified within distance c*R."""
    within = sum(1 for d in candidate_dists if d <= c_radius)
    return within >= k


class _PassCoster:
    """Executes one projection pass's bucket accesses under a strategy."""

    def __init__(self, scheduler: SchedulerConfig | None, buffer: BufferState | None,
                 stats: QueryStats):
        self.scheduler = scheduler
        self.buffer = buffer
        self.stats = stats
        self._mmlsh_evictor = None
        if scheduler is not None and scheduler.strategy == MMLSH:
            self._mmlsh_evictor = _MmlshEvictor(scheduler, scheduler.profile)

    def run(self, index: LshIndex, g: int, R: int, ranges) -> None:
        """ranges: (query index, lo, hi) full level intervals for projection g."""
        if self.scheduler is None or self.buffer is None:
            return
        lo_all = min(r[1] for r in ranges)
        hi_all = max(r[2] for r in ranges)
        lo_all = max(lo_all, int(index.bucket_lo[g]))
        hi_all = min(hi_all, int(index.bucket_hi[g]) + 1)
        if lo_all >= hi_all:
            return
        sizes = index.bucket_sizes(g, lo_all, hi_all)

        def size_of(bucket):
            if bucket < lo_all or bucket >= hi_all:
                return 0
            return int(sizes[bucket - lo_all]) * POINT_ID_BYTES

        strategy = self.scheduler.strategy
        if strategy == NS1:
            for qi, lo, hi in schedule_ns1(ranges):
                self._access_range(g, R, lo, hi, size_of, evict_lru)
        elif strategy == NS2:
            q_total = len(ranges)
            for bucket, consumers in schedule_ns2(ranges):
                size = size_of(bucket)
                if size:
                    self._access_one(g, R, bucket, size, evict_lru)
                    # per-bucket strategy must check every query for membership
                    self.stats.alg_ops += q_total
        else:  # MMLSH
            evictor = self._mmlsh_evictor
            for qi, lo, hi in split_queries(ranges, self.scheduler.query_splits):
                self.stats.alg_ops += 1  # segment dispatch overhead
                for bucket in range(lo, hi):
                    size = size_of(bucket)
                    if not size:
                        continue
                    evictor.current_bucket = (g, R, bucket)
                    self._access_one(g, R, bucket, size, evictor)
                    self.buffer.note_use((g, R, bucket))

    def _access_range(self, g, R, lo, hi, size_of, evict):
        for bucket in range(lo, hi):
            size = size_of(bucket)
            if size:
                self._access_one(g, R, bucket, size, evict)

    def _access_one(self, g, R, bucket, size, evict):
        hit, ms = access_bucket((g, R, bucket), size, self.buffer, evict)
        st = self.stats
        st.buckets_read += 1
        st.index_io_ms += ms
        if hit:
            st.buffer_hits += 1
        else:
            st.buffer_misses += 1
            st.bytes_read += size
            st.seeks += 1


def knn_objects(query: QueryObject, k: int, index: LshIndex, dataset: Dataset,
                gparams: GammaParams, scheduler: SchedulerConfig | None = None,
                buffer: BufferState | None = None,
                alg_op_cost_ms: float = DEFAULT_ALG_OP_COST_MS,
                plan: list | None = None) -> QueryResult:
    """Top-k nearest neighbor objects by collision counting (Algorithm core).

    Iterates levels R = 1, c, c^2, ...; within a level iterates projections,
    counting collisions for every query point and refreshing collision
    indexes; stops on T1 or T2 and returns the top-k candidates ranked by
    exact object distance (ties by ascending object id). If the level range
    is exhausted before k candidates appear, the partial result is flagged.

    The exact object distance is only ever computed for candidates, never for
    the full database. Supplying a scheduler plus a buffer turns on modeled
    IO accounting; the answer itself is scheduler-independent. A `plan` list
    collects every executed (projection, level, ranges) pass so costs can be
    replayed later under a different strategy or buffer size.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if query.coords.shape[1] != index.dimension:
        raise ValueError("query dimension does not match the index")

    q_count = len(query.points)
    min_size = int(dataset.object_sizes.min())
    bound = gamma_min_bound(q_count, min_size, gparams.delta, gparams.epsilon, gparams.beta)
    bound_warning = gparams.gamma < bound
    if bound_warning:
        warnings.warn(
            f"gamma={gparams.gamma:.4f} is below the guarantee bound {bound:.4f}; "
            "results carry no approximation guarantee", stacklevel=2)

    c, m, S = index.params.c, index.params.m, dataset.num_objects
    state = CollisionState(q_count, index, dataset)
    stats = QueryStats()
    coster = _PassCoster(scheduler, buffer, stats)

    q_base = np.floor((query.coords.astype(np.float64) @ index.a.T + index.b) / index.params.w).astype(np.int64)

    # reachable data range per (query point, projection): dyadic level-R
    # intervals [qb*R, qb*R + R) always stay on one side of bucket 0, so a
    # query point can never reach data buckets across zero from its own base
    q_nonneg = q_base >= 0
    reach_lo = np.where(q_nonneg, np.maximum(index.bucket_lo, 0), index.bucket_lo)
    reach_hi = np.where(q_nonneg, index.bucket_hi + 1, np.minimum(index.bucket_hi + 1, 0))

    gdist_cache: dict[int, float] = {}

    def exact_dist(rank: int) -> float:
        if rank not in gdist_cache:
            oid = int(dataset.object_ids[rank])
            gdist_cache[rank] = gamma_distance(query.coords, dataset.object_coords(oid), gparams.gamma)
        return gdist_cache[rank]

    def top_candidates(limit: int):
        mask = state.candidate_mask(gparams)
        ranked = sorted(
            ((exact_dist(r), int(dataset.object_ids[r])) for r in np.nonzero(mask)[0]),
            key=lambda t: (t[0], t[1]))
        return [(oid, d) for d, oid in ranked[:limit]]

    def finish(stop, levels, complete=True):
        stats.alg_ms = stats.alg_ops * alg_op_cost_ms
        top = top_candidates(k)
        return QueryResult(top_k=top, stop_condition=stop, levels_used=levels,
                           complete=complete and len(top) >= min(k, S),
                           stats=stats, bound_warning=bound_warning)

    R = 1
    levels_done = 0
    while True:
        # T2 at the start of each level: k candidates verified within c*R
        mask = state.candidate_mask(gparams)
        cand_ranks = np.nonzero(mask)[0]
        if cand_ranks.size >= k:
            dists = [exact_dist(int(r)) for r in cand_ranks]
            if check_t2(dists, k, c * R):
                return finish(T2, levels_done)

        # every (query point, projection) covered as far as it can ever reach?
        covered = (reach_lo >= reach_hi) | (
            (state.cov_lo <= reach_lo) & (state.cov_hi >= reach_hi))
        exhausted = bool(np.all(covered))
        if exhausted or levels_done >= _MAX_LEVELS:
            cl = int(np.count_nonzero(state.candidate_mask(gparams)))
            if cl >= k:
                return finish(T2, levels_done)
            return finish(EXHAUSTED, levels_done, complete=False)

        for g in range(m):
            qb = q_base[:, g] if R == 1 else np.floor_divide(q_base[:, g], R)
            ranges = [(qi, int(qb[qi]) * R, int(qb[qi]) * R + R) for qi in range(q_count)]
            if plan is not None:
                plan.append((g, R, list(ranges)))
            coster.run(index, g, R, ranges)
            for qi in range(q_count):
                inc = count_collisions(qi, int(q_base[qi, g]), g, R, index, dataset, state)
                stats.collision_increments += inc
                stats.alg_ops += inc
            # T1 barrier after each projection pass (strategy independent)
            cl_count = int(np.count_nonzero(state.candidate_mask(gparams)))
            if check_t1(cl_count, k, gparams.beta, S):
                return finish(T1, levels_done + 1)

        levels_done += 1
        R = c ** state.num_iter
        state.num_iter += 1
        state.level = R
