import numpy as np
import pytest

import mmlsh
from mmlsh.buffering import MMLSH, NS1, NS2, BufferState, CostModel, SchedulerConfig
from mmlsh.engine import (CollisionState, EXHAUSTED, T1, T2, check_t1, check_t2,
                          count_collisions)
from mmlsh.errors import ParameterError


def run_all_collisions(query, index, dataset, levels):
    """Drive count_collisions over every projection for levels 1, c, c^2, ..."""
    state = CollisionState(len(query.points), index, dataset)
    q_base = np.floor(
        (query.coords.astype(np.float64) @ index.a.T + index.b) / index.params.w
    ).astype(np.int64)
    c = index.params.c
    for i in range(levels):
        R = c ** i
        for g in range(index.m):
            for qi in range(len(query.points)):
                count_collisions(qi, int(q_base[qi, g]), g, R, index, dataset, state)
    return state, q_base


def brute_counts(q_base, index, R):
    """Oracle: counts[qi, row] = #projections with matching level-R buckets."""
    n, m = index.n, index.m
    counts = np.zeros((q_base.shape[0], n), dtype=np.int64)
    for g in range(m):
        point_buckets = np.empty(n, dtype=np.int64)
        point_buckets[index.point_rows[g]] = index.buckets[g]
        for qi in range(q_base.shape[0]):
            counts[qi] += (np.floor_divide(point_buckets, R)
                           == np.floor_divide(q_base[qi, g], R))
    return counts


class TestCountCollisions:
    def test_level_one_matches_exact_bucket_membership(self, small_dataset, small_index):
        q = mmlsh.QueryObject.from_object(small_dataset, 0)
        state, q_base = run_all_collisions(q, small_index, small_dataset, levels=1)
        assert np.array_equal(state.counts, brute_counts(q_base, small_index, 1))

    def test_no_double_counting_across_levels(self, small_dataset, small_index):
        q = mmlsh.QueryObject.from_object(small_dataset, 3)
        for levels in (2, 3, 4):
            state, q_base = run_all_collisions(q, small_index, small_dataset, levels)
            R = small_index.params.c ** (levels - 1)
            assert np.array_equal(state.counts, brute_counts(q_base, small_index, R))

    def test_count_never_exceeds_m(self, small_dataset, small_index):
        q = mmlsh.QueryObject.from_object(small_dataset, 7)
        state, q_base = run_all_collisions(q, small_index, small_dataset, levels=16)
        assert state.counts.max() <= small_index.m
        # at huge R the count equals the number of projections whose level
        # bucket still matches, which is what the brute oracle computes
        assert np.array_equal(state.counts, brute_counts(q_base, small_index, 2 ** 15))

    def test_qualifying_pairs_match_counts(self, small_dataset, small_index):
        q = mmlsh.QueryObject.from_object(small_dataset, 5)
        state, _ = run_all_collisions(q, small_index, small_dataset, levels=3)
        l = small_index.params.l
        expected = np.zeros(small_dataset.num_objects, dtype=np.int64)
        for j in range(small_dataset.num_objects):
            rows = np.nonzero(small_dataset.point_object_index == j)[0]
            expected[j] = int(np.count_nonzero(state.counts[:, rows] >= l))
        assert np.array_equal(state.qualifying_pairs, expected)


class TestStoppingConditions:
    def test_t1_boundary(self):
        # k=1, beta*S = 0.025*1000 = 25: 26 candidates stop, 25 do not
        assert check_t1(26, k=1, beta=0.025, S=1000)
        assert not check_t1(25, k=1, beta=0.025, S=1000)

    def test_t2_counts_verified_candidates(self):
        assert check_t2([1.0, 2.0, 5.0], k=2, c_radius=2.0)
        assert not check_t2([1.0, 2.0, 5.0], k=3, c_radius=2.0)
        assert check_t2([2.0], k=1, c_radius=2.0)  # boundary inclusive


class TestGammaMinBound:
    def test_worked_example(self):
        got = mmlsh.gamma_min_bound(100, 100, delta=0.1, epsilon=0.2, beta=0.1)
        assert got == pytest.approx(0.2448, abs=5e-4)

    def test_shrinks_with_more_pairs(self):
        values = [mmlsh.gamma_min_bound(q, 100, 0.1, 0.2, 0.1) for q in (10, 50, 100, 500)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_epsilon_must_exceed_delta(self):
        with pytest.raises(ParameterError, match="epsilon"):
            mmlsh.gamma_min_bound(100, 100, delta=0.2, epsilon=0.2, beta=0.1)

    def test_bound_warning_flag(self, small_dataset, small_index):
        q = mmlsh.QueryObject.from_object(small_dataset, 0)
        gp = mmlsh.GammaParams(gamma=0.05, delta=0.25, beta=0.5, epsilon=0.5)
        with pytest.warns(UserWarning, match="guarantee bound"):
            res = mmlsh.knn_objects(q, 1, small_index, small_dataset, gp)
        assert res.bound_warning


class TestKnnObjects:
    GP = mmlsh.GammaParams(gamma=0.5, delta=0.25, beta=0.5, epsilon=0.5)

    def test_self_query_is_own_nearest(self, small_dataset, small_index):
        for oid in (0, 6, 13):
            q = mmlsh.QueryObject.from_object(small_dataset, oid)
            res = mmlsh.knn_objects(q, 1, small_index, small_dataset, self.GP)
            assert res.object_ids == [oid]
            assert res.complete

    def test_matches_exact_ranking(self, small_dataset, small_index):
        q = mmlsh.QueryObject.from_object(small_dataset, 2)
        res = mmlsh.knn_objects(q, 3, small_index, small_dataset, self.GP)
        truth = mmlsh.exact_knn_objects(q, small_dataset, 3, self.GP.gamma)
        ratio, flagged = mmlsh.object_ratio(
            [d for _, d in res.top_k], [d for _, d in truth])
        assert not flagged
        assert ratio <= small_index.params.c

    def test_stop_condition_is_reported(self, small_dataset, small_index):
        q = mmlsh.QueryObject.from_object(small_dataset, 2)
        res = mmlsh.knn_objects(q, 3, small_index, small_dataset, self.GP)
        assert res.stop_condition in (T1, T2)
        assert res.levels_used >= 0

    def test_partial_result_flagged_when_k_exceeds_objects(self):
        ds = mmlsh.synth_dataset(S=3, points_per_object=4, d=4, cluster_spread=0.1, seed=2)
        params = mmlsh.derive_params(0.3, 0.5, 2, 2.184)
        idx = mmlsh.build_index(ds, params, seed=2)
        q = mmlsh.QueryObject.from_object(ds, 0)
        res = mmlsh.knn_objects(q, 5, idx, ds, self.GP)
        assert res.stop_condition == EXHAUSTED
        assert not res.complete
        assert len(res.top_k) < 5

    def test_deterministic(self, small_dataset, small_index):
        q = mmlsh.QueryObject.from_object(small_dataset, 9)
        a = mmlsh.knn_objects(q, 3, small_index, small_dataset, self.GP)
        b = mmlsh.knn_objects(q, 3, small_index, small_dataset, self.GP)
        assert a.top_k == b.top_k
        assert a.stats.collision_increments == b.stats.collision_increments

    def test_invalid_k(self, small_dataset, small_index):
        q = mmlsh.QueryObject.from_object(small_dataset, 0)
        with pytest.raises(ParameterError):
            mmlsh.knn_objects(q, 0, small_index, small_dataset, self.GP)

    def test_dimension_mismatch(self, small_dataset, small_index):
        pts = [mmlsh.FeatureVector(point_id=i, object_id=0,
                                   coords=np.zeros(3, dtype=np.float32))
               for i in range(2)]
        q = mmlsh.QueryObject(object_id=0, points=pts)
        with pytest.raises(ValueError, match="dimension"):
            mmlsh.knn_objects(q, 1, small_index, small_dataset, self.GP)


class TestStrategyNeutrality:
    def test_answer_independent_of_scheduling(self, small_dataset, small_index):
        gp = mmlsh.GammaParams(gamma=0.5, delta=0.25, beta=0.5, epsilon=0.5)
        q = mmlsh.QueryObject.from_object(small_dataset, 4)
        baseline = mmlsh.knn_objects(q, 3, small_index, small_dataset, gp)
        for strategy in (NS1, NS2, MMLSH):
            buf = BufferState(capacity_bytes=10_000, cost=CostModel())
            sched = SchedulerConfig(strategy=strategy)
            res = mmlsh.knn_objects(q, 3, small_index, small_dataset, gp,
                                    scheduler=sched, buffer=buf)
            assert res.top_k == baseline.top_k
            assert res.stop_condition == baseline.stop_condition
            assert res.levels_used == baseline.levels_used
            assert res.stats.collision_increments == baseline.stats.collision_increments

    def test_io_stats_only_with_scheduler(self, small_dataset, small_index):
        gp = mmlsh.GammaParams(gamma=0.5, delta=0.25, beta=0.5, epsilon=0.5)
        q = mmlsh.QueryObject.from_object(small_dataset, 4)
        plain = mmlsh.knn_objects(q, 3, small_index, small_dataset, gp)
        assert plain.stats.index_io_ms == 0.0
        buf = BufferState(capacity_bytes=10_000, cost=CostModel())
        costed = mmlsh.knn_objects(q, 3, small_index, small_dataset, gp,
                                   scheduler=SchedulerConfig(strategy=NS1), buffer=buf)
        assert costed.stats.index_io_ms > 0.0
        assert costed.stats.buckets_read == costed.stats.buffer_hits + costed.stats.buffer_misses
