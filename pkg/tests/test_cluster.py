import numpy as np
import pytest
from dataclasses import replace

from chromaplane.cluster import (ClusterConfig, PointSet, cluster_window,
                                 estimate_radius, kmeans_pp_init, lloyd)


def rand_points(rng, n):
    return np.column_stack([rng.uniform(0, 100, n),
                            rng.uniform(-60, 60, n),
                            rng.uniform(-60, 60, n)])


class TestKmeansPPInit:
    def test_identical_points_k1(self):
        ps = PointSet(np.tile([10.0, 2.0, -3.0], (20, 1)))
        init = kmeans_pp_init(ps, 1, seed=0)
        assert np.array_equal(init, [[10.0, 2.0, -3.0]])

    def test_two_distinct_points_k2(self):
        ps = PointSet(np.array([[0.0, 0, 0], [50.0, 0, 0]]))
        init = kmeans_pp_init(ps, 2, seed=4)
        assert sorted(init[:, 0].tolist()) == [0.0, 50.0]

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(1)
        ps = PointSet(rand_points(rng, 100))
        a = kmeans_pp_init(ps, 4, seed=17)
        b = kmeans_pp_init(ps, 4, seed=17)
        assert np.array_equal(a, b)

    def test_k_exceeding_distinct_points_rejected(self):
        ps = PointSet(np.array([[0.0, 0, 0], [0.0, 0, 0], [5.0, 0, 0]]))
        with pytest.raises(ValueError, match=r"k=3.*2 distinct"):
            kmeans_pp_init(ps, 3, seed=0)

    def test_centroids_are_input_points(self):
        rng = np.random.default_rng(2)
        pts = rand_points(rng, 30)
        init = kmeans_pp_init(PointSet(pts), 3, seed=5)
        for c in init:
            assert any(np.array_equal(c, p) for p in pts)


class TestLloyd:
    def two_group_points(self):
        return np.vstack([np.zeros((50, 3)), np.tile([100.0, 0, 0], (50, 1))])

    def test_two_group_exact_fixed_point(self):
        ps = PointSet(self.two_group_points())
        init = np.array([[10.0, 0, 0], [90.0, 0, 0]])
        res = lloyd(ps, init)
        got = sorted(res.centroids[:, 0].tolist())
        assert got == [0.0, 100.0]
        assert res.inertia == 0.0
        assert sorted(res.counts.tolist()) == [50, 50]

    def test_init_at_means_converges_immediately(self):
        ps = PointSet(self.two_group_points())
        init = np.array([[0.0, 0, 0], [100.0, 0, 0]])
        res = lloyd(ps, init)
        assert res.iterations == 1
        assert np.array_equal(sorted(res.centroids[:, 0]), [0.0, 100.0])

    def test_inertia_trace_non_increasing(self):
        rng = np.random.default_rng(3)
        for t in range(20):
            pts = rand_points(rng, int(rng.integers(10, 200)))
            ps = PointSet(pts)
            res = lloyd(ps, kmeans_pp_init(ps, 3, seed=t))
            trace = np.array(res.inertia_trace)
            # tiny slack absorbs float rounding in the mean updates
            assert (np.diff(trace) <= 1e-9 + 1e-12 * trace[:-1]).all()

    def test_fixed_point_reassignment_reproduces_counts(self):
        rng = np.random.default_rng(4)
        for t in range(20):
            pts = rand_points(rng, int(rng.integers(5, 100)))
            ps = PointSet(pts)
            k = int(rng.integers(1, 5))
            res = lloyd(ps, kmeans_pp_init(ps, k, seed=t))
            d2 = ((pts[:, None, :] - res.centroids[None]) ** 2).sum(axis=2)
            labels = d2.argmin(axis=1)
            assert np.array_equal(np.bincount(labels, minlength=k), res.counts)

    def test_counts_conserved_with_weights(self):
        rng = np.random.default_rng(5)
        pts = rand_points(rng, 40)
        w = rng.integers(1, 9, 40)
        ps = PointSet(pts, w)
        res = lloyd(ps, kmeans_pp_init(ps, 3, seed=9))
        assert res.counts.sum() == w.sum()

    def test_weighted_mean_update(self):
        # one cluster: centroid must be the weighted mean
        pts = np.array([[0.0, 0, 0], [10.0, 0, 0]])
        ps = PointSet(pts, np.array([1, 3]))
        res = lloyd(ps, np.array([[5.0, 0, 0]]))
        assert res.centroids[0, 0] == pytest.approx(7.5)

    def test_empty_cluster_reseeded(self):
        # both inits on one side; one cluster would go empty without repair
        pts = np.vstack([np.zeros((5, 3)), np.tile([80.0, 0, 0], (5, 1))])
        ps = PointSet(pts)
        init = np.array([[0.0, 0, 0], [0.5, 0, 0]])
        res = lloyd(ps, init, max_iter=50, tol=0.0)
        assert (res.counts > 0).all()
        assert res.inertia == 0.0

    def test_well_separated_recovery(self):
        rng = np.random.default_rng(6)
        means = np.array([[10.0, 0, 0], [60.0, 40, 0], [90.0, -40, 30]])
        pts = np.vstack([m + rng.normal(0, 0.4, (60, 3)) for m in means])
        ps = PointSet(pts)
        res = lloyd(ps, kmeans_pp_init(ps, 3, seed=2))
        for j in range(3):
            member = ((pts[:, None, :] - res.centroids[None]) ** 2).sum(2).argmin(1) == j
            emp = pts[member].mean(axis=0)
            assert np.abs(res.centroids[j] - emp).max() < 1e-6

    def test_preconditions(self):
        ps = PointSet(np.zeros((3, 3)))
        with pytest.raises(ValueError, match="max_iter"):
            lloyd(ps, np.zeros((1, 3)), max_iter=0)
        with pytest.raises(ValueError, match="at least one centroid"):
            lloyd(ps, np.zeros((0, 3)))


class TestEstimateRadius:
    def test_nearest_rank_with_outlier(self):
        d = [1, 1, 1, 1, 1, 1, 1, 1, 1, 100]
        assert estimate_radius(d, q=0.9, inflation=1.5, r_min=0.0) == 1.5

    def test_floor_applies(self):
        assert estimate_radius([0.0, 0.0, 0.0], q=0.5, inflation=1.0, r_min=2.0) == 2.0

    def test_single_element(self):
        assert estimate_radius([5.0], q=0.99, inflation=1.0, r_min=0.0) == 5.0

    def test_q_one_is_max(self):
        assert estimate_radius([1.0, 7.0, 3.0], q=1.0) == 7.0

    def test_errors(self):
        with pytest.raises(ValueError, match="at least one"):
            estimate_radius([], q=0.5)
        with pytest.raises(ValueError, match="quantile"):
            estimate_radius([1.0], q=0.0)
        with pytest.raises(ValueError, match="quantile"):
            estimate_radius([1.0], q=1.5)
        with pytest.raises(ValueError, match="non-negative"):
            estimate_radius([-1.0], q=0.5)


class TestClusterWindow:
    def test_two_color_patch(self):
        rng = np.random.default_rng(8)
        a = np.tile([80.0, 5, 5], (400, 1))
        b = np.tile([30.0, -20, 10], (200, 1))
        pts = np.vstack([a, b])
        rng.shuffle(pts)
        res = cluster_window(PointSet(pts), 2, seed=1)
        got = sorted(res.centroids[:, 0].tolist())
        assert got[0] == pytest.approx(30.0, abs=0.5)
        assert got[1] == pytest.approx(80.0, abs=0.5)
        assert sorted(res.counts.tolist()) == [200, 400]

    def test_k1_uniform_patch(self):
        pts = np.tile([42.0, 7.0, -7.0], (100, 1))
        res = cluster_window(PointSet(pts), 1, seed=3)
        assert np.array_equal(res.centroids, [[42.0, 7.0, -7.0]])
        assert res.inertia == pytest.approx(0.0, abs=1e-12)
        assert res.radii[0] == ClusterConfig().r_min

    def test_suggested_k_range_surfaced(self):
        assert ClusterConfig().suggested_k == (2, 5)

    def test_k_bounds(self):
        pts = np.zeros((10, 3))
        with pytest.raises(ValueError, match=r"k must lie in \[1, 8\]"):
            cluster_window(PointSet(pts), 9, seed=0)
        with pytest.raises(ValueError, match=r"k must lie in \[1, 8\]"):
            cluster_window(PointSet(pts), 0, seed=0)

    def test_too_few_distinct_colors(self):
        pts = np.vstack([np.zeros((10, 3)), np.tile([5.0, 0, 0], (10, 1))])
        with pytest.raises(ValueError, match="distinct colors.*larger window or reduce k"):
            cluster_window(PointSet(pts), 3, seed=0)

    def test_deterministic_bit_identical(self):
        rng = np.random.default_rng(10)
        pts = rand_points(rng, 500)
        a = cluster_window(PointSet(pts), 3, seed=21)
        b = cluster_window(PointSet(pts), 3, seed=21)
        assert np.array_equal(a.centroids, b.centroids)
        assert np.array_equal(a.counts, b.counts)
        assert np.array_equal(a.radii, b.radii)
        assert a.inertia == b.inertia and a.seed == b.seed == 21

    def test_subsampling_deterministic_and_capped(self):
        rng = np.random.default_rng(12)
        pts = rand_points(rng, 2000)
        cfg = replace(ClusterConfig(), subsample_cap=500)
        a = cluster_window(PointSet(pts), 2, seed=5, cfg=cfg)
        b = cluster_window(PointSet(pts), 2, seed=5, cfg=cfg)
        assert np.array_equal(a.centroids, b.centroids)
        assert a.counts.sum() == 500

    def test_radii_respect_floor(self):
        rng = np.random.default_rng(13)
        pts = rand_points(rng, 300)
        res = cluster_window(PointSet(pts), 4, seed=2)
        assert (res.radii >= ClusterConfig().r_min).all()

    def test_result_carries_seed(self):
        pts = np.vstack([np.zeros((5, 3)), np.ones((5, 3))])
        assert cluster_window(PointSet(pts), 2, seed=77).seed == 77


class TestPointSet:
    def test_shape_validation(self):
        with pytest.raises(ValueError, match=r"\(n, 3\)"):
            PointSet(np.zeros((4, 2)))

    def test_weight_validation(self):
        with pytest.raises(ValueError, match="positive"):
            PointSet(np.zeros((2, 3)), np.array([1, 0]))
        with pytest.raises(ValueError, match="match point count"):
            PointSet(np.zeros((2, 3)), np.array([1, 1, 1]))
