import numpy as np
import pytest

from geomadv.covers import random_sample_circles
from geomadv.data import make_planes, planes_spec
from geomadv.geometry import ConcentricSpheres, GeometryError, ManifoldSpec, NormKind
from geomadv.nearest import NnIndex, certify, classify, classify_batch, k_nearest

CIRCLES = ManifoldSpec(ConcentricSpheres(1.0, 3.0, 1), 3)


def circle_index(n=200, seed=0, **kw):
    ds = random_sample_circles(CIRCLES, n, seed=seed)
    return NnIndex(ds.points, ds.labels, **kw), ds


class TestClassify:
    def test_training_point_maps_to_itself(self):
        index, ds = circle_index()
        label, dist = classify(index, ds.points[17])
        assert label == ds.labels[17]
        assert dist == 0.0

    def test_tie_breaks_to_lower_index(self):
        pts = np.array([[0.0, 0.0], [2.0, 0.0]])
        index = NnIndex(pts, np.array([2, 1]))
        label, dist = classify(index, np.array([1.0, 0.0]))
        assert label == 2  # index 0 wins the tie
        assert dist == 1.0

    def test_empty_index_rejected(self):
        with pytest.raises(GeometryError):
            NnIndex(np.zeros((0, 2)), np.zeros(0, dtype=int))

    @pytest.mark.parametrize("norm", [NormKind.L2, NormKind.LINF])
    def test_batch_matches_single_bitwise(self, norm):
        index, ds = circle_index(norm=norm)
        rng = np.random.default_rng(1)
        queries = rng.uniform(-4, 4, size=(50, 3))
        labels, dists = classify_batch(index, queries)
        for q, l, d in zip(queries, labels, dists):
            sl, sd = classify(index, q)
            assert sl == l
            assert sd == d  # same kernel per query, bit-for-bit


class TestTreeEquivalence:
    def test_tree_requires_l2(self):
        with pytest.raises(GeometryError):
            NnIndex(np.zeros((2, 2)), np.array([1, 2]), norm=NormKind.LINF, acceleration="tree")

    def test_tree_matches_brute_force_random_queries(self):
        brute, ds = circle_index(n=400, seed=3)
        tree = NnIndex(ds.points, ds.labels, acceleration="tree")
        rng = np.random.default_rng(7)
        queries = rng.uniform(-4, 4, size=(10_000, 3))
        bl, bd = classify_batch(brute, queries)
        tl, td = classify_batch(tree, queries)
        assert np.array_equal(bl, tl)
        # distances agree to rounding (subset evaluation may differ by an ulp)
        assert np.allclose(bd, td, rtol=1e-12, atol=0)

    def test_tree_matches_on_constructed_ties(self):
        pts = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        labels = np.array([1, 2, 2])
        brute = NnIndex(pts, labels)
        tree = NnIndex(pts, labels, acceleration="tree")
        q = np.zeros(3)  # equidistant from all three
        assert classify(brute, q) == classify(tree, q)
        bi, bd = k_nearest(brute, q, 3)
        ti, td = k_nearest(tree, q, 3)
        assert np.array_equal(bi, ti)
        assert np.array_equal(bd, td)

    def test_k_nearest_tree_equivalence(self):
        brute, ds = circle_index(n=300, seed=5)
        tree = NnIndex(ds.points, ds.labels, acceleration="tree")
        rng = np.random.default_rng(11)
        for q in rng.uniform(-4, 4, size=(1000, 3)):
            bi, bd = k_nearest(brute, q, 5)
            ti, td = k_nearest(tree, q, 5)
            assert np.array_equal(bi, ti)
            assert np.array_equal(bd, td)


class TestKNearest:
    def test_full_sorted_list(self):
        index, ds = circle_index(n=20)
        q = np.array([0.5, 0.5, 0.0])
        idxs, dists = k_nearest(index, q, len(ds.points))
        assert len(idxs) == len(ds.points)
        assert np.all(np.diff(dists) >= 0)
        assert set(idxs.tolist()) == set(range(len(ds.points)))
        brute = np.linalg.norm(ds.points - q, axis=1)
        assert np.allclose(np.sort(brute), dists, rtol=1e-9)

    def test_k1_consistent_with_classify(self):
        index, ds = circle_index(n=50)
        q = np.array([2.5, -1.0, 0.3])
        idxs, dists = k_nearest(index, q, 1)
        label, dist = classify(index, q)
        assert index.labels[idxs[0]] == label
        assert dists[0] == dist

    def test_k_zero_rejected(self):
        index, _ = circle_index(n=10)
        with pytest.raises(GeometryError):
            k_nearest(index, np.zeros(3), 0)

    def test_matches_brute_force_sort(self):
        index, ds = circle_index(n=120, seed=9)
        rng = np.random.default_rng(13)
        for q in rng.uniform(-4, 4, size=(200, 3)):
            idxs, dists = k_nearest(index, q, 7)
            brute = np.linalg.norm(ds.points - q, axis=1)
            order = np.lexsort((np.arange(len(brute)), brute))[:7]
            assert np.array_equal(idxs, order)


class TestCertify:
    def test_planes_certificate_holds_and_confirms(self):
        train, _ = make_planes(1.0, ambient_dim=5)
        index = NnIndex(train.points, train.labels)
        cert = certify(index, train.spec, eps=0.4, n_probe=20_000, seed=0)
        assert cert.condition == "3.1"
        assert cert.rch == 1.0
        # the paper-count grid has worst gap ~1.0102 <= 1.2
        assert cert.delta_measured <= 1.02
        assert cert.holds
        assert cert.probe_errors == 0

    def test_eps_zero_holds_for_reasonable_cover(self):
        train, _ = make_planes(1.0, ambient_dim=4)
        index = NnIndex(train.points, train.labels)
        cert = certify(index, train.spec, eps=0.0, n_probe=5_000, seed=1)
        assert cert.holds

    def test_eps_at_reach_rejected(self):
        train, _ = make_planes(1.0, ambient_dim=4)
        index = NnIndex(train.points, train.labels)
        with pytest.raises(GeometryError):
            certify(index, train.spec, eps=1.0)

    def test_two_point_necessity_example(self):
        # one training point per class at mutual distance 2*rch: on a flat of
        # nonzero extent that single pair is far too sparse a cover for large
        # eps, and the certificate correctly fails
        spec = planes_spec(3, flat_dim=1, lo=0.0, hi=4.0)
        pts = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 2.0]])
        index = NnIndex(pts, np.array([1, 2]))
        cert = certify(index, spec, eps=0.9, n_probe=2_000, seed=0)
        assert not cert.holds
        assert cert.delta_measured > cert.bound()

    def test_degenerate_two_point_flat_is_perfectly_covered(self):
        # when the flat collapses to the two sample points the cover radius is
        # zero and even eps near the reach certifies
        spec = planes_spec(3, flat_dim=1, lo=0.0, hi=0.0)
        pts = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 2.0]])
        index = NnIndex(pts, np.array([1, 2]))
        cert = certify(index, spec, eps=0.9, n_probe=2_000, seed=0)
        assert cert.delta_measured == 0.0
        assert cert.holds
        assert cert.probe_errors == 0

    def test_noise_condition_theorem8(self):
        # tau-noisy training points still certify when 2(rch-eps)-tau >= delta
        train, _ = make_planes(0.5, ambient_dim=5)
        rng = np.random.default_rng(3)
        tau = 0.1
        offsets = rng.normal(size=train.points.shape)
        offsets[:, :2] = 0.0  # keep noise in the normal space
        offsets /= np.linalg.norm(offsets, axis=1, keepdims=True)
        radii = tau * rng.uniform(0, 1, size=len(offsets))[:, None] ** (1 / 3)
        noisy_pts = train.points + offsets * radii
        index = NnIndex(noisy_pts, train.labels)
        cert = certify(index, train.spec, eps=0.5, tau=tau, n_probe=20_000, seed=4)
        assert cert.condition == "8"
        # delta <= true gap + tau ~ 0.505 + 0.1 <= bound 2*(1-0.5) - 0.1 = 0.9
        assert cert.holds
        assert cert.probe_errors == 0

    def test_ball_learner_condition(self):
        train, _ = make_planes(0.25, ambient_dim=4)
        index = NnIndex(train.points, train.labels)
        cert = certify(index, train.spec, eps=0.5, n_probe=5_000, seed=5, learner="ball")
        assert cert.condition == "3.2"
        assert cert.bound() == 0.5
        assert cert.holds  # worst gap ~0.2525 <= 0.5


class TestCertifiedImpliesNoErrors:
    @pytest.mark.parametrize("norm", [NormKind.L2, NormKind.LINF])
    def test_grid_cover_zero_probe_errors(self, norm):
        train, _ = make_planes(0.5, ambient_dim=6)
        index = NnIndex(train.points, train.labels, norm=norm)
        cert = certify(index, train.spec, eps=0.5, norm=norm, n_probe=30_000, seed=6)
        if cert.holds:
            assert cert.probe_errors == 0
