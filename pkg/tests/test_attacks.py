import numpy as np
import pytest

from geomadv.attacks import (
    AttackConfig,
    bim,
    fgsm,
    gradient_free_projection,
    nn_walk_attack,
    pgd,
    project_into_ball,
    uniform_ball_starts,
)
from geomadv.covers import random_sample_circles
from geomadv.geometry import ConcentricSpheres, GeometryError, ManifoldSpec, NormKind
from geomadv.mlp import MlpModel, PgdConfig, TrainConfig, train_fresh
from geomadv.nearest import NnIndex

CIRCLES = ManifoldSpec(ConcentricSpheres(1.0, 3.0, 1), 2)


@pytest.fixture(scope="module")
def trained():
    ds = random_sample_circles(CIRCLES, 150, seed=0)
    model, _ = train_fresh([2, 40, 2], ds.points, ds.labels - 1, TrainConfig(epochs=80, seed=0))
    return model, ds.points, ds.labels - 1


class TestFgsm:
    def test_eps_zero_only_clean_mistakes_succeed(self, trained):
        model, x, y = trained
        out = fgsm(model, x, y, 0.0, NormKind.L2)
        assert np.array_equal(out.adversarial_points, x)
        assert np.array_equal(out.success_mask, model.predict(x) != y)

    def test_one_dim_logistic_hand_computed(self):
        # logits (w*x, 0): loss gradient in x has the sign of -w for label 0
        m = MlpModel(
            [1, 1, 2],
            [np.array([[1.0]]), np.array([[2.0, 0.0]])],
            [np.array([5.0]), np.array([0.0, 0.0])],
        )
        x = np.array([[1.0]])
        out = fgsm(m, x, np.array([0]), 0.25, NormKind.LINF)
        # increasing x raises logit 0, lowering the loss for label 0, so the
        # ascent direction is negative
        assert out.adversarial_points[0, 0] == 0.75

    @pytest.mark.parametrize("norm", [NormKind.L2, NormKind.LINF])
    def test_perturbation_norm_equals_eps(self, trained, norm):
        model, x, y = trained
        eps = 0.8
        out = fgsm(model, x, y, eps, norm)
        moved = ~out.zero_grad_mask
        assert np.allclose(out.perturbation_norms[moved], eps, rtol=1e-12, atol=0)
        assert np.all(out.perturbation_norms[~moved] == 0.0)

    def test_linf_coordinates_exact(self, trained):
        model, x, y = trained
        eps = 0.37
        out = fgsm(model, x, y, eps, NormKind.LINF)
        assert np.all(np.isin(out.perturbations, [-eps, 0.0, eps]))


class TestBim:
    def test_single_full_step_is_fgsm_bitwise(self, trained):
        model, x, y = trained
        for norm in (NormKind.L2, NormKind.LINF):
            a = fgsm(model, x, y, 0.6, norm)
            b = bim(model, x, y, 0.6, norm, step=0.6, iters=1)
            assert np.array_equal(a.adversarial_points, b.adversarial_points)
            assert np.array_equal(a.perturbation_norms, b.perturbation_norms)

    @pytest.mark.parametrize("norm", [NormKind.L2, NormKind.LINF])
    def test_ball_constraint_all_iterations(self, trained, norm):
        model, x, y = trained
        eps = 0.5
        out = bim(model, x, y, eps, norm, step=0.2, iters=12)
        deltas = out.adversarial_points - x
        norms = (
            np.linalg.norm(deltas, axis=1)
            if norm is NormKind.L2
            else np.max(np.abs(deltas), axis=1)
        )
        assert np.all(norms <= eps + 1e-9)

    def test_bim_at_least_as_strong_as_fgsm_on_average(self):
        # empirical dominance over seeds on circles codim 1
        rates_f, rates_b = [], []
        for seed in range(8):
            ds = random_sample_circles(CIRCLES, 100, seed=seed)
            model, _ = train_fresh(
                [2, 30, 2], ds.points, ds.labels - 1, TrainConfig(epochs=60, seed=seed)
            )
            te = random_sample_circles(CIRCLES, 100, seed=seed + 1000)
            rates_f.append(fgsm(model, te.points, te.labels - 1, 1.0, NormKind.L2).success_rate)
            rates_b.append(
                bim(model, te.points, te.labels - 1, 1.0, NormKind.L2).success_rate
            )
        assert np.mean(rates_b) >= np.mean(rates_f) - 0.02


class TestPgd:
    def test_no_random_start_is_bim(self, trained):
        model, x, y = trained
        cfg = PgdConfig(eps=0.5, step=0.1, iters=7, norm=NormKind.L2, random_start=False)
        a = pgd(model, x, y, cfg)
        b = bim(model, x, y, 0.5, NormKind.L2, step=0.1, iters=7)
        assert np.array_equal(a.adversarial_points, b.adversarial_points)

    @pytest.mark.parametrize("norm", [NormKind.L2, NormKind.LINF])
    def test_random_starts_inside_ball(self, norm):
        starts = uniform_ball_starts(10_000, 4, 0.7, norm, seed=5)
        norms = (
            np.linalg.norm(starts, axis=1)
            if norm is NormKind.L2
            else np.max(np.abs(starts), axis=1)
        )
        assert np.all(norms <= 0.7 + 1e-12)
        # starts should fill the ball, not hug the center
        assert np.percentile(norms, 90) > 0.7 * 0.5

    def test_deterministic_given_seed(self, trained):
        model, x, y = trained
        cfg = PgdConfig(eps=0.5, step=0.1, iters=5, norm=NormKind.L2, random_start=True)
        a = pgd(model, x, y, cfg, seed=3)
        b = pgd(model, x, y, cfg, seed=3)
        c = pgd(model, x, y, cfg, seed=4)
        assert np.array_equal(a.adversarial_points, b.adversarial_points)
        assert not np.array_equal(a.adversarial_points, c.adversarial_points)

    def test_per_row_streams(self, trained):
        # removing a row must not change the starts of the remaining rows
        model, x, y = trained
        full = uniform_ball_starts(5, 2, 0.5, NormKind.L2, seed=9)
        tail = uniform_ball_starts(4, 2, 0.5, NormKind.L2, seed=9)
        assert np.array_equal(full[:4], tail)


class TestClipping:
    def test_domain_clip_respected(self, trained):
        model, x, y = trained
        out = bim(model, x, y, 2.0, NormKind.LINF, step=0.5, iters=8, clip=(0.0, 1.0))
        assert out.adversarial_points.min() >= 0.0
        assert out.adversarial_points.max() <= 1.0


class TestGradientFreeProjection:
    def test_radius_zero_leaves_points(self, trained):
        model, x, y = trained
        out = gradient_free_projection(model.predict, x[:50], y[:50], 0.0, NormKind.L2)
        assert np.array_equal(out.adversarial_points, x[:50])
        assert np.all(out.perturbation_norms == 0.0)

    def test_well_separated_clusters_no_success(self):
        pts = np.vstack([np.zeros((5, 2)), np.full((5, 2), 10.0)])
        pts += np.random.default_rng(0).normal(scale=0.1, size=pts.shape)
        labels = np.array([0] * 5 + [1] * 5)
        index = NnIndex(pts, labels)

        def oracle(q):
            from geomadv.nearest import classify_batch

            return classify_batch(index, q)[0]

        out = gradient_free_projection(oracle, pts, labels, 1.0, NormKind.L2)
        assert not np.any(out.perturbation_norms > 0)

    @pytest.mark.parametrize("norm", [NormKind.L2, NormKind.LINF])
    def test_norms_exactly_zero_or_r(self, trained, norm):
        model, x, y = trained
        r = 0.9
        out = gradient_free_projection(model.predict, x[:120], y[:120], r, norm)
        assert set(np.unique(out.perturbation_norms)).issubset({0.0, r})
        # recomputation oracle: realized perturbations sit on the sphere
        moved = out.perturbation_norms == r
        deltas = out.perturbations[moved]
        realized = (
            np.linalg.norm(deltas, axis=1)
            if norm is NormKind.L2
            else np.max(np.abs(deltas), axis=1)
        )
        assert np.allclose(realized, r, rtol=1e-9)
        if norm is NormKind.LINF:
            assert np.all(realized == r)

    def test_finds_crossings_on_circles(self, trained):
        model, x, y = trained
        out = gradient_free_projection(model.predict, x, y, 1.2, NormKind.L2)
        assert out.success_mask.sum() > 0


class TestNnWalk:
    def make_index(self):
        ds = random_sample_circles(CIRCLES, 80, seed=2)
        return NnIndex(ds.points, ds.labels), ds

    def test_already_misclassified_returns_unchanged(self):
        index, ds = self.make_index()
        # a point deep in class 2 territory labeled as class 1
        point = np.array([3.0, 0.0])
        adv, success = nn_walk_attack(index, point, 1, eps=0.5, k=4)
        assert success
        assert np.array_equal(adv, point)

    def test_two_point_one_dim_walk(self):
        index = NnIndex(np.array([[0.0], [2.0]]), np.array([1, 2]))
        adv, success = nn_walk_attack(index, np.array([0.0]), 1, eps=1.5, step=0.25, k=2)
        assert success
        assert adv[0] > 1.0  # walked monotonically toward the other class point

    def test_ball_constraint(self):
        index, ds = self.make_index()
        rng = np.random.default_rng(0)
        for _ in range(50):
            i = rng.integers(len(ds.points))
            x = ds.points[i]
            adv, _ = nn_walk_attack(index, x, int(ds.labels[i]), eps=0.8, iters=20, k=6)
            assert np.linalg.norm(adv - x) <= 0.8 + 1e-9

    def test_k_too_large_rejected(self):
        index, _ = self.make_index()
        with pytest.raises(GeometryError):
            nn_walk_attack(index, np.zeros(2), 1, eps=0.5, k=1000)

    def test_walk_crosses_with_big_budget(self):
        index, ds = self.make_index()
        x = ds.points[0]
        adv, success = nn_walk_attack(
            index, x, int(ds.labels[0]), eps=1.5, step=0.1, iters=100, k=6
        )
        assert success


class TestAttackConfig:
    def test_validation(self):
        with pytest.raises(GeometryError):
            AttackConfig(method="unknown", eps=0.1)
        with pytest.raises(GeometryError):
            AttackConfig(method="bim", eps=0.1, iters=0)
        AttackConfig(method="fgsm", eps=0.0)


def test_project_into_ball_is_idempotent():
    rng = np.random.default_rng(0)
    deltas = rng.normal(size=(100, 3))
    for norm in (NormKind.L2, NormKind.LINF):
        once = project_into_ball(deltas, 0.5, norm)
        twice = project_into_ball(once, 0.5, norm)
        assert np.allclose(once, twice, atol=1e-15)


def test_success_monotone_in_eps_on_average():
    # success rate non-decreasing in eps within 2 points, 20-seed averages
    eps_grid = [0.2, 0.5, 0.8, 1.0]
    rates = np.zeros(len(eps_grid))
    for seed in range(20):
        ds = random_sample_circles(CIRCLES, 80, seed=seed)
        model, _ = train_fresh(
            [2, 30, 2], ds.points, ds.labels - 1, TrainConfig(epochs=50, seed=seed)
        )
        te = random_sample_circles(CIRCLES, 80, seed=seed + 500)
        for j, eps in enumerate(eps_grid):
            rates[j] += fgsm(model, te.points, te.labels - 1, eps, NormKind.L2).success_rate
    rates /= 20
    for a, b in zip(rates, rates[1:]):
        assert b >= a - 0.02
