import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from shrinkpred.gaussian import (
    FullNormal,
    NotPositiveDefiniteError,
    ProblemConfig,
    SphericalNormal,
    as_full,
    kl_divergence,
    log_density,
    sample,
    substream,
)


def random_spd(rng, d, floor=0.2):
    a = rng.standard_normal((d, d))
    return a @ a.T / d + floor * np.eye(d)


class TestProblemConfig:
    def test_defaults_and_times(self):
        cfg = ProblemConfig(4, 2.0, 0.5)
        np.testing.assert_array_equal(cfg.mu, np.zeros(4))
        assert cfg.s == 0.5 and cfg.t == 2.0

    @pytest.mark.parametrize("args", [(0, 1, 1), (3, 0, 1), (3, 1, -1), (2.5, 1, 1)])
    def test_rejects_bad_values(self, args):
        with pytest.raises(ValueError):
            ProblemConfig(*args)

    def test_mu_length(self):
        with pytest.raises(ValueError):
            ProblemConfig(3, 1, 1, mu=np.zeros(2))

    def test_stein_requirement(self):
        ProblemConfig(3, 1, 1).require_stein()
        with pytest.raises(ValueError, match="d >= 3"):
            ProblemConfig(2, 1, 1).require_stein()


class TestLogDensity:
    def test_standard_mode(self):
        assert log_density(SphericalNormal(np.zeros(2), 1.0), np.zeros(2)) == pytest.approx(-math.log(2 * math.pi))

    def test_full_identity(self):
        val = log_density(FullNormal(np.zeros(2), np.eye(2)), np.array([1.0, 0.0]))
        assert val == pytest.approx(-math.log(2 * math.pi) - 0.5)

    def test_shifted_spherical(self):
        val = log_density(SphericalNormal(np.ones(2), 2.0), np.zeros(2))
        assert val == pytest.approx(-math.log(4 * math.pi) - 0.5)

    def test_spherical_and_full_agree(self):
        rng = np.random.default_rng(0)
        mean = rng.standard_normal(5)
        ys = rng.standard_normal((7, 5))
        np.testing.assert_allclose(
            SphericalNormal(mean, 1.7).log_density(ys), FullNormal(mean, 1.7 * np.eye(5)).log_density(ys), rtol=1e-13
        )

    def test_one_dimensional_slice_normalises(self):
        # conditional slice along a coordinate of a correlated normal
        cov = np.array([[2.0, 0.6], [0.6, 1.0]])
        dist = FullNormal(np.array([0.3, -0.2]), cov)
        grid = np.linspace(-15, 15, 20001)
        ys = np.column_stack([grid, np.full_like(grid, -0.2)])
        dens = np.exp(dist.log_density(ys))
        mass = trapezoid(dens, grid)
        # integrating out y1 leaves the y2 marginal density at y2 = -0.2
        marginal = SphericalNormal(np.array([-0.2]), 1.0).log_density(np.array([-0.2]))
        assert mass == pytest.approx(math.exp(marginal), rel=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            SphericalNormal(np.zeros(3), 1.0).log_density(np.zeros(2))
        with pytest.raises(ValueError):
            FullNormal(np.zeros(3), np.eye(3)).log_density(np.zeros(4))


class TestFullNormalValidation:
    def test_not_symmetric(self):
        with pytest.raises(ValueError):
            FullNormal(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefiniteError):
            FullNormal(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_near_singular(self):
        with pytest.raises(NotPositiveDefiniteError):
            FullNormal(np.zeros(2), np.diag([1.0, 1e-22]))

    def test_nonpositive_variance(self):
        with pytest.raises(ValueError):
            SphericalNormal(np.zeros(2), 0.0)


class TestSampling:
    def test_mean_clt(self):
        draws = sample(SphericalNormal(np.zeros(1), 1.0), substream(11), 100_000)
        assert draws.shape == (100_000, 1)
        assert abs(draws.mean()) < 4 / math.sqrt(1e5)

    def test_deterministic(self):
        dist = FullNormal(np.zeros(3), random_spd(np.random.default_rng(1), 3))
        np.testing.assert_array_equal(sample(dist, substream(5, 2), 10), sample(dist, substream(5, 2), 10))
        assert not np.array_equal(sample(dist, substream(5, 2), 10), sample(dist, substream(5, 3), 10))

    def test_full_variances(self):
        draws = sample(FullNormal(np.zeros(2), np.diag([1.0, 4.0])), substream(3), 100_000)
        np.testing.assert_allclose(draws.var(axis=0), [1.0, 4.0], rtol=0.05)

    def test_count_precondition(self):
        with pytest.raises(ValueError):
            sample(SphericalNormal(np.zeros(2), 1.0), substream(0), 0)

    def test_seed_range(self):
        with pytest.raises(ValueError):
            substream(2**64)
        with pytest.raises(ValueError):
            substream(-1)


class TestKL:
    def test_identity(self):
        p = FullNormal(np.ones(3), random_spd(np.random.default_rng(2), 3))
        assert kl_divergence(p, p) == 0.0

    def test_mean_shift(self):
        p = SphericalNormal(np.zeros(2), 1.0)
        q = SphericalNormal(np.array([1.0, 0.0]), 1.0)
        assert kl_divergence(p, q) == pytest.approx(0.5)

    def test_uniform_predictive_formula(self):
        d, u, v = 6, 1.3, 0.4
        rng = np.random.default_rng(3)
        mu, x = rng.standard_normal(d), rng.standard_normal(d)
        expected = 0.5 * (d * math.log((u + v) / v) + (d * v + float((mu - x) @ (mu - x))) / (u + v) - d)
        p, q = SphericalNormal(mu, v), SphericalNormal(x, u + v)
        assert kl_divergence(p, q) == pytest.approx(expected, rel=1e-13)
        assert kl_divergence(as_full(p), as_full(q)) == pytest.approx(expected, rel=1e-12)

    def test_spherical_vs_full_representation_is_zero(self):
        mean = np.array([0.3, -1.0, 2.0])
        assert kl_divergence(SphericalNormal(mean, 0.7), FullNormal(mean, 0.7 * np.eye(3))) == 0.0
        assert kl_divergence(FullNormal(mean, 0.7 * np.eye(3)), SphericalNormal(mean, 0.7)) == 0.0

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            d = int(rng.integers(1, 6))
            p = FullNormal(rng.standard_normal(d), random_spd(rng, d))
            q = FullNormal(rng.standard_normal(d), random_spd(rng, d))
            assert kl_divergence(p, q) > 0

    def test_small_variance_gap_is_accurate(self):
        # log1p path keeps relative accuracy when the variances nearly agree
        d, v, eps = 10, 1.0, 1e-9
        val = kl_divergence(SphericalNormal(np.zeros(d), v), SphericalNormal(np.zeros(d), v + eps))
        assert val == pytest.approx(0.25 * d * eps**2, rel=1e-6)

    @pytest.mark.parametrize("d", [3, 10])
    @pytest.mark.parametrize("kind", ["spherical", "full"])
    def test_monte_carlo_agreement(self, d, kind):
        rng = np.random.default_rng(100 + d)
        if kind == "spherical":
            p = SphericalNormal(rng.standard_normal(d), rng.uniform(0.5, 2))
            q = SphericalNormal(rng.standard_normal(d), rng.uniform(0.5, 2))
        else:
            p = FullNormal(rng.standard_normal(d), random_spd(rng, d, 0.5))
            q = FullNormal(rng.standard_normal(d), random_spd(rng, d, 0.5))
        ys = sample(p, substream(7, d), 100_000)
        lr = p.log_density(ys) - q.log_density(ys)
        se = lr.std(ddof=1) / math.sqrt(lr.size)
        assert abs(lr.mean() - kl_divergence(p, q)) < 3 * se

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence(SphericalNormal(np.zeros(2), 1.0), SphericalNormal(np.zeros(3), 1.0))

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(1, 8),
        st.floats(0.01, 100.0),
        st.floats(0.01, 100.0),
        st.floats(-10, 10),
    )
    def test_spherical_kl_property(self, d, a, b, shift):
        mean = np.zeros(d)
        other = mean.copy()
        other[0] = shift
        val = kl_divergence(SphericalNormal(mean, a), SphericalNormal(other, b))
        ref = 0.5 * (d * math.log(b / a) + d * a / b + shift * shift / b - d)
        assert val >= 0
        assert val == pytest.approx(max(ref, 0.0), rel=1e-9, abs=1e-12)
