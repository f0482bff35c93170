import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from shrinkpred.estimators import estimate_stein, estimate_uniform, stein_shrinkage_factors
from shrinkpred.gaussian import FullNormal, ProblemConfig, SphericalNormal, kl_divergence, substream
from shrinkpred.predictive import (
    METHOD_NAMES,
    SteinMixture,
    TauPosterior,
    check_stein_ratio,
    make_method,
    predictive_eb,
    predictive_plugin,
    predictive_stein_bayes,
    predictive_uniform,
    stein_log_ratio,
    stein_posterior_moments,
)


def same_gaussian(p, q, tol=1e-12):
    return kl_divergence(p, q) <= tol and kl_divergence(q, p) <= tol


class TestUniformPredictive:
    def test_origin(self):
        dens = predictive_uniform(np.zeros(4), ProblemConfig(4, 1.0, 1.0))
        np.testing.assert_array_equal(dens.mean, np.zeros(4))
        assert dens.variance == 2.0

    def test_matches_uniform_plugins(self):
        cfg = ProblemConfig(5, 0.8, 0.3)
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = rng.standard_normal(5)
            e1, e2 = estimate_uniform(x, cfg)
            ref = predictive_uniform(x, cfg)
            assert same_gaussian(ref, predictive_plugin(e1))
            assert same_gaussian(ref, predictive_plugin(e2))

    def test_one_dimension(self):
        dens = predictive_uniform(np.array([0.5]), ProblemConfig(1, 1.0, 0.5))
        assert dens.log_density(np.array([0.5])) == pytest.approx(-0.5 * math.log(2 * math.pi * 1.5))


class TestPlugin:
    def test_stein_origin(self):
        cfg = ProblemConfig(10, 1.0, 0.1)
        e1, e2 = estimate_stein(np.zeros(10), cfg)
        ref = SphericalNormal(np.zeros(10), 0.3)
        assert same_gaussian(predictive_plugin(e1), ref)
        assert same_gaussian(predictive_plugin(e2), ref)

    def test_e2_is_full(self):
        cfg = ProblemConfig(4, 1.0, 0.1)
        _, e2 = estimate_stein(np.array([1.0, 2.0, 0.0, -1.0]), cfg)
        dens = predictive_plugin(e2)
        assert isinstance(dens, FullNormal)
        np.testing.assert_allclose(dens.covariance, e2.sigma_hat)

    def test_rejects_other_objects(self):
        with pytest.raises(TypeError):
            predictive_plugin((np.zeros(3), 1.0))


class TestEmpiricalBayes:
    def test_full_shrinkage(self):
        cfg = ProblemConfig(10, 1.0, 0.1)
        dens = predictive_eb(np.full(10, 0.1), cfg)
        np.testing.assert_array_equal(dens.mean, np.zeros(10))
        assert dens.variance == pytest.approx(0.1)

    def test_tau_equal_u(self):
        cfg = ProblemConfig(3, 1.0, 0.2)
        x = np.array([math.sqrt(14.0), 0.0, 0.0])
        dens = predictive_eb(x, cfg, c=7.0)
        np.testing.assert_allclose(dens.mean, x / 2)
        assert dens.variance == pytest.approx(0.2 + 0.5)

    def test_flat_limit(self):
        cfg = ProblemConfig(10, 1.0, 0.1)
        x = np.full(10, 1e5)
        assert kl_divergence(predictive_uniform(x, cfg), predictive_eb(x, cfg)) < 1e-8

    def test_default_needs_positive_constant(self):
        with pytest.raises(ValueError):
            predictive_eb(np.ones(3), ProblemConfig(3, 1.0, 1.0))


class TestTauPosterior:
    @pytest.mark.parametrize("d", [3, 4, 10, 100])
    def test_self_normalised(self, d):
        for r in (0.0, 0.5, 4.0, 40.0):
            post = TauPosterior.build(r * r, 1.0, d)
            assert post.masses.sum() == pytest.approx(1.0, abs=1e-10)
            assert np.all(np.diff(post.rule.nodes) > 0)

    @pytest.mark.parametrize("d", [3, 5, 10])
    def test_mean_rho_is_f1(self, d):
        for r in np.linspace(0, 20, 11):
            assert TauPosterior.build(r * r, 2.0, d).mean_rho == pytest.approx(
                stein_shrinkage_factors(r, 2.0, d)[0], abs=1e-8
            )

    def test_posterior_shape(self):
        # weights follow (1 - rho)^(d/2 - 2) exp(-A (1 - rho)) up to a constant
        d, r2, u = 7, 9.0, 1.0
        post = TauPosterior.build(r2, u, d)
        rho = post.rule.nodes
        ref = (d / 2 - 2) * np.log1p(-rho) - 0.5 * r2 / u * (1 - rho)
        diff = post.log_weights - ref
        assert np.ptp(diff) < 1e-9

    def test_rejects_small_dimension(self):
        with pytest.raises(ValueError):
            TauPosterior.build(1.0, 1.0, 2)


class TestSteinBayes:
    def test_mixture_moments_match_estimators(self):
        rng = np.random.default_rng(3)
        for d in (3, 5, 10):
            cfg = ProblemConfig(d, 1.0, 0.1)
            for _ in range(10):
                x = rng.standard_normal(d) * rng.uniform(0.1, 4)
                dens = predictive_stein_bayes(x, cfg)
                e1, e2 = estimate_stein(x, cfg)
                np.testing.assert_allclose(dens.mean, e1.mu_hat, atol=1e-8)
                np.testing.assert_allclose(dens.covariance, e2.sigma_hat, atol=1e-7)

    def test_symmetry_at_origin(self):
        cfg = ProblemConfig(5, 1.0, 0.5)
        dens = predictive_stein_bayes(np.zeros(5), cfg)
        rng = np.random.default_rng(1)
        y = rng.standard_normal(5)
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        assert dens.log_density(y) == pytest.approx(dens.log_density(q @ y), abs=1e-12)
        h = 1e-5
        grad = [(dens.log_density(h * e) - dens.log_density(-h * e)) / (2 * h) for e in np.eye(5)]
        np.testing.assert_allclose(grad, 0.0, atol=1e-8)

    def test_normalisation_importance_sampling(self):
        d = 3
        cfg = ProblemConfig(d, 1.0, 0.5)
        x = np.array([0.8, -0.4, 1.1])
        dens = predictive_stein_bayes(x, cfg)
        proposal = SphericalNormal(x, 2.0 * (cfg.u + cfg.v))
        rng = substream(2024)
        n = 1_000_000
        ys = x + math.sqrt(proposal.variance) * rng.standard_normal((n, d))
        w = np.exp(dens.log_density_ratio(ys) - proposal.log_density(ys))
        se = w.std(ddof=1) / math.sqrt(n)
        assert abs(w.mean() - 1.0) < 3 * se
        assert se < 2e-3

    def test_quadrature_and_ratio_paths_agree(self):
        cfg = ProblemConfig(6, 0.7, 0.3)
        x = np.array([1.0, 0.0, 2.0, -1.0, 0.5, 0.0])
        ys = np.random.default_rng(4).standard_normal((20, 6)) * 2
        a = predictive_stein_bayes(x, cfg).log_density(ys)
        b = SteinMixture(x, 0.7, 0.3, method="ratio").log_density(ys)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)

    @pytest.mark.parametrize("d", [3, 5, 10])
    def test_ratio_identity(self, d):
        rng = np.random.default_rng(50 + d)
        u, v = 1.0, 0.4
        cfg = ProblemConfig(d, u, v)
        worst = 0.0
        for _ in range(100):
            x = rng.standard_normal(d) * rng.uniform(0.0, 3.0)
            y = x + rng.standard_normal(d) * math.sqrt(u + v) * rng.uniform(0.2, 2.0)
            quad = SteinMixture(x, u, v).log_density_quadrature(y)
            closed = predictive_uniform(x, cfg).log_density(y) + stein_log_ratio(y, x, cfg)
            worst = max(worst, abs(math.expm1(closed - quad)))
        assert worst < 1e-6

    def test_ratio_is_below_uniform_far_away(self):
        # heavier shrinkage toward the origin means less mass far from it
        cfg = ProblemConfig(5, 1.0, 0.5)
        x = np.full(5, 0.2)
        assert stein_log_ratio(x + 50.0, x, cfg) < 0

    def test_posterior_bayes_risk_optimality(self):
        d = 4
        cfg = ProblemConfig(d, 1.0, 0.3)
        x = np.array([1.5, -0.5, 0.7, 2.0])
        m1, m2 = stein_posterior_moments(x, cfg)

        def criterion(m, s):
            # E_post KL(N(mu, vI) || N(m, S)) in closed form from the moments
            sinv = np.linalg.inv(s)
            quad = np.trace(sinv @ (m2 - np.outer(m1, m) - np.outer(m, m1) + np.outer(m, m)))
            return 0.5 * (np.linalg.slogdet(s)[1] - d * math.log(cfg.v) + cfg.v * np.trace(sinv) + quad - d)

        e1, e2 = estimate_stein(x, cfg)
        best = criterion(e2.mu_hat, e2.sigma_hat)
        rng = np.random.default_rng(7)
        for _ in range(20):
            eps = 0.05 * rng.standard_normal(d)
            e = 0.05 * rng.standard_normal((d, d))
            e = 0.5 * (e + e.T)
            assert criterion(e2.mu_hat + eps, e2.sigma_hat + e) > best
        # within the spherical family the E1 plug-in is optimal
        best1 = criterion(e1.mu_hat, e1.xi_hat * np.eye(d))
        for _ in range(20):
            eps = 0.05 * rng.standard_normal(d)
            delta = 0.05 * rng.standard_normal()
            assert criterion(e1.mu_hat + eps, (e1.xi_hat + delta) * np.eye(d)) > best1

    def test_tail_is_quadratic(self):
        cfg = ProblemConfig(5, 1.0, 0.5)
        x = np.array([1.0, 0.5, -0.3, 0.0, 2.0])
        e = np.ones(5) / math.sqrt(5)
        ts = np.array([10.0, 20.0, 40.0, 80.0])
        dens_list = [
            predictive_stein_bayes(x, cfg),
            predictive_uniform(x, cfg),
            predictive_eb(x, cfg),
            predictive_plugin(estimate_stein(x, cfg)[1]),
        ]
        for dens in dens_list:
            vals = np.array([dens.log_density(x + t * e) for t in ts])
            assert np.all(np.isfinite(vals))
            assert np.all(np.diff(vals) < 0)
            # doubling the distance roughly quadruples the log-density drop
            ratios = vals[1:] / vals[:-1]
            assert np.all((ratios > 3.0) & (ratios < 4.5))

    def test_certified_construction(self):
        cfg = ProblemConfig(10, 1.0, 0.1)
        dens = predictive_stein_bayes(np.full(10, 2.0), cfg)
        assert dens.order >= 40

    def test_dimension_checks(self):
        with pytest.raises(ValueError, match="d >= 3"):
            predictive_stein_bayes(np.ones(2), ProblemConfig(2, 1.0, 1.0))
        with pytest.raises(ValueError):
            SteinMixture(np.ones(3), 1.0, 1.0, method="other")
        with pytest.raises(ValueError):
            SteinMixture(np.ones(3), 1.0, 1.0).log_density(np.ones(4))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 12), st.floats(0.0, 30.0), st.floats(-30.0, 30.0), st.floats(0.05, 5.0), st.floats(0.05, 5.0))
    # the certified constructor must hold the closed form to 1e-8 everywhere
    def test_ratio_property(self, d, xr, yr, u, v):
        x = np.zeros(d)
        x[0] = xr
        y = np.zeros(d)
        y[0], y[1] = yr, 0.5
        cfg = ProblemConfig(d, u, v)
        dens = predictive_stein_bayes(x, cfg)
        quad = dens.log_density_quadrature(y)
        closed = dens.log_density_ratio(y)
        assert abs(quad - closed) < 1e-8


class TestMethods:
    def test_startup_check(self):
        assert check_stein_ratio(ProblemConfig(10, 1.0, 0.1)) < 1e-9

    def test_names(self):
        cfg = ProblemConfig(10, 1.0, 0.1)
        x = np.linspace(-1, 1, 10)
        y = np.zeros(10)
        for name in METHOD_NAMES:
            dens = make_method(name, cfg=cfg)(x, cfg)
            assert math.isfinite(float(dens.log_density(y)))
        with pytest.raises(ValueError):
            make_method("js")

    def test_mixture_log_density_via_nodes(self):
        # direct logsumexp over the rho rule, independent of the class method
        cfg = ProblemConfig(3, 1.0, 0.2)
        x = np.array([0.4, 0.1, -0.2])
        y = np.array([0.0, 1.0, 0.0])
        post = TauPosterior.build(float(x @ x), 1.0, 3)
        rho = post.rule.nodes
        var = cfg.v + cfg.u * rho
        comp = -1.5 * np.log(2 * math.pi * var) - 0.5 * np.sum((y[None] - rho[:, None] * x) ** 2, axis=1) / var
        ref = logsumexp(comp, b=post.masses)
        assert SteinMixture(x, 1.0, 0.2).log_density(y) == pytest.approx(ref, abs=1e-12)
