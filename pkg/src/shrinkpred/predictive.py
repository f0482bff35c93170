"""Predictive densities for ``y`` given ``x``.

Gaussian predictives (uniform prior, extended plug-ins, empirical Bayes) are
plain :class:`~shrinkpred.gaussian.SphericalNormal` / ``FullNormal`` objects.
The Bayesian predictive density under Stein's prior is a scale mixture of
normals, :class:`SteinMixture`, evaluated by quadrature over the mixing
variable.

Stein's prior is an improper mixture of ``N(0, tau I)`` over ``dtau``.  After
``rho = tau / (u + tau)`` the posterior of ``rho`` lives on (0, 1) with
density proportional to ``(1 - rho)^(d/2 - 2) exp(-||x||^2 (1 - rho) / 2u)``.
Integration is carried out in ``q = sqrt(1 - rho)``, where the integrand
becomes ``q^(d-3) exp(-||x||^2 q^2 / 2u)``: smooth for every ``d >= 3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np
from scipy.special import logsumexp

from .estimators import (
    ExtendedEstimateE1,
    ExtendedEstimateE2,
    default_eb_c,
    eb_tau_hat,
    estimate_stein,
)
from .gaussian import FullNormal, ProblemConfig, SphericalNormal
from .special import QuadratureError, QuadratureRule, build_quadrature, log_phi

__all__ = [
    "TauPosterior",
    "SteinMixture",
    "PredictiveDensity",
    "predictive_uniform",
    "predictive_plugin",
    "predictive_eb",
    "predictive_stein_bayes",
    "stein_log_ratio",
    "check_stein_ratio",
    "stein_posterior_moments",
    "make_method",
    "METHOD_NAMES",
]

_LOG_2PI = math.log(2.0 * math.pi)
_RATIO_RTOL = 1e-6


@dataclass(frozen=True)
class TauPosterior:
    """Discretised posterior of ``rho = tau/(u+tau)`` under Stein's prior.

    ``rule`` lives on ``rho``; ``log_weights[i]`` is the log posterior
    density at ``rule.nodes[i]`` so that ``sum(rule.weights * exp(log_weights))``
    is one.  ``one_minus_rho`` keeps ``1 - rho`` at full precision near
    ``rho = 1``.
    """

    x_norm_sq: float
    u: float
    d: int
    rule: QuadratureRule
    log_weights: np.ndarray
    one_minus_rho: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, x_norm_sq: float, u: float, d: int, order: int = 20, tol: float = 1e-13) -> "TauPosterior":
        if int(d) != d or d < 3:
            raise ValueError(f"Stein's prior needs dimension d >= 3, got d={d}")
        if x_norm_sq < 0 or not u > 0:
            raise ValueError("need x_norm_sq >= 0 and u > 0")
        A = 0.5 * x_norm_sq / u
        k = d - 3

        # mode and spread of q^k exp(-A q^2) on (0, 1)
        if k == 0:
            q_mode = 0.0
        elif A == 0.0:
            q_mode = 1.0
        else:
            q_mode = min(1.0, math.sqrt(k / (2.0 * A)))
        curv = 2.0 * A + (k / q_mode**2 if q_mode > 0 else 0.0)
        width = 1.0 / math.sqrt(curv) if curv > 0 else 1.0

        def log_g(q):
            with np.errstate(divide="ignore"):
                out = -A * q * q
                if k:
                    out = out + k * np.log(q)
            return out

        log_gmax = float(log_g(np.array([q_mode]))[0]) if q_mode > 0 else 0.0

        def integrand(q):
            g = np.exp(log_g(q) - log_gmax)
            w = q * q
            return np.stack([g, g * w, g * w * w], axis=-1)

        # breakpoints within a quarter width of an end would only make slivers,
        # and slivers near q = 0 collapse when mapped back to rho = 1 - q^2
        breaks = [
            b for b in (q_mode + j * width for j in (-8, -4, -2, -1, 0, 1, 2, 4, 8))
            if 0.25 * width < b < 1.0 - 0.25 * width
        ]
        rule_q = build_quadrature(order=order, tol=tol, integrand=integrand, breakpoints=breaks)

        q = rule_q.nodes[::-1]
        wq = rule_q.weights[::-1]
        one_minus = q * q
        rho_rule = QuadratureRule(1.0 - one_minus, 2.0 * q * wq)
        # log density in rho: (d-4) log q - A q^2, normalised below
        log_dens = log_g(q) - log_gmax - np.log(q)
        log_z = logsumexp(log_dens, b=rho_rule.weights)
        return cls(float(x_norm_sq), float(u), int(d), rho_rule, log_dens - log_z, one_minus)

    @property
    def log_masses(self) -> np.ndarray:
        return np.log(self.rule.weights) + self.log_weights

    @cached_property
    def masses(self) -> np.ndarray:
        return np.exp(self.log_masses)

    def expect(self, f: Callable[[np.ndarray], np.ndarray]):
        """Posterior expectation of ``f(rho)`` by the discrete rule."""
        return np.tensordot(self.masses, np.asarray(f(self.rule.nodes)), axes=(0, 0))

    @cached_property
    def mean_one_minus_rho(self) -> float:
        return float(self.masses @ self.one_minus_rho)

    @property
    def mean_rho(self) -> float:
        return 1.0 - self.mean_one_minus_rho

    @cached_property
    def var_rho(self) -> float:
        c = self.one_minus_rho - self.mean_one_minus_rho
        return float(self.masses @ (c * c))


def stein_posterior_moments(x, cfg: ProblemConfig, post: TauPosterior | None = None):
    """``(E[mu | x], E[mu mu' | x])`` under Stein's prior by tau quadrature."""
    x = np.asarray(x, dtype=float)
    if post is None:
        post = TauPosterior.build(float(x @ x), cfg.u, cfg.d)
    m1 = post.mean_rho * x
    second_rho = post.var_rho + post.mean_rho**2
    m2 = cfg.u * post.mean_rho * np.eye(cfg.d) + second_rho * np.outer(x, x)
    return m1, m2


def stein_log_ratio(y, x, cfg: ProblemConfig) -> np.ndarray | float:
    """``log p_S(y|x) - log p_U(y|x)`` in closed form.

    With ``z = (v x + u y)/(u + v)`` and ``w = u v/(u + v)`` the ratio is
    ``(w/u)^(1 - d/2) phi_d(||z||/sqrt(w)) / phi_d(||x||/sqrt(u))``.
    """
    d, u, v = cfg.d, cfg.u, cfg.v
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = u * v / (u + v)
    z = (v * x + u * y) / (u + v)
    a_z = np.linalg.norm(z, axis=-1) / math.sqrt(w)
    a_x = math.sqrt(float(x @ x) / u)
    out = (1.0 - d / 2.0) * math.log(w / u) + np.asarray(log_phi(d, a_z)) - log_phi(d, a_x)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SteinMixture:
    """Bayesian predictive density under Stein's prior.

    ``p(y|x) = int N(y; rho x, (v + u rho) I) dPi(rho | x)``.

    ``method="quadrature"`` evaluates the mixture over the tau posterior in
    log space; ``method="ratio"`` uses the closed-form ratio to the uniform
    predictive, which is much cheaper inside Monte Carlo loops.
    """

    x: np.ndarray
    u: float
    v: float
    method: str = "quadrature"
    order: int = 20
    tol: float = 1e-13

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        if self.x.size < 3:
            raise ValueError(f"Stein's prior needs dimension d >= 3, got d={self.x.size}")
        if self.method not in ("quadrature", "ratio"):
            raise ValueError(f"unknown evaluation method {self.method!r}")

    @property
    def dim(self) -> int:
        return self.x.size

    @property
    def cfg(self) -> ProblemConfig:
        return ProblemConfig(self.dim, self.u, self.v)

    @cached_property
    def posterior(self) -> TauPosterior:
        return TauPosterior.build(float(self.x @ self.x), self.u, self.dim, order=self.order, tol=self.tol)

    @property
    def mean(self) -> np.ndarray:
        return self.posterior.mean_rho * self.x

    @property
    def covariance(self) -> np.ndarray:
        post = self.posterior
        return (self.v + self.u * post.mean_rho) * np.eye(self.dim) + post.var_rho * np.outer(self.x, self.x)

    def log_density_quadrature(self, y) -> np.ndarray | float:
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.dim:
            raise ValueError(f"y has trailing dimension {y.shape[-1]}, expected {self.dim}")
        post = self.posterior
        rho = post.rule.nodes
        var = self.v + self.u * rho
        ys = y.reshape(-1, self.dim)
        yy = np.sum(ys * ys, axis=1)[:, None]
        yx = (ys @ self.x)[:, None]
        xx = float(self.x @ self.x)
        r2 = yy - 2.0 * rho * yx + rho * rho * xx
        # guard the expansion against tiny negative rounding
        r2 = np.maximum(r2, 0.0)
        comp = -0.5 * (self.dim * (_LOG_2PI + np.log(var)) + r2 / var)
        out = logsumexp(comp + post.log_masses, axis=1).reshape(y.shape[:-1])
        return float(out) if out.ndim == 0 else out

    def log_density_ratio(self, y) -> np.ndarray | float:
        base = SphericalNormal(self.x, self.u + self.v).log_density(y)
        return base + stein_log_ratio(y, self.x, self.cfg)

    def log_ratio_to_uniform(self, y) -> np.ndarray | float:
        if self.method == "ratio":
            return stein_log_ratio(y, self.x, self.cfg)
        base = SphericalNormal(self.x, self.u + self.v).log_density(y)
        return self.log_density_quadrature(y) - base

    def log_density(self, y) -> np.ndarray | float:
        if self.method == "ratio":
            return self.log_density_ratio(y)
        return self.log_density_quadrature(y)


PredictiveDensity = Union[SphericalNormal, FullNormal, SteinMixture]


def predictive_uniform(x, cfg: ProblemConfig) -> SphericalNormal:
    """Uniform-prior Bayesian predictive ``N_d(x, (u + v) I)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (cfg.d,):
        raise ValueError(f"x has shape {x.shape}, expected ({cfg.d},)")
    return SphericalNormal(x, cfg.u + cfg.v)


def predictive_plugin(est, cfg: ProblemConfig | None = None):
    """Extended plug-in density for an E1 or E2 estimate."""
    if isinstance(est, ExtendedEstimateE1):
        return SphericalNormal(est.mu_hat, est.xi_hat)
    if isinstance(est, ExtendedEstimateE2):
        return FullNormal(est.mu_hat, est.sigma_hat)
    raise TypeError(f"expected an extended estimate, got {type(est).__name__}")


def predictive_eb(x, cfg: ProblemConfig, c: float | None = None) -> SphericalNormal:
    """Empirical Bayes predictive with ``tau_hat = max(0, ||x||^2/c - u)``.

    Integrating ``N(y; mu, v I)`` against the posterior under ``N(0, tau_hat I)``
    gives ``N(w x, (v + w u) I)`` with ``w = tau_hat / (u + tau_hat)``.
    ``c`` defaults to ``d - 3``.
    """
    x = np.asarray(x, dtype=float)
    if c is None:
        c = default_eb_c(cfg.d)
    tau = eb_tau_hat(x, cfg.u, c)
    w = tau / (cfg.u + tau)
    return SphericalNormal(w * x, cfg.v + w * cfg.u)


def _probe_points(x: np.ndarray, cfg: ProblemConfig) -> np.ndarray:
    d = cfg.d
    spread = math.sqrt(cfg.u + cfg.v)
    e = np.zeros(d)
    e[-1] = 1.0
    return np.stack([np.zeros(d), x, 0.5 * x, 2.0 * x, x + 3.0 * spread * e, -x + spread * e])


def predictive_stein_bayes(x, cfg: ProblemConfig, tol: float = 1e-9, order: int = 20, max_order: int = 320) -> SteinMixture:
    """Stein-prior Bayesian predictive, quadrature certified at probe points.

    The rule order is doubled until successive log-densities at a fixed probe
    set agree to ``tol``.
    """
    cfg.require_stein()
    x = np.asarray(x, dtype=float)
    probes = _probe_points(x, cfg)
    current = SteinMixture(x, cfg.u, cfg.v, order=order)
    prev_vals = current.log_density(probes)
    while True:
        if order * 2 > max_order:
            raise QuadratureError("Stein predictive quadrature did not settle", float(np.max(prev_vals)), float(np.max(prev_vals)))
        order *= 2
        nxt = SteinMixture(x, cfg.u, cfg.v, order=order)
        vals = nxt.log_density(probes)
        if np.max(np.abs(vals - prev_vals)) <= tol:
            return nxt
        current, prev_vals = nxt, vals


def check_stein_ratio(cfg: ProblemConfig, n_points: int = 8, seed: int = 0, rtol: float = _RATIO_RTOL) -> float:
    """Cross-check the closed-form Stein ratio against quadrature.

    Returns the largest relative density error seen; raises
    ``ArithmeticError`` when it exceeds ``rtol``.
    """
    cfg.require_stein()
    rng = np.random.default_rng(seed)
    worst = 0.0
    scale = math.sqrt(cfg.u)
    for _ in range(n_points):
        x = rng.standard_normal(cfg.d) * scale * rng.uniform(0.1, 3.0)
        ys = x + rng.standard_normal((4, cfg.d)) * math.sqrt(cfg.u + cfg.v)
        dens = SteinMixture(x, cfg.u, cfg.v)
        err = np.abs(np.expm1(dens.log_density_ratio(ys) - dens.log_density_quadrature(ys)))
        worst = max(worst, float(np.max(err)))
    if worst > rtol:
        raise ArithmeticError(f"Stein ratio formula disagrees with quadrature (relative error {worst:.3g})")
    return worst


METHOD_NAMES = ("pu", "e1", "e2", "eb", "ps")


def make_method(name: str, eb_c: float | None = None, check: bool = True, cfg: ProblemConfig | None = None):
    """Predictive-density constructor ``(x, cfg) -> density`` for a short name.

    ``pu`` uniform Bayes, ``e1``/``e2`` Stein extended plug-ins, ``eb``
    empirical Bayes, ``ps`` Stein Bayes.  The ``ps`` constructor evaluates
    through the closed-form ratio; when ``check`` is set and ``cfg`` is
    given it is validated against quadrature first.
    """
    if name == "pu":
        return predictive_uniform
    if name == "e1":
        return lambda x, cfg: predictive_plugin(estimate_stein(x, cfg)[0])
    if name == "e2":
        return lambda x, cfg: predictive_plugin(estimate_stein(x, cfg)[1])
    if name == "eb":
        return lambda x, cfg: predictive_eb(x, cfg, eb_c)
    if name == "ps":
        if check and cfg is not None:
            check_stein_ratio(cfg)
        return lambda x, cfg: SteinMixture(x, cfg.u, cfg.v, method="ratio")
    raise ValueError(f"unknown method {name!r}; expected one of {', '.join(METHOD_NAMES)}")

