"""Bayes extended estimators for the two extended normal models.

For a prior ``pi`` and observation ``x ~ N_d(mu, u I)`` the spherical model
uses ``(mu_hat, xi_hat)`` with

    xi_hat = v + (E[mu'mu | x] - mu_hat'mu_hat) / d

and the full-covariance model uses ``(mu_hat, sigma_hat)`` with

    sigma_hat = v I + E[mu mu' | x] - mu_hat mu_hat'.

Under Stein's prior ``||mu||^(2-d)`` the posterior is a scale mixture: given
``rho = tau / (u + tau)`` the mean is ``N(rho x, rho u I)``.  Writing
``F1 = E[rho | x]`` and ``F2 = E[rho^2 | x]`` gives

    mu_hat    = F1 x
    xi_hat    = v + F1 u + (||x||^2 / d) (F2 - F1^2)
    sigma_hat = (v + F1 u) I + (F2 - F1^2) x x'

with ``F1``, ``F2`` expressed through ratios of :func:`~shrinkpred.special.phi`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .gaussian import ProblemConfig
from .special import log_lower_incomplete_gamma, log_phi

__all__ = [
    "ExtendedEstimateE1",
    "ExtendedEstimateE2",
    "Uniform",
    "Stein",
    "ConjugateNormal",
    "EmpiricalBayes",
    "PriorSpec",
    "MarginalDerivatives",
    "estimate_uniform",
    "estimate_stein",
    "estimate_conjugate",
    "estimate",
    "stein_shrinkage_factors",
    "stein_rho_moments",
    "stein_mean_batch",
    "eb_tau_hat",
    "eb_weight",
    "default_eb_c",
    "marginal_log_density_and_derivatives",
]


@dataclass(frozen=True)
class ExtendedEstimateE1:
    """Estimate in the spherical model ``N_d(mu, xi I)``."""

    mu_hat: np.ndarray
    xi_hat: float


@dataclass(frozen=True)
class ExtendedEstimateE2:
    """Estimate in the full-covariance model ``N_d(mu, Sigma)``."""

    mu_hat: np.ndarray
    sigma_hat: np.ndarray


@dataclass(frozen=True)
class Uniform:
    kind = "uniform"


@dataclass(frozen=True)
class Stein:
    kind = "stein"


@dataclass(frozen=True)
class ConjugateNormal:
    tau: float
    kind = "conjugate"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"conjugate prior scale must be positive, got {self.tau}")


@dataclass(frozen=True)
class EmpiricalBayes:
    c: float
    kind = "eb"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"empirical Bayes constant must be positive, got {self.c}")


PriorSpec = Union[Uniform, Stein, ConjugateNormal, EmpiricalBayes]


def _as_x(x, cfg: ProblemConfig) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (cfg.d,):
        raise ValueError(f"x has shape {x.shape}, expected ({cfg.d},)")
    return x


def _pair(mu_hat: np.ndarray, scalar_var: float, rank_one: float, x: np.ndarray, d: int):
    xi_hat = scalar_var + rank_one * float(x @ x) / d
    sigma_hat = scalar_var * np.eye(d) + rank_one * np.outer(x, x)
    return ExtendedEstimateE1(mu_hat, xi_hat), ExtendedEstimateE2(mu_hat, sigma_hat)


def estimate_uniform(x, cfg: ProblemConfig):
    """Flat prior: ``mu_hat = x`` and ``xi_hat = u + v``."""
    x = _as_x(x, cfg)
    return _pair(x.copy(), cfg.u + cfg.v, 0.0, x, cfg.d)


def estimate_conjugate(x, tau: float, cfg: ProblemConfig):
    """Prior ``N(0, tau I)``: the posterior is ``N(w x, w u I)``, ``w = tau/(u+tau)``."""
    x = _as_x(x, cfg)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    w = tau / (cfg.u + tau)
    return _pair(w * x, cfg.v + w * cfg.u, 0.0, x, cfg.d)


def _check_stein_dim(d: int) -> None:
    if int(d) != d or d < 3:
        raise ValueError(f"Stein's prior needs dimension d >= 3, got d={d}")


def _phi_ratios(a, d: int):
    # r2 = phi_{d+2}/phi_d, r4 = phi_{d+4}/phi_d
    lp = log_phi(d, a)
    r2 = np.exp(np.asarray(log_phi(d + 2, a)) - lp)
    r4 = np.exp(np.asarray(log_phi(d + 4, a)) - lp)
    return r2, r4


def stein_rho_moments(x_norm, u: float, d: int):
    """Posterior ``E[1 - rho | x]`` and ``Var[rho | x]`` under Stein's prior.

    Vectorised over ``x_norm``.  The variance is assembled from the ratios
    directly rather than as ``F2 - F1**2``, which cancels badly once
    ``rho`` concentrates near one.
    """
    _check_stein_dim(d)
    if not u > 0:
        raise ValueError(f"u must be positive, got {u}")
    a = np.asarray(x_norm, dtype=float) / math.sqrt(u)
    r2, r4 = _phi_ratios(a, d)
    mean_w = 2.0 * r2
    var = np.maximum(4.0 * (r4 - r2 * r2), 0.0)
    if np.ndim(mean_w) == 0:
        return float(mean_w), float(var)
    return mean_w, var


def stein_shrinkage_factors(x_norm, u: float, d: int):
    """``(F1, F2) = (E[rho | x], E[rho^2 | x])`` under Stein's prior.

    ``F1 = 1 - 2 phi_{d+2}/phi_d`` and ``F2 = 1 + 4 (phi_{d+4} - phi_{d+2})/phi_d``,
    all evaluated at ``||x|| / sqrt(u)``.  At the origin ``F1 = 2/d``.
    """
    if np.any(np.asarray(x_norm) < 0):
        raise ValueError("x_norm must be nonnegative")
    mean_w, var = stein_rho_moments(x_norm, u, d)
    f1 = 1.0 - np.asarray(mean_w)
    f2 = var + f1 * f1
    if np.ndim(f1) == 0:
        return float(f1), float(f2)
    return f1, f2


def estimate_stein(x, cfg: ProblemConfig):
    """Bayes extended estimators under Stein's prior (requires ``d >= 3``)."""
    _check_stein_dim(cfg.d)
    x = _as_x(x, cfg)
    mean_w, var = stein_rho_moments(math.sqrt(float(x @ x)), cfg.u, cfg.d)
    f1 = 1.0 - mean_w
    return _pair(f1 * x, cfg.v + f1 * cfg.u, var, x, cfg.d)


def stein_mean_batch(xs: np.ndarray, u: float) -> np.ndarray:
    """Row-wise Stein posterior mean ``F1(x) x`` for a stack of observations."""
    xs = np.asarray(xs, dtype=float)
    d = xs.shape[-1]
    mean_w, _ = stein_rho_moments(np.linalg.norm(xs, axis=-1), u, d)
    return (1.0 - np.asarray(mean_w))[..., None] * xs


def default_eb_c(d: int) -> float:
    return float(d - 3)


def eb_tau_hat(x, u: float, c: float) -> float:
    """Positive-part moment estimate ``max(0, ||x||^2 / c - u)`` of the prior scale."""
    if not c > 0:
        raise ValueError(f"empirical Bayes constant c must be positive, got {c}")
    x = np.asarray(x, dtype=float)
    return max(0.0, float(x @ x) / c - u)


def eb_weight(x, u: float, c: float) -> float:
    """Shrinkage weight ``tau_hat / (u + tau_hat) = max(0, 1 - c u / ||x||^2)``."""
    tau = eb_tau_hat(x, u, c)
    return tau / (u + tau)


def estimate(x, prior: PriorSpec, cfg: ProblemConfig):
    """Dispatch to the estimator for ``prior``; returns the (E1, E2) pair."""
    if isinstance(prior, Uniform):
        return estimate_uniform(x, cfg)
    if isinstance(prior, Stein):
        return estimate_stein(x, cfg)
    if isinstance(prior, ConjugateNormal):
        return estimate_conjugate(x, prior.tau, cfg)
    if isinstance(prior, EmpiricalBayes):
        x = _as_x(x, cfg)
        w = eb_weight(x, cfg.u, prior.c)
        return _pair(w * x, cfg.v + w * cfg.u, 0.0, x, cfg.d)
    raise TypeError(f"unknown prior {prior!r}")


class MarginalDerivatives(NamedTuple):
    log_m: float
    grad_log_m: np.ndarray
    h: float
    H: np.ndarray


def marginal_log_density_and_derivatives(x, prior: PriorSpec, cfg: ProblemConfig) -> MarginalDerivatives:
    """Log marginal of ``x`` and the derivative terms behind the estimators.

    ``x + u * grad_log_m`` is the posterior mean, ``u + v + h`` is
    ``xi_hat`` and ``(u + v) I + H`` is ``sigma_hat``, where
    ``H = u^2 (hess m / m - grad log m grad log m')`` and ``h = tr(H) / d``.

    For Stein's prior normalised as ``||mu||^(2-d)`` the marginal is
    ``||x||^(2-d) P(d/2 - 1, ||x||^2 / (2u))``.
    """
    x = _as_x(x, cfg)
    d, u = cfg.d, cfg.u
    r2 = float(x @ x)
    if isinstance(prior, ConjugateNormal):
        var = u + prior.tau
        log_m = -0.5 * d * math.log(2.0 * math.pi * var) - 0.5 * r2 / var
        grad = -x / var
        H = -(u * u / var) * np.eye(d)
        return MarginalDerivatives(log_m, grad, float(np.trace(H)) / d, H)
    if isinstance(prior, Stein):
        _check_stein_dim(d)
        s = d / 2.0 - 1.0
        if r2 == 0.0:
            # limit of ||x||^(2-d) P(s, ||x||^2/2u) at the origin
            log_m = -s * math.log(2.0 * u) - math.lgamma(s + 1.0)
        else:
            log_m = (
                (1.0 - d / 2.0) * math.log(r2)
                + log_lower_incomplete_gamma(s, 0.5 * r2 / u)
                - math.lgamma(s)
            )
        mean_w, var_w = stein_rho_moments(math.sqrt(r2), u, d)
        grad = -(mean_w / u) * x
        H = -u * mean_w * np.eye(d) + var_w * np.outer(x, x)
        return MarginalDerivatives(float(log_m), grad, float(np.trace(H)) / d, H)
    raise ValueError(f"marginal derivatives are only available for Stein and conjugate priors, got {prior!r}")
