"""Multivariate normal primitives: problem frame, densities, sampling, KL."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "ProblemConfig",
    "SphericalNormal",
    "FullNormal",
    "Gaussian",
    "NotPositiveDefiniteError",
    "log_density",
    "sample",
    "kl_divergence",
    "as_full",
    "substream",
]

_LOG_2PI = math.log(2.0 * math.pi)
# relative floor on Cholesky diagonal before a covariance counts as singular
_PD_RATIO = 1e-10


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


def _vector(x, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ProblemConfig:
    """Observation ``x ~ N_d(mu, u I)`` and target ``y ~ N_d(mu, v I)``.

    ``mu`` may be omitted when only the estimators are needed; the origin is
    used then.
    """

    d: int
    u: float
    v: float
    mu: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        if not self.u > 0:
            raise ValueError(f"u must be positive, got {self.u}")
        if not self.v > 0:
            raise ValueError(f"v must be positive, got {self.v}")
        mu = np.zeros(int(self.d)) if self.mu is None else _vector(self.mu, "mu")
        if mu.shape != (self.d,):
            raise ValueError(f"mu has length {mu.size}, expected d={self.d}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "u", float(self.u))
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "mu", mu)

    @property
    def s(self) -> float:
        """Observation time ``1/u``."""
        return 1.0 / self.u

    @property
    def t(self) -> float:
        """Prediction time ``1/v``."""
        return 1.0 / self.v

    def with_mu(self, mu) -> "ProblemConfig":
        return ProblemConfig(self.d, self.u, self.v, mu)

    def require_stein(self) -> None:
        if self.d < 3:
            raise ValueError(f"Stein's prior needs dimension d >= 3, got d={self.d}")


@dataclass(frozen=True)
class SphericalNormal:
    """``N_d(mean, variance * I)``."""

    mean: np.ndarray
    variance: float

    def __post_init__(self):
        object.__setattr__(self, "mean", _vector(self.mean, "mean"))
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise NotPositiveDefiniteError(f"variance must be positive, got {self.variance}")
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def covariance(self) -> np.ndarray:
        return self.variance * np.eye(self.dim)

    def log_density(self, y) -> np.ndarray | float:
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.dim:
            raise ValueError(f"y has trailing dimension {y.shape[-1]}, expected {self.dim}")
        r2 = np.sum((y - self.mean) ** 2, axis=-1)
        out = -0.5 * (self.dim * (_LOG_2PI + math.log(self.variance)) + r2 / self.variance)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class FullNormal:
    """``N_d(mean, covariance)`` with the Cholesky factor computed once."""

    mean: np.ndarray
    covariance: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = _vector(self.mean, "mean")
        cov = np.array(self.covariance, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * max(1.0, np.max(np.abs(cov)))):
            raise ValueError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("covariance is not positive definite") from exc
        diag = np.diag(chol)
        if diag.min() < _PD_RATIO * diag.max():
            raise NotPositiveDefiniteError("covariance is numerically singular")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def _whiten(self, r: np.ndarray) -> np.ndarray:
        # solves L z = r for a stack of row vectors
        flat = r.reshape(-1, self.dim).T
        z = solve_triangular(self.chol, flat, lower=True) if flat.size else flat
        return z.T.reshape(r.shape)

    def log_density(self, y) -> np.ndarray | float:
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.dim:
            raise ValueError(f"y has trailing dimension {y.shape[-1]}, expected {self.dim}")
        z = self._whiten(y - self.mean)
        out = -0.5 * (self.dim * _LOG_2PI + self.log_det + np.sum(z * z, axis=-1))
        return float(out) if np.ndim(out) == 0 else out


Gaussian = Union[SphericalNormal, FullNormal]


def as_full(dist: Gaussian) -> FullNormal:
    if isinstance(dist, FullNormal):
        return dist
    return FullNormal(dist.mean, dist.covariance)


def log_density(dist, y):
    """Log density of ``dist`` at ``y`` (a vector or a stack of vectors)."""
    return dist.log_density(y)


def substream(seed: int, *index: int) -> np.random.Generator:
    """Independent generator for ``(seed, *index)``.

    Streams are keyed by position, not by draw order, so work split across
    threads sees exactly the draws a serial run would.
    """
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must fit in 64 unsigned bits")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in index))
    return np.random.Generator(np.random.PCG64(ss))


def sample(dist: Gaussian, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` i.i.d. draws from ``dist``, shape ``(n, d)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    z = rng.standard_normal((n, dist.dim))
    if isinstance(dist, SphericalNormal):
        return dist.mean + math.sqrt(dist.variance) * z
    return dist.mean + z @ dist.chol.T


def _maybe_spherical(dist: Gaussian) -> Gaussian:
    if isinstance(dist, FullNormal):
        c = dist.covariance
        diag = np.diag(c)
        if np.all(diag == diag[0]) and np.count_nonzero(c - np.diag(diag)) == 0:
            return SphericalNormal(dist.mean, diag[0])
    return dist


def kl_divergence(p: Gaussian, q: Gaussian) -> float:
    """Closed-form ``KL(p || q)`` between two normals.

    Spherical pairs use the scalar formula with ``log1p`` so that nearly
    equal variances (the small-``t`` regime) do not cancel catastrophically.
    """
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    d = p.dim
    diff = p.mean - q.mean
    p, q = _maybe_spherical(p), _maybe_spherical(q)
    if isinstance(p, SphericalNormal) and isinstance(q, SphericalNormal):
        r = (q.variance - p.variance) / p.variance
        # d*log(q/p) + d*p/q - d == d*(log1p(r) - r/(1+r))
        val = 0.5 * (d * (math.log1p(r) - r / (1.0 + r)) + float(diff @ diff) / q.variance)
        return max(val, 0.0)
    qf = as_full(q)
    if isinstance(p, SphericalNormal):
        p_cov_logdet = d * math.log(p.variance)
        linv = solve_triangular(qf.chol, np.eye(d), lower=True)
        trace_term = p.variance * float(np.sum(linv * linv))
    else:
        p_cov_logdet = p.log_det
        m = solve_triangular(qf.chol, p.chol, lower=True)
        trace_term = float(np.sum(m * m))
    z = solve_triangular(qf.chol, diff, lower=True)
    val = 0.5 * (qf.log_det - p_cov_logdet + trace_term + float(z @ z) - d)
    return max(val, 0.0)
