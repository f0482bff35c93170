"""Monte Carlo Kullback-Leibler risk of predictive densities.

Every trial ``i`` owns the random stream ``substream(seed, i)``.  A trial
draws the observation noise first and the target noise second, so all
methods, all grid points and any worker split see the same numbers
(common random numbers).  Per-trial losses are written into a preallocated
array and reduced once, so results do not depend on the worker count.

Gaussian predictives use the exact KL divergence for the inner ``y``
expectation.  Non-Gaussian predictives (the Stein Bayes density) add a Monte
Carlo average of ``log p_U(y|x) - log p(y|x)`` on top of the exact uniform
KL, which keeps the inner noise small.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .estimators import (
    ConjugateNormal,
    EmpiricalBayes,
    PriorSpec,
    Stein,
    Uniform,
    default_eb_c,
    stein_mean_batch,
    stein_rho_moments,
)
from .gaussian import FullNormal, ProblemConfig, SphericalNormal, kl_divergence, substream
from .predictive import make_method
from .special import gauss_legendre_unit, log_phi

__all__ = [
    "RiskEstimate",
    "RiskCurve",
    "Theorem1Row",
    "IntegrationCheck",
    "trial_losses",
    "estimate_risk",
    "risk_curve",
    "uniform_risk",
    "theorem1_derivative_check",
    "risk_integration_check",
    "NamedMethod",
    "prior_from_name",
]

DEFAULT_TRIALS = 5000
DEFAULT_Y_DRAWS = 64

Method = Callable[[np.ndarray, ProblemConfig], object]


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    std_err: float
    trials: int
    method_id: str = ""

    @classmethod
    def from_losses(cls, losses: np.ndarray, method_id: str = "") -> "RiskEstimate":
        n = losses.size
        if n < 2:
            raise ValueError("need at least two trials")
        return cls(float(np.mean(losses)), float(np.std(losses, ddof=1) / math.sqrt(n)), n, method_id)


@dataclass
class RiskCurve:
    grid: np.ndarray
    estimates: dict[str, list[RiskEstimate]]
    d: int
    u: float
    v: float
    trials: int
    seed: int
    losses: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def values(self, method: str) -> np.ndarray:
        return np.array([e.value for e in self.estimates[method]])

    def std_errs(self, method: str) -> np.ndarray:
        return np.array([e.std_err for e in self.estimates[method]])

    def paired_se(self, a: str, b: str) -> np.ndarray:
        """Standard error of ``risk(a) - risk(b)`` at each grid point under CRN."""
        diff = self.losses[a] - self.losses[b]
        return np.std(diff, axis=1, ddof=1) / math.sqrt(diff.shape[1])


def uniform_risk(cfg: ProblemConfig) -> float:
    """Exact risk ``(d/2) log(1 + u/v)`` of the uniform-prior predictive."""
    return 0.5 * cfg.d * math.log1p(cfg.u / cfg.v)


def _is_gaussian(dens) -> bool:
    return isinstance(dens, (SphericalNormal, FullNormal))


def _loss(dens, truth: SphericalNormal, x: np.ndarray, y_noise, cfg: ProblemConfig) -> float:
    if _is_gaussian(dens):
        return kl_divergence(truth, dens)
    pu = SphericalNormal(x, cfg.u + cfg.v)
    ys = truth.mean + math.sqrt(cfg.v) * y_noise
    if hasattr(dens, "log_ratio_to_uniform"):
        corr = -np.mean(dens.log_ratio_to_uniform(ys))
    else:
        corr = np.mean(pu.log_density(ys) - dens.log_density(ys))
    return kl_divergence(truth, pu) + float(corr)


def _spherical_kl_batch(delta_sq: np.ndarray, var: np.ndarray, v: float, d: int) -> np.ndarray:
    # KL(N(mu, vI) || N(m, var I)) with log1p to survive var ~ v
    r = (var - v) / v
    return 0.5 * (d * (np.log1p(r) - r / (1.0 + r)) + delta_sq / var)


def _rowdot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # elementwise then per-row sum; avoids BLAS so results do not depend on batch size
    return np.sum(a * b, axis=-1)


def _estimate_batch(xs: np.ndarray, prior: PriorSpec, u: float, v: float):
    """Row-wise ``(shrink, alpha, beta)`` with ``mu_hat = shrink x`` and
    ``sigma_hat = alpha I + beta x x'`` for every supported prior."""
    n, d = xs.shape
    if isinstance(prior, Uniform):
        return np.ones(n), np.full(n, u + v), np.zeros(n)
    if isinstance(prior, ConjugateNormal):
        w = prior.tau / (u + prior.tau)
        return np.full(n, w), np.full(n, v + w * u), np.zeros(n)
    if isinstance(prior, EmpiricalBayes):
        tau = np.maximum(0.0, _rowdot(xs, xs) / prior.c - u)
        w = tau / (u + tau)
        return w, v + w * u, np.zeros(n)
    if isinstance(prior, Stein):
        mean_w, var_rho = stein_rho_moments(np.sqrt(_rowdot(xs, xs)), u, d)
        f1 = 1.0 - mean_w
        return f1, v + f1 * u, var_rho
    raise TypeError(f"unknown prior {prior!r}")


def _plugin_kl_batch(model: str, xs, mu, shrink, alpha, beta, v: float) -> np.ndarray:
    """``KL(N(mu, vI) || plug-in)`` for a batch of structured estimates."""
    d = xs.shape[1]
    nsq = _rowdot(xs, xs)
    delta = mu - shrink[:, None] * xs
    dsq = _rowdot(delta, delta)
    if model == "e1":
        return _spherical_kl_batch(dsq, alpha + beta * nsq / d, v, d)
    if model != "e2":
        raise ValueError(f"unknown extended model {model!r}")
    # sigma_hat has eigenvalue alpha (d-1 times) and lam along x
    lam = alpha + beta * nsq
    ra, rl = (alpha - v) / v, (lam - v) / v
    proj = _rowdot(delta, xs)
    maha = (dsq - beta * proj * proj / lam) / alpha
    return 0.5 * ((d - 1) * (np.log1p(ra) - ra / (1.0 + ra)) + (np.log1p(rl) - rl / (1.0 + rl)) + maha)


def _stein_log_ratio_batch(xs: np.ndarray, ys: np.ndarray, cfg: ProblemConfig) -> np.ndarray:
    """``log p_S(y|x) - log p_U(y|x)`` for ``xs`` (n, d) and ``ys`` (n, m, d)."""
    d, u, v = cfg.d, cfg.u, cfg.v
    w = u * v / (u + v)
    zs = (v * xs[:, None, :] + u * ys) / (u + v)
    a_z = np.sqrt(_rowdot(zs, zs) / w)
    a_x = np.sqrt(_rowdot(xs, xs) / u)
    return (
        (1.0 - d / 2.0) * math.log(w / u)
        + np.asarray(log_phi(d, a_z))
        - np.asarray(log_phi(d, a_x))[:, None]
    )


def _batch_losses(name: str, xs, mu, cfg: ProblemConfig, y_noise, eb_c):
    """Vectorised losses for the named methods (``None`` if not available)."""
    d, u, v = cfg.d, cfg.u, cfg.v
    if name == "pu":
        return _spherical_kl_batch(_rowdot(xs - mu, xs - mu), np.full(len(xs), u + v), v, d)
    if name == "eb":
        c = default_eb_c(d) if eb_c is None else eb_c
        if not c > 0:
            raise ValueError(f"empirical Bayes constant must be positive, got {c}")
        nsq = _rowdot(xs, xs)
        tau = np.maximum(0.0, nsq / c - u)
        w = tau / (u + tau)
        delta = mu - w[:, None] * xs
        return _spherical_kl_batch(_rowdot(delta, delta), v + w * u, v, d)
    if name in ("e1", "e2"):
        f1, alpha, beta = _estimate_batch(xs, Stein(), u, v)
        return _plugin_kl_batch(name, xs, mu, f1, alpha, beta, v)
    if name == "ps":
        base = _spherical_kl_batch(_rowdot(xs - mu, xs - mu), np.full(len(xs), u + v), v, d)
        ys = mu + math.sqrt(v) * y_noise
        return base - np.mean(_stein_log_ratio_batch(xs, ys, cfg), axis=1)
    return None


class NamedMethod:
    """Predictive constructor tagged with its short name.

    Calling it builds the density for one ``x``; the risk engine also uses
    the name to pick a vectorised loss.
    """

    def __init__(self, name: str, eb_c: float | None = None, cfg: ProblemConfig | None = None, check: bool = True):
        self.name = name
        self.eb_c = eb_c
        self._build = make_method(name, eb_c=eb_c, cfg=cfg, check=check)

    def __call__(self, x, cfg: ProblemConfig):
        return self._build(x, cfg)

    def __repr__(self) -> str:
        return f"NamedMethod({self.name!r})"


def _run_chunks(n: int, workers: int, body: Callable[[range], None], chunk: int = 500) -> None:
    chunks = [range(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    if workers <= 1:
        for c in chunks:
            body(c)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for fut in [pool.submit(body, c) for c in chunks]:
            fut.result()


def trial_losses(
    methods: Mapping[str, Method],
    mus: Sequence[np.ndarray],
    cfg: ProblemConfig,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    n_y: int = DEFAULT_Y_DRAWS,
    workers: int = 1,
    vectorize: bool = True,
) -> dict[str, np.ndarray]:
    """Per-trial KL losses, shape ``(len(mus), trials)`` for each method.

    ``x_i = mu + sqrt(u) z_i`` and ``y_ij = mu + sqrt(v) zeta_ij`` with the
    same ``z_i, zeta_ij`` for every method and every ``mu``.  Methods given
    as :class:`NamedMethod` go through closed-form vectorised losses unless
    ``vectorize`` is off; anything else is evaluated trial by trial.
    """
    if trials < 2:
        raise ValueError(f"trials must be at least 2, got {trials}")
    if n_y < 1:
        raise ValueError("need at least one y draw per trial")
    mus = [np.asarray(m, dtype=float) for m in mus]
    out = {name: np.empty((len(mus), trials)) for name in methods}
    su = math.sqrt(cfg.u)

    def body(idx: range) -> None:
        zs = np.empty((len(idx), cfg.d))
        y_noise = np.empty((len(idx), n_y, cfg.d))
        for j, i in enumerate(idx):
            rng = substream(seed, i)
            zs[j] = rng.standard_normal(cfg.d)
            y_noise[j] = rng.standard_normal((n_y, cfg.d))
        sl = slice(idx.start, idx.stop)
        for k, mu in enumerate(mus):
            xs = mu + su * zs
            truth = SphericalNormal(mu, cfg.v)
            for name, method in methods.items():
                batch = None
                if vectorize and isinstance(method, NamedMethod):
                    batch = _batch_losses(method.name, xs, mu, cfg, y_noise, method.eb_c)
                if batch is None:
                    batch = [_loss(method(x, cfg), truth, x, yn, cfg) for x, yn in zip(xs, y_noise)]
                out[name][k, sl] = batch

    _run_chunks(trials, workers, body)
    return out


def estimate_risk(
    method: Method | str,
    mu,
    cfg: ProblemConfig,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    n_y: int = DEFAULT_Y_DRAWS,
    workers: int = 1,
    method_id: str | None = None,
) -> RiskEstimate:
    """Monte Carlo estimate of ``R(mu; p) = E_x KL(N(mu, v I) || p(.|x))``."""
    mu = np.asarray(mu, dtype=float)
    cfg = cfg.with_mu(mu)
    if isinstance(method, str):
        method_id = method_id or method
        method = NamedMethod(method, cfg=cfg)
    method_id = method_id or getattr(method, "__name__", "method")
    losses = trial_losses({method_id: method}, [mu], cfg, trials, seed, n_y, workers)[method_id][0]
    return RiskEstimate.from_losses(losses, method_id)


def risk_curve(
    methods: Sequence[str] | Mapping[str, Method],
    grid: Sequence[float],
    cfg: ProblemConfig,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    n_y: int = DEFAULT_Y_DRAWS,
    workers: int = 1,
    eb_c: float | None = None,
) -> RiskCurve:
    """Risk of each method at ``mu = ||mu|| e_1`` for every grid value."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty list of norms")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if np.any(grid < 0):
        raise ValueError("grid norms must be nonnegative")
    if not isinstance(methods, Mapping):
        methods = {name: NamedMethod(name, eb_c=eb_c, cfg=cfg) for name in methods}
    if not methods:
        raise ValueError("need at least one method")
    mus = []
    for r in grid:
        mu = np.zeros(cfg.d)
        mu[0] = r
        mus.append(mu)
    losses = trial_losses(methods, mus, cfg, trials, seed, n_y, workers)
    est = {
        name: [RiskEstimate.from_losses(losses[name][k], name) for k in range(grid.size)]
        for name in methods
    }
    return RiskCurve(grid, est, cfg.d, cfg.u, cfg.v, trials, seed, losses)


# ---------------------------------------------------------------------------
# small-t derivative of the risk difference
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Theorem1Row:
    t: float
    model: str
    derivative: float
    derivative_se: float
    target: float
    target_se: float
    deviation_se: float

    @property
    def deviation(self) -> float:
        return self.derivative - self.target

    @property
    def combined_se(self) -> float:
        return math.hypot(self.derivative_se, self.target_se)


def theorem1_derivative_check(
    prior: PriorSpec,
    mu,
    s: float,
    t_values: Sequence[float],
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    models: Sequence[str] = ("e1", "e2"),
) -> list[Theorem1Row]:
    """Compare ``Delta(t)/t`` with the estimation-risk half-difference.

    ``Delta(t)`` is the risk of the uniform predictive minus that of the
    extended plug-in, at observation variance ``1/s`` and prediction
    variance ``1/t``.  It vanishes at ``t = 0``, so ``Delta(t)/t`` is a
    one-sided derivative.  The target is
    ``(E||x - mu||^2 - E||mu_hat - mu||^2) / 2`` under ``x ~ N(mu, I/s)``.
    All quantities share the same ``x`` draws.
    """
    mu = np.asarray(mu, dtype=float)
    d = mu.size
    t_values = [float(t) for t in t_values]
    if any(t <= 0 for t in t_values):
        raise ValueError("t values must be positive")
    if trials < 2:
        raise ValueError("trials must be at least 2")
    u = 1.0 / s
    zs = np.stack([substream(seed, i).standard_normal(d) for i in range(trials)])
    xs = mu + math.sqrt(u) * zs

    # the shrinkage part of the estimate does not depend on t
    shrink, _, _ = _estimate_batch(xs, prior, u, 1.0)
    mu_hats = shrink[:, None] * xs
    target_i = 0.5 * (_rowdot(xs - mu, xs - mu) - _rowdot(mu_hats - mu, mu_hats - mu))
    n = math.sqrt(trials)
    target = float(np.mean(target_i))
    target_se = float(np.std(target_i, ddof=1) / n)

    rows = []
    for t in t_values:
        v = 1.0 / t
        loss_u = _spherical_kl_batch(_rowdot(xs - mu, xs - mu), np.full(trials, u + v), v, d)
        shrink, alpha, beta = _estimate_batch(xs, prior, u, v)
        for m in models:
            dv = (loss_u - _plugin_kl_batch(m, xs, mu, shrink, alpha, beta, v)) / t
            rows.append(
                Theorem1Row(
                    t=t,
                    model=m,
                    derivative=float(np.mean(dv)),
                    derivative_se=float(np.std(dv, ddof=1) / n),
                    target=target,
                    target_se=target_se,
                    deviation_se=float(np.std(dv - target_i, ddof=1) / n),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# prediction risk as an integral of estimation risk
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegrationCheck:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    nodes: np.ndarray
    node_values: np.ndarray
    node_se: np.ndarray

    @property
    def diff(self) -> float:
        return self.lhs - self.rhs

    @property
    def combined_se(self) -> float:
        return math.hypot(self.lhs_se, self.rhs_se)


def risk_integration_check(
    mu,
    s: float,
    t: float,
    n_nodes: int = 16,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    n_y: int = DEFAULT_Y_DRAWS,
) -> IntegrationCheck:
    """Both sides of the prediction/estimation risk identity for Stein's prior.

    Left: ``R(mu; p_U) - R(mu; p_S)`` with ``u = 1/s`` and ``v = 1/t``.
    Right: ``int_s^{s+t} (E||x - mu||^2 - E||mu_hat_tau - mu||^2) / 2 dtau``
    with ``x ~ N(mu, I/tau)``, by Gauss-Legendre over ``tau`` and Monte
    Carlo at each node.  The two sides use independent streams.
    """
    mu = np.asarray(mu, dtype=float)
    d = mu.size
    if d < 3:
        raise ValueError(f"Stein's prior needs dimension d >= 3, got d={d}")
    if not (s > 0 and t > 0):
        raise ValueError("s and t must be positive")
    if trials < 2:
        raise ValueError("trials must be at least 2")
    cfg = ProblemConfig(d, 1.0 / s, 1.0 / t, mu)
    su, sv = math.sqrt(cfg.u), math.sqrt(cfg.v)

    zx = np.empty((trials, d))
    zy = np.empty((trials, n_y, d))
    for i in range(trials):
        rng = substream(seed, 0, i)
        zx[i] = rng.standard_normal(d)
        zy[i] = rng.standard_normal((n_y, d))
    lhs_i = np.mean(_stein_log_ratio_batch(mu + su * zx, mu + sv * zy, cfg), axis=1)

    base, weights = gauss_legendre_unit(n_nodes) if n_nodes >= 2 else (np.array([0.5]), np.array([1.0]))
    taus = s + t * base
    wts = t * weights
    zs = np.stack([substream(seed, 1, i).standard_normal(d) for i in range(trials)])
    per_node = np.empty((n_nodes, trials))
    for k, tau in enumerate(taus):
        xs = mu + zs / math.sqrt(tau)
        mh = stein_mean_batch(xs, 1.0 / tau)
        per_node[k] = 0.5 * (np.sum((xs - mu) ** 2, axis=1) - np.sum((mh - mu) ** 2, axis=1))
    rhs_i = wts @ per_node
    n = math.sqrt(trials)
    return IntegrationCheck(
        lhs=float(np.mean(lhs_i)),
        lhs_se=float(np.std(lhs_i, ddof=1) / n),
        rhs=float(np.mean(rhs_i)),
        rhs_se=float(np.std(rhs_i, ddof=1) / n),
        nodes=taus,
        node_values=per_node.mean(axis=1),
        node_se=per_node.std(axis=1, ddof=1) / n,
    )


_PRIOR_NAMES = {"uniform": Uniform, "stein": Stein}


def prior_from_name(name: str, tau: float | None = None) -> PriorSpec:
    if name == "conjugate":
        if tau is None:
            raise ValueError("conjugate prior needs tau")
        return ConjugateNormal(tau)
    try:
        return _PRIOR_NAMES[name]()
    except KeyError:
        raise ValueError(f"unknown prior {name!r}") from None
