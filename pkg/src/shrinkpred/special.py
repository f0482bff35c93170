"""Incomplete gamma functions, the ``phi`` integral and quadrature on (0, 1).

The lower incomplete gamma function is evaluated in log space with the usual
split: a power series for ``z < s + 1`` and a Lentz continued fraction for the
upper function otherwise.  Everything is vectorised over ``z`` so that the
risk engine can push whole batches of draws through in one call.

``phi(d, a)`` is the one-dimensional integral

.. math::
    \\phi_d(a) = a^{2-d} \\int_0^{a^2/2} s^{d/2-2} e^{-s}\\, ds
              = a^{2-d}\\, \\gamma(d/2 - 1, a^2/2),

which carries every Stein-prior quantity in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadratureError",
    "QuadratureRule",
    "log_lower_incomplete_gamma",
    "lower_incomplete_gamma_regularized",
    "log_phi",
    "phi",
    "phi_at_zero",
    "build_quadrature",
    "adaptive_integrate",
    "gauss_legendre_unit",
]

_EPS = np.finfo(float).eps
_TINY = 1e-300
_MAX_ITER = 10_000
# below this value of a^2/2 phi switches to its two-term series
_PHI_SERIES_CUTOFF = 1e-12


class QuadratureError(ArithmeticError):
    """Adaptive quadrature ran out of node budget before converging."""

    def __init__(self, message: str, previous: float, last: float):
        super().__init__(f"{message} (previous={previous!r}, last={last!r})")
        self.previous = previous
        self.last = last


def _check_shape_param(s: float) -> float:
    s = float(s)
    if not s > 0.0:
        raise ValueError(f"shape parameter must be positive, got s={s}")
    return s


def _log_series(s: float, z: np.ndarray) -> np.ndarray:
    # log gamma(s, z) = s log z - z + log sum_n z^n / (s (s+1) ... (s+n))
    term = np.full_like(z, 1.0 / s)
    total = term.copy()
    active = np.ones(z.shape, dtype=bool)
    n = 0
    while active.any():
        n += 1
        if n > _MAX_ITER:
            raise ArithmeticError("incomplete gamma series did not converge")
        term[active] *= z[active] / (s + n)
        total[active] += term[active]
        active &= term > total * _EPS
    return s * np.log(z) - z + np.log(total)


def _log_upper_cf(s: float, z: np.ndarray) -> np.ndarray:
    # modified Lentz evaluation of the continued fraction for Gamma(s, z)
    b = z + 1.0 - s
    c = np.full_like(z, 1.0 / _TINY)
    dd = 1.0 / b
    h = dd.copy()
    active = np.ones(z.shape, dtype=bool)
    i = 0
    while active.any():
        i += 1
        if i > _MAX_ITER:
            raise ArithmeticError("incomplete gamma continued fraction did not converge")
        an = -i * (i - s)
        b = b + 2.0
        dd = an * dd + b
        dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        dd = 1.0 / dd
        delta = dd * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > _EPS
    return s * np.log(z) - z + np.log(h)


def log_lower_incomplete_gamma(s: float, z) -> np.ndarray | float:
    """Natural log of the unregularised lower incomplete gamma ``gamma(s, z)``.

    Returns ``-inf`` at ``z = 0``.  Accepts scalar or array ``z``.
    """
    s = _check_shape_param(s)
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0) or np.any(np.isnan(z_arr)):
        raise ValueError("incomplete gamma argument must be nonnegative")
    flat = np.atleast_1d(z_arr).ravel()
    out = np.full(flat.shape, -np.inf)
    lg = math.lgamma(s)

    series = (flat > 0) & (flat < s + 1.0)
    if series.any():
        out[series] = _log_series(s, flat[series])
    cf = flat >= s + 1.0
    if cf.any():
        zc = flat[cf]
        finite = np.isfinite(zc)
        vals = np.full(zc.shape, lg)
        if finite.any():
            log_q = _log_upper_cf(s, zc[finite]) - lg
            vals[finite] = lg + np.log1p(-np.exp(log_q))
        out[cf] = vals

    out = out.reshape(np.shape(z_arr))
    return float(out) if out.ndim == 0 else out


def lower_incomplete_gamma_regularized(s: float, z) -> np.ndarray | float:
    """Regularised lower incomplete gamma ``P(s, z) = gamma(s, z) / Gamma(s)``.

    Parameters
    ----------
    s : float
        Shape, strictly positive.
    z : float or array_like
        Upper integration limit, nonnegative (``inf`` gives 1).

    Raises
    ------
    ValueError
        If ``s <= 0`` or any ``z < 0``.
    """
    s = _check_shape_param(s)
    out = np.exp(np.asarray(log_lower_incomplete_gamma(s, z)) - math.lgamma(s))
    out = np.minimum(out, 1.0)
    return float(out) if out.ndim == 0 else out


def _check_phi_args(d: int, a) -> np.ndarray:
    if int(d) != d or d < 3:
        raise ValueError(f"phi requires an integer dimension d >= 3, got d={d}")
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr < 0) or np.any(np.isnan(a_arr)):
        raise ValueError("phi requires a >= 0")
    return a_arr


def phi_at_zero(d: int) -> float:
    """The finite limit ``phi(d, 0) = 2**(1 - d/2) / (d/2 - 1)``."""
    _check_phi_args(d, 0.0)
    return 2.0 ** (1.0 - d / 2.0) / (d / 2.0 - 1.0)


def log_phi(d: int, a) -> np.ndarray | float:
    """Log of :func:`phi`, stable for large ``d`` and for ``a`` near zero."""
    a_arr = _check_phi_args(d, a)
    s = d / 2.0 - 1.0
    flat = np.atleast_1d(a_arr).ravel()
    z = 0.5 * flat * flat
    out = np.empty(flat.shape)

    small = z < _PHI_SERIES_CUTOFF
    if small.any():
        zs = z[small]
        out[small] = (1.0 - d / 2.0) * math.log(2.0) + np.log(1.0 / s - zs / (s + 1.0))
    big = ~small
    if big.any():
        ab = flat[big]
        out[big] = (2.0 - d) * np.log(ab) + log_lower_incomplete_gamma(s, z[big])

    out = out.reshape(np.shape(a_arr))
    return float(out) if out.ndim == 0 else out


def phi(d: int, a) -> np.ndarray | float:
    """``phi_d(a) = a**(2-d) * gamma(d/2 - 1, a**2/2)`` for integer ``d >= 3``."""
    out = np.exp(np.asarray(log_phi(d, a)))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Composite rule on (0, 1): increasing nodes with positive weights."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1 or nodes.size == 0:
            raise ValueError("nodes and weights must be matching nonempty 1-d arrays")
        if np.any(nodes <= 0) or np.any(nodes >= 1) or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing inside (0, 1)")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def order(self) -> int:
        return int(self.nodes.size)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray | float:
        """Apply the rule to a vectorised integrand.

        ``f`` maps the node array of shape ``(n,)`` to ``(n,)`` or ``(n, k)``.
        """
        vals = np.asarray(f(self.nodes), dtype=float)
        out = np.tensordot(self.weights, vals, axes=(0, 0))
        return float(out) if np.ndim(out) == 0 else out


def gauss_legendre_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel(lo: float, hi: float, base_x: np.ndarray, base_w: np.ndarray):
    width = hi - lo
    return lo + width * base_x, width * base_w


def _panel_estimate(f, lo, hi, base_x, base_w):
    x, w = _panel(lo, hi, base_x, base_w)
    vals = np.asarray(f(x), dtype=float)
    return np.tensordot(w, vals, axes=(0, 0))


def _adaptive_panels(f, lo, hi, order, tol, breakpoints, max_nodes):
    base_x, base_w = gauss_legendre_unit(order)
    # breakpoints hugging an end would only create sliver panels
    margin = 1e-9 * (hi - lo)
    edges = sorted({lo, hi, *(b for b in breakpoints if lo + margin < b < hi - margin)})
    stack = [(a, b, _panel_estimate(f, a, b, base_x, base_w)) for a, b in zip(edges[:-1], edges[1:])]
    accepted = []
    # total estimate drives the global relative tolerance
    total = sum((est for _, _, est in stack), start=np.zeros_like(stack[0][2]))
    scale = max(float(np.max(np.abs(total))), _TINY)
    used = order * len(stack)
    previous = total
    while stack:
        a, b, est = stack.pop()
        mid = 0.5 * (a + b)
        left = _panel_estimate(f, a, mid, base_x, base_w)
        right = _panel_estimate(f, mid, b, base_x, base_w)
        used += 2 * order
        refined = left + right
        err = float(np.max(np.abs(refined - est)))
        total = total - est + refined
        scale = max(float(np.max(np.abs(total))), _TINY)
        if err <= max(tol * (b - a), 16 * _EPS) * scale or (b - a) < 1e-15:
            accepted.append((a, mid))
            accepted.append((mid, b))
        else:
            if used > max_nodes:
                raise QuadratureError(
                    "adaptive quadrature exceeded node budget",
                    float(np.max(previous)),
                    float(np.max(total)),
                )
            stack.append((a, mid, left))
            stack.append((mid, b, right))
        previous = total
    accepted.sort()
    xs, ws = [], []
    for a, b in accepted:
        x, w = _panel(a, b, base_x, base_w)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def build_quadrature(
    order: int = 20,
    tol: float = 1e-13,
    integrand: Callable[[np.ndarray], np.ndarray] | None = None,
    breakpoints: Sequence[float] = (),
    max_nodes: int = 100_000,
) -> QuadratureRule:
    """Composite Gauss-Legendre rule on (0, 1), adaptively bisected.

    Without an integrand this is a single ``order``-point panel, exact for
    polynomials up to degree ``2*order - 1``.  With one, panels are halved
    until the halves agree with their parent to ``tol`` relative to the
    running total, so the returned rule is tailored to that integrand (and
    to anything of similar shape).  ``breakpoints`` seed the initial panels,
    which matters for sharply peaked integrands.

    Raises
    ------
    QuadratureError
        When the node budget ``max_nodes`` is exhausted.
    """
    if order < 8:
        raise ValueError(f"quadrature order must be >= 8, got {order}")
    if integrand is None:
        x, w = gauss_legendre_unit(order)
        return QuadratureRule(x, w)
    x, w = _adaptive_panels(integrand, 0.0, 1.0, order, tol, breakpoints, max_nodes)
    return QuadratureRule(x, w)


def adaptive_integrate(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    tol: float = 1e-13,
    order: int = 20,
    breakpoints: Sequence[float] = (),
    max_nodes: int = 100_000,
) -> float:
    """Integrate a vectorised scalar function over ``[lo, hi]``."""
    if not hi > lo:
        raise ValueError("need lo < hi")
    width = hi - lo
    rule = build_quadrature(
        order=order,
        tol=tol,
        integrand=lambda r: f(lo + width * r),
        breakpoints=[(b - lo) / width for b in breakpoints],
        max_nodes=max_nodes,
    )
    return width * rule.integrate(lambda r: f(lo + width * r))
