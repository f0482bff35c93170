"""Independent reference computations built on scipy.integrate.quad."""

import math

import numpy as np
from scipy import integrate


def rho_moments_quad(x_norm_sq: float, u: float, d: int):
    """``(E[rho], E[rho^2])`` for the posterior ``(1-rho)^(d/2-2) exp(-A(1-rho))``.

    Integrates in ``q = sqrt(1 - rho)`` where the density is ``q^(d-3) exp(-A q^2)``.
    """
    a = 0.5 * x_norm_sq / u
    mode = math.sqrt((d - 3) / (2 * a)) if a > 0 and d > 3 else 0.0
    width = 1.0 / math.sqrt(2 * a) if a > 0 else 1.0
    pts = sorted({min(max(mode + k * width, 1e-9), 1 - 1e-9) for k in (-4, -2, -1, 0, 1, 2, 4)})

    # scale out the peak to keep the integrand O(1)
    log_peak = (d - 3) * math.log(mode) - a * mode * mode if mode > 0 else 0.0

    def dens(q):
        if q == 0.0:
            return 1.0 * math.exp(-log_peak) if d == 3 else 0.0
        return math.exp((d - 3) * math.log(q) - a * q * q - log_peak)

    def moment(f):
        val, _ = integrate.quad(lambda q: dens(q) * f(1 - q * q), 0.0, 1.0, points=pts, epsabs=0, epsrel=1e-13, limit=500)
        return val

    z = moment(lambda r: 1.0)
    return moment(lambda r: r) / z, moment(lambda r: r * r) / z


def stein_oracle(x: np.ndarray, u: float, v: float):
    """``(mu_hat, xi_hat, sigma_hat)`` from quadrature posterior moments."""
    d = x.size
    m1, m2 = rho_moments_quad(float(x @ x), u, d)
    mu_hat = m1 * x
    second = u * m1 * np.eye(d) + m2 * np.outer(x, x)
    sigma = v * np.eye(d) + second - np.outer(mu_hat, mu_hat)
    return mu_hat, float(np.trace(sigma)) / d, sigma
