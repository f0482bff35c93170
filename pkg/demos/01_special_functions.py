# %% [markdown]
# # The incomplete-gamma kernel behind Stein's prior
#
# Every Stein-prior quantity reduces to ratios of
# `phi_d(a) = a^(2-d) * gamma(d/2 - 1, a^2/2)`.  This walk-through checks the
# building blocks against textbook values.

# %%
import math

import numpy as np

from shrinkpred.special import adaptive_integrate, build_quadrature, lower_incomplete_gamma_regularized, phi, phi_at_zero

# %% [markdown]
# Regularized lower incomplete gamma: two closed forms.

# %%
print("P(1, 1)     =", lower_incomplete_gamma_regularized(1.0, 1.0), " vs 1 - 1/e =", 1 - math.exp(-1))
print("P(1/2, 1/2) =", lower_incomplete_gamma_regularized(0.5, 0.5), " vs erf(1/sqrt 2) =", math.erf(2**-0.5))

# %% [markdown]
# `phi_d` near zero is finite; the library switches to a short series there.

# %%
for d in (3, 4, 10, 100):
    print(f"d={d:3d}  phi(0)={phi(d, 0.0):.6e}  phi(1e-8)={phi(d, 1e-8):.6e}  limit={phi_at_zero(d):.6e}")

# %% [markdown]
# Far out, `phi_d(a) a^(d-2)` saturates at `Gamma(d/2 - 1)`.

# %%
a = np.array([1.0, 5.0, 10.0, 20.0])
for d in (3, 10):
    print(d, phi(d, a) * a ** (d - 2) / math.gamma(d / 2 - 1))

# %% [markdown]
# Adaptive Gauss-Legendre: a rule tailored to a peaked integrand on (0, 1).

# %%
f = lambda r: (1 - r) ** 3 * np.exp(-2 * (1 - r))
rule = build_quadrature(order=20, integrand=f)
print("nodes:", rule.order, " integral:", rule.integrate(f), " gamma(4,2)/16:", lower_incomplete_gamma_regularized(4, 2) * 6 / 16)
print("sharp bump:", adaptive_integrate(lambda r: np.exp(-((r - 0.3) ** 2) / 1e-4), 0, 1, breakpoints=(0.3,)), math.sqrt(math.pi * 1e-4))
