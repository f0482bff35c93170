# %% [markdown]
# # Two numerical identities
#
# 1. As the prediction horizon `t = 1/v` shrinks, the risk gain of an extended
#    plug-in over the uniform predictive, divided by `t`, tends to half the
#    quadratic-risk gain of the posterior mean.
# 2. The risk gain of the Stein Bayes predictive equals the integral of the
#    quadratic-risk gain over observation precisions from `s` to `s + t`.

# %%
import numpy as np

from shrinkpred import Stein, risk_integration_check, theorem1_derivative_check

# %%
for r in (0.0, 5.0):
    mu = np.zeros(10)
    mu[0] = r
    rows = theorem1_derivative_check(Stein(), mu, s=1.0, t_values=[1e-1, 1e-2, 1e-3, 1e-4], trials=3000, seed=3)
    print(f"||mu|| = {r}, target = {rows[0].target:.4f} +/- {rows[0].target_se:.4f}")
    for row in rows:
        print(f"   t={row.t:.0e} {row.model}: {row.derivative:.4f}  (deviation {row.deviation:+.5f})")

# %%
ic = risk_integration_check(np.zeros(5), s=1.0, t=1.0, n_nodes=16, trials=3000, seed=4)
print(f"prediction gain {ic.lhs:.4f} +/- {ic.lhs_se:.4f}")
print(f"integrated gain {ic.rhs:.4f} +/- {ic.rhs_se:.4f}")
print("gain at each precision node:", np.round(ic.node_values, 3))
