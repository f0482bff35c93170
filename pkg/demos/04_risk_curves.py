# %% [markdown]
# # Kullback-Leibler risk curves
#
# Monte Carlo risk of the five predictive densities for `d = 10`, `u = 1` and
# two prediction variances.  All methods see the same draws at every grid
# point, so small differences between curves are resolvable.

# %%
from pathlib import Path

import numpy as np

from shrinkpred import ProblemConfig, risk_curve, uniform_risk
from shrinkpred.output import RiskSeries, render_svg

out_dir = Path("demo_output")
out_dir.mkdir(exist_ok=True)
grid = np.arange(9.0)
methods = ["pu", "e1", "e2", "eb", "ps"]

# %% [markdown]
# Small prediction variance `v = 0.1`.

# %%
cfg = ProblemConfig(10, 1.0, 0.1)
curve = risk_curve(methods, grid, cfg, trials=2000, seed=1)
print("exact uniform risk:", uniform_risk(cfg))
print("||mu|| " + " ".join(f"{m:>8s}" for m in methods))
for k, r in enumerate(grid):
    print(f"{r:6.1f} " + " ".join(f"{curve.values(m)[k]:8.3f}" for m in methods))

# %% [markdown]
# Equal variances `v = u`, plug-ins against the Bayes predictive only.

# %%
cfg2 = ProblemConfig(10, 1.0, 1.0)
curve2 = risk_curve(["pu", "e1", "e2", "ps"], grid, cfg2, trials=2000, seed=1)
for m in ("e1", "e2", "ps"):
    print(m, np.round(curve2.values(m), 3))

# %% [markdown]
# Write both charts.

# %%
for name, c in (("v01", curve), ("v1", curve2)):
    series = [RiskSeries(m, list(c.grid), list(c.values(m)), list(c.std_errs(m))) for m in c.estimates]
    (out_dir / f"risk_{name}.svg").write_text(render_svg(series, error_bars=True, title=f"d=10, u=1, v={c.v:g}"))
print("wrote", sorted(p.name for p in out_dir.glob("*.svg")))
