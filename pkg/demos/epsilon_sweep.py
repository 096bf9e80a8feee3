# coding: utf-8

# # Boundedness uniform in the viscosity
#
# The porous medium equation (m = 2) is regularised by adding eps * Delta u.
# Every eps level reuses the same Brownian paths, so differences between the
# levels are not Monte Carlo noise.  The max/min ratio of E sup|u|^2 across
# eps stays close to 1.

# %%

from pathlib import Path

from spme_lab.config import load_config
from spme_lab.estimators import epsilon_sweep

exp = load_config(Path(__file__).resolve().parent.parent / "configs" / "pme_m2.toml")
res = epsilon_sweep(exp.spec, exp.cfg, 20, exp.eps_list)

# %%

for eps, e in zip(res.eps_list, res.estimates):
    print(f"eps={eps:8.0e}  E sup|u|^2 = {e.mean:.5f} +- {e.stderr:.1e}")
print("max/min ratio:", round(res.ratio, 5))
