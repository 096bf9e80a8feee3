# coding: utf-8

# # Ito formula for |u|_p^p along the scheme
#
# Per step, |u_{n+1}|_p^p - |u_n|_p^p should equal the drift, the quadratic
# variation correction and the martingale increment up to O(dt).  The
# cumulative residual therefore halves when dt halves.

# %%

from dataclasses import replace
from pathlib import Path

from spme_lab.config import load_config
from spme_lab.estimators import ito_check, ito_identity_residual
from spme_lab.solver import solve_path

exp = load_config(Path(__file__).resolve().parent.parent / "configs" / "ito_linear.toml")
tr = solve_path(exp.spec, replace(exp.cfg, ito_p=(2.0,)))
res = ito_identity_residual(tr, 2.0)
print("cumulative residual on one path:", res.cumulative)

# %%

ref = ito_check(exp.spec, exp.cfg, 30, p=2.0, levels=3)
for dt, e in zip(ref.dts, ref.estimates):
    print(f"dt={dt:g}  mean residual {e.mean:.3e} +- {e.stderr:.1e}")
print("ratios:", [round(r, 3) for r in ref.ratios])
