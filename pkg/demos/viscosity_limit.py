# coding: utf-8

# # Vanishing viscosity
#
# D_j = int |u^{eps_j} - u^{eps_{j+1}}|_{-1}^2 dt for eps halving each level.
# For the heat equation D_j drops by about 4 per halving.

# %%

from spme_lab.estimators import viscosity_convergence
from spme_lab.model import CoefFn, PowerLaw, ProblemSpec, XiSpec
from spme_lab.solver import SolverConfig

eps = [0.1 / 2**j for j in range(5)]
bump = XiSpec("function", CoefFn("bump", (1.0,)))
for m in (2.0, 1.0):
    spec = ProblemSpec(1, ((0.0, 1.0),), (63,), 0.2, PowerLaw(m), xi=bump)
    res = viscosity_convergence(spec, SolverConfig(dt=1e-3), 1, eps)
    print(f"m={m:g}: D = {[f'{d:.3e}' for d in res.D]}  ratios = {[round(float(r), 2) for r in res.ratios]}")
