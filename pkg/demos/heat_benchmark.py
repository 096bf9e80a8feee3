# coding: utf-8

# # Heat equation benchmark
#
# With Phi(r) = r and no noise the scheme reduces to implicit Euler for the
# discrete heat equation.  A single sine mode is an eigenvector of the
# discrete Laplacian, so its amplitude after n steps is (1 + dt lam_1)^-n.

# %%

import math

import numpy as np

from spme_lab.model import CoefFn, PowerLaw, ProblemSpec, XiSpec
from spme_lab.solver import SolverConfig, solve_path

spec = ProblemSpec(1, ((0.0, 1.0),), (127,), 0.1, PowerLaw(1.0),
                   xi=XiSpec("function", CoefFn("sine", (1.0, 1))))
cfg = SolverConfig(dt=1e-4)
tr = solve_path(spec, cfg)

# %%

# Compare against the discrete eigenmode and the continuum decay e^{-pi^2 t}.

g = spec.grid
n = cfg.n_steps(spec.T)
amp = (1 + cfg.dt * g.eigenvalue(1)) ** (-n)
print("discrete amplitude :", amp)
print("continuum e^-pi^2 t:", math.exp(-math.pi**2 * spec.T))
print("max nodal error    :", np.max(np.abs(tr.final - amp * np.sin(np.pi * g.axes[0]))))

# %%

# The recorded norms follow the same decay; L2 of sin(pi x) starts at 1/sqrt(2).

for t, l2, hm1 in list(zip(tr.times, tr.norms["L2"], tr.norms["hm1"]))[::200]:
    print(f"t={t:.3f}  |u|_2={l2:.6f}  |u|_-1={hm1:.6f}")
