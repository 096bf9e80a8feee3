# coding: utf-8

# # Parabolic Gagliardo-Nirenberg embedding
#
# For q = 2 (d + lam) / d the check compares int |v|_q^q dt with
# N(lam)^q (int |grad v|^2 dt) (sup |v|_lam^lam)^(2/d) along a trajectory.

# %%

import numpy as np

from spme_lab.grid import Grid, gn_check, smooth_random_field
from spme_lab.model import CoefFn, PowerLaw, ProblemSpec, XiSpec
from spme_lab.solver import SolverConfig, solve_path

spec = ProblemSpec(1, ((0.0, 1.0),), (255,), 0.2, PowerLaw(2.0),
                   xi=XiSpec("function", CoefFn("sine", (1.0, 1))))
cfg = SolverConfig(dt=1e-3)
tr = solve_path(spec, cfg)
for lam in (1.0, 1.5, 2.0):
    r = gn_check(spec.grid, list(tr.fields[1:]), cfg.dt, lam)
    print(f"lam={lam}: lhs={r.lhs:.4g}  rhs={r.rhs:.4g}  {'ok' if r.passed else 'VIOLATED'}")

# %%

# The same check on random smooth fields in two dimensions.

g = Grid.unit(31, d=2)
rng = np.random.default_rng(0)
fields = [smooth_random_field(g, rng) for _ in range(5)]
r = gn_check(g, fields, 0.2, 1.5)
print(f"d=2: lhs/rhs = {r.lhs / r.rhs:.3f}")
