"""Acceptance criteria, one test each; every test reports a PASS/FAIL line.

Heavy Monte Carlo runs use every available core; results do not depend on
the worker count.
"""

import math
import os
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from spme_lab.cli import main
from spme_lab.config import load_config
from spme_lab.estimators import epsilon_sweep, ito_check, monotonicity_check, smoothing_rate_fit, viscosity_convergence
from spme_lab.grid import Grid, gn_check, norm_hminus1, smooth_random_field
from spme_lab.model import CoefFn, PowerLaw, ProblemSpec, XiSpec
from spme_lab.moser import iteration_constants, ladder, smoothing_exponent
from spme_lab.solver import SolverConfig, semi_implicit_step, solve_path

from oracles import gauss_seidel_bisection

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
THREADS = os.cpu_count() or 1


def test_heat_benchmark_matches_eigenmode(report):
    spec = ProblemSpec(1, ((0.0, 1.0),), (127,), 0.1, PowerLaw(1.0),
                       xi=XiSpec("function", CoefFn("sine", (1.0, 1))))
    cfg = SolverConfig(dt=1e-4, p_list=(2.0,), record_hminus1=False)
    t0 = time.perf_counter()
    tr = solve_path(spec, cfg)
    elapsed = time.perf_counter() - t0
    g = spec.grid
    n = cfg.n_steps(spec.T)
    amp = (1 + cfg.dt * g.eigenvalue(1)) ** (-n)
    exact = amp * np.sin(np.pi * g.axes[0])
    discrete_err = np.max(np.abs(tr.final - exact)) / amp
    cont_err = abs(amp / math.exp(-math.pi**2 * 0.1) - 1)
    ok = discrete_err <= 1e-10 and cont_err <= 0.05 and elapsed < 1.0
    assert report("1 heat benchmark", ok,
                  f"eigenmode rel err {discrete_err:.2e}, continuum rel err {cont_err:.3%}, {elapsed:.3f} s")


def test_hminus1_norm_of_sine(report):
    g = Grid.unit(255)
    v = np.sin(np.pi * g.axes[0])
    val = norm_hminus1(g, v)
    target = 1 / (math.pi * math.sqrt(2))
    rel = abs(val / target - 1)
    assert report("2 H^-1 norm of sin(pi x)", rel <= 0.01, f"{val:.6f} vs {target:.6f} (rel {rel:.2e})")


def _random_trajectory(g, rng, n_t=8):
    a = smooth_random_field(g, rng, n_modes=5)
    b = smooth_random_field(g, rng, n_modes=5)
    rates = rng.uniform(0.0, 3.0, 2)
    s = np.linspace(0.0, 1.0, n_t)
    return [math.exp(-rates[0] * t) * a + t * math.exp(-rates[1] * t) * b for t in s], 1.0 / n_t


def test_gagliardo_nirenberg_corpus(report):
    rng = np.random.default_rng(20240611)
    grids = {1: Grid.unit(63), 2: Grid.unit(31, d=2)}
    t0 = time.perf_counter()
    checks = violations = 0
    worst = 0.0
    for d, g in grids.items():
        for _ in range(1000):
            fields, dt = _random_trajectory(g, rng)
            for lam in (1.0, 1.5, 2.0):
                r = gn_check(g, fields, dt, lam, slack=0.05)
                checks += 1
                violations += not r.passed
                worst = max(worst, r.lhs / r.rhs)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 30
    assert report("3 Gagliardo-Nirenberg corpus", ok,
                  f"{violations}/{checks} violations, max lhs/rhs {worst:.3f}, {elapsed:.1f} s")


def test_degenerate_maximum_principle(report):
    spec = ProblemSpec(1, ((0.0, 1.0),), (63,), 0.1, PowerLaw(2.0), xi=XiSpec("random_uniform", low=0.0, high=1.0))
    cfg = SolverConfig(dt=1e-3, p_list=(1.0,), record_hminus1=False, keep_fields=False)
    bad_inf = bad_l1 = 0
    for m in range(100):
        tr = solve_path(spec, cfg, m)
        sup, l1 = tr.norms["inf"], tr.norms["L1"]
        bad_inf += int(np.sum(sup[1:] > sup[:-1]))
        bad_l1 += int(np.sum(l1[1:] > l1[:-1] + 1e-9))
    ok = bad_inf == 0 and bad_l1 == 0
    assert report("4 PME maximum principle", ok, f"sup increases {bad_inf}, L1 increases {bad_l1} over 100 paths")


def test_newton_matches_bisection_oracle(report):
    g = Grid.unit(17)
    spec = ProblemSpec(1, ((0.0, 1.0),), (17,), 0.01, PowerLaw(2.0))
    cfg = SolverConfig(dt=1e-2)
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        rhs = rng.uniform(-1, 1, 17)
        u = semi_implicit_step(rhs, 0.0, spec, cfg, np.zeros(0))
        ref = gauss_seidel_bisection(rhs, cfg.dt, g.h[0], lambda r: abs(r) * r)
        worst = max(worst, float(np.max(np.abs(u - ref))))
    assert report("5 Newton vs bisection oracle", worst <= 1e-8, f"max error {worst:.2e} on 50 rhs")


def test_uniform_in_epsilon_bound(report):
    exp = load_config(CONFIGS / "pme_m2.toml")
    t0 = time.perf_counter()
    res = epsilon_sweep(exp.spec, exp.cfg, 200, exp.eps_list, threads=THREADS)
    elapsed = time.perf_counter() - t0
    means = ", ".join(f"{e.mean:.4f}" for e in res.estimates)
    ok = res.ratio <= 1.5 and elapsed < 300
    assert report("6 uniform-in-epsilon bound", ok, f"ratio {res.ratio:.4f} (means {means}), {elapsed:.0f} s")


def test_smoothing_rate(report):
    exp = load_config(CONFIGS / "smoothing.toml")
    theta = smoothing_exponent(ladder(1, 1, "inf", 2))
    fit = smoothing_rate_fit(exp.spec, exp.cfg, 200, exp.rho_list, threads=THREADS)
    ok = theta == Fraction(2, 3) and -float(theta) <= fit.slope <= 0 and fit.monotone_pathwise
    assert report("7 smoothing rate", ok,
                  f"slope {fit.slope:.3f} CI [{fit.slope_ci[0]:.3f}, {fit.slope_ci[1]:.3f}] "
                  f"in [-{theta}, 0], pathwise monotone {fit.monotone_pathwise}")


def test_ito_identity_refinement(report):
    exp = load_config(CONFIGS / "ito_linear.toml")
    ref = ito_check(exp.spec, exp.cfg, 200, p=2.0, levels=2, threads=THREADS)
    r = ref.ratios[0]
    ok = 1.2 <= r <= 2.8
    means = ", ".join(f"dt={dt:g}: {e.mean:.3e}" for dt, e in zip(ref.dts, ref.estimates))
    assert report("8 Ito identity residual", ok, f"ratio {r:.3f} ({means})")


def test_viscosity_cauchy(report):
    eps = [0.1 / 2**j for j in range(5)]
    cfg = SolverConfig(dt=1e-3)
    bump = XiSpec("function", CoefFn("bump", (1.0,)))
    pme = ProblemSpec(1, ((0.0, 1.0),), (63,), 0.2, PowerLaw(2.0), xi=bump)
    heat = ProblemSpec(1, ((0.0, 1.0),), (63,), 0.2, PowerLaw(1.0), xi=bump)
    a = viscosity_convergence(pme, cfg, 1, eps)
    b = viscosity_convergence(heat, cfg, 1, eps)
    ok = a.strictly_decreasing and bool(np.all((b.ratios >= 2.5) & (b.ratios <= 5.5)))
    assert report("9 viscosity Cauchy property", ok,
                  f"PME ratios {np.round(a.ratios, 3).tolist()}, heat ratios {np.round(b.ratios, 3).tolist()}")


def test_moser_arithmetic(report):
    lad = ladder(1, 1, "inf", 2)
    exact = (lad.mu_conj == 1 and lad.gamma_bar == 3 and lad.delta == Fraction(3, 2)
             and [lad.p(n) for n in (1, 2, 3)] == [4, 13, 40] and lad.n0 == 1 and lad.kappa == 8
             and lad.theta_tilde == Fraction(2, 3))
    ic = iteration_constants(lad, 10.0, 40)
    p20 = ic.products[ic.n == 20][0]
    p40 = ic.products[ic.n == 40][0]
    gap = abs(p40 - p20) / p20
    ok = exact and ic.n[0] == 1 and gap < 1e-6
    assert report("10 Moser arithmetic", ok, f"exact values {exact}, |P40 - P20| / P20 = {gap:.2e} (P40 = {p40:.6g})")


def test_monotonicity_inequality(report):
    exp = load_config(CONFIGS / "monotonicity.toml")
    r64 = monotonicity_check(exp.spec, Grid.unit(63), 500, seed=1)
    r128 = monotonicity_check(exp.spec, Grid.unit(127), 500, seed=1)
    phi_max = max(r64.phi_term_max, r128.phi_term_max)
    drift = abs(r128.fitted_N / r64.fitted_N - 1)
    ok = phi_max <= 1e-12 and drift <= 0.2
    assert report("11 monotonicity", ok,
                  f"max Phi-term {phi_max:.2e}, fitted N {r64.fitted_N:.4f} / {r128.fitted_N:.4f} (drift {drift:.2%})")


def test_estimates_are_byte_identical(report, tmp_path, capsys):
    outcomes = []
    for cmd, cfg_name, extra in [("sweep-epsilon", "pme_m2.toml", ["--paths", "16"]),
                                 ("smoothing", "smoothing.toml", ["--paths", "12"]),
                                 ("ito-check", "ito_linear.toml", ["--paths", "12"])]:
        blobs = []
        for threads in (1, 2, 1):
            out = tmp_path / f"{cmd}-{threads}-{len(blobs)}"
            code = main(["--out", str(out), "--threads", str(threads), cmd, str(CONFIGS / cfg_name)] + extra)
            assert code == 0
            (rd,) = out.iterdir()
            blobs.append((rd / "estimates.csv").read_bytes())
        outcomes.append((cmd, all(b == blobs[0] for b in blobs)))
    capsys.readouterr()
    ok = all(same for _, same in outcomes)
    assert report("12 deterministic estimates.csv", ok,
                  ", ".join(f"{c}: {'identical' if s else 'DIFFERENT'}" for c, s in outcomes))
