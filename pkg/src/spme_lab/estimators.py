"""Monte Carlo moments and path-wise checks on simulated trajectories.

Paths are independent given ``(seed, path_index)``, so they are mapped over a
process pool and reduced in path-index order; results do not depend on the
number of workers.  Sweeps over ``epsilon`` or ``rho`` reuse the same path
indices and hence the same noise (common random numbers).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .grid import Grid, centered_gradient, norm_hminus1, norm_lp, smooth_random_field, solve_poisson
from .model import initial_field, stratonovich_to_ito
from .moser import ladder, smoothing_exponent
from .solver import SolverError, solve_path


class PathError(RuntimeError):
    """A trajectory failed; carries the path index so nothing is dropped silently."""

    def __init__(self, path_index, message):
        super().__init__(path_index, message)
        self.path_index = path_index
        self.message = message

    def __str__(self):
        return f"path {self.path_index} failed: {self.message}"


# ---------------------------------------------------------------------------
# path statistics


@dataclass(frozen=True)
class SupLp:
    p: float

    @property
    def name(self):
        return f"sup_L{self.p:g}"

    def value(self, tr):
        return float(np.max(tr.norms[f"L{self.p:g}"]))


@dataclass(frozen=True)
class SupInf:
    @property
    def name(self):
        return "sup_inf"

    def value(self, tr):
        return float(np.max(tr.norms["inf"]))


@dataclass(frozen=True)
class SupInfWindow:
    """``max`` of the node values over ``[rho, T] x Q``."""

    rho: float

    @property
    def name(self):
        return f"sup_inf_window_{self.rho:g}"

    def value(self, tr):
        mask = tr.times >= self.rho - 1e-12 * max(1.0, tr.times[-1])
        return float(np.max(tr.norms["inf"][mask]))


@dataclass(frozen=True)
class HminusOne:
    @property
    def name(self):
        return "sup_hm1"

    def value(self, tr):
        return float(np.max(tr.norms["hm1"]))


@dataclass(frozen=True)
class TerminalLp:
    p: float

    @property
    def name(self):
        return f"terminal_L{self.p:g}"

    def value(self, tr):
        return float(tr.norms[f"L{self.p:g}"][-1])


def _config_for(cfg, stats):
    ps = set(cfg.p_list)
    for s in stats:
        if isinstance(s, (SupLp, TerminalLp)):
            ps.add(float(s.p))
    hm1 = any(isinstance(s, HminusOne) for s in stats)
    return replace(cfg, p_list=tuple(sorted(ps)), record_hminus1=hm1, keep_fields=False, record_every=1)


# ---------------------------------------------------------------------------
# parallel map


def map_paths(fn, items, threads=1):
    """``[fn(x) for x in items]``, optionally on a process pool; order is preserved."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


def _run(spec, cfg, path_index):
    try:
        return solve_path(spec, cfg, path_index)
    except (SolverError, FloatingPointError, ValueError) as exc:
        raise PathError(path_index, str(exc)) from None


def _stats_worker(job):
    specs, cfg, stats, path_index = job
    return np.array([[s.value(_tr) for s in stats]
                     for _tr in (_run(sp, cfg, path_index) for sp in specs)])


# ---------------------------------------------------------------------------
# estimates


@dataclass(frozen=True)
class McEstimate:
    statistic: str
    M: int
    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    seed: int
    values: np.ndarray | None = None

    @classmethod
    def from_values(cls, statistic, values, seed, keep=True):
        v = np.asarray(values, dtype=float)
        if v.size < 2:
            raise ValueError("a Monte Carlo estimate needs M >= 2 paths")
        mean = float(np.mean(v))
        se = float(np.std(v, ddof=1) / math.sqrt(v.size))
        return cls(statistic, int(v.size), mean, se, mean - 1.96 * se, mean + 1.96 * se, seed,
                   v if keep else None)

    def row(self, param=""):
        return [self.statistic, param, self.M, repr(self.mean), repr(self.stderr),
                repr(self.ci_low), repr(self.ci_high), self.seed]


ESTIMATE_HEADER = ["statistic", "param", "M", "mean", "stderr", "ci_low", "ci_high", "seed"]


def path_statistics(specs, cfg, M, stats, threads=1):
    """Array ``(M, len(specs), len(stats))`` of per-path statistics (not raised to alpha)."""
    if M < 1:
        raise ValueError("M must be positive")
    cfg = _config_for(cfg, stats)
    jobs = [(tuple(specs), cfg, tuple(stats), m) for m in range(M)]
    return np.array(map_paths(_stats_worker, jobs, threads))


def mc_moment(spec, cfg, M, statistic, threads=1, keep_values=True):
    """Estimate ``E[statistic(u)^alpha]`` from ``M`` paths."""
    if M < 2:
        raise ValueError("M must be at least 2")
    vals = path_statistics([spec], cfg, M, [statistic], threads)[:, 0, 0]
    return McEstimate.from_values(statistic.name, vals**spec.alpha, spec.seed, keep_values)


@dataclass(frozen=True)
class SweepResult:
    eps_list: tuple
    estimates: tuple
    ratio: float


def epsilon_sweep(spec, cfg, M, eps_list, threads=1):
    """``E ||u^eps||_{L_inf(Q_T)}^2`` per ``eps`` on common noise, and the max/min ratio."""
    eps_list = tuple(float(e) for e in eps_list)
    if not eps_list or any(e <= 0 for e in eps_list) or any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be positive and strictly decreasing")
    if M < 2:
        raise ValueError("M must be at least 2")
    specs = [spec.with_epsilon(e) for e in eps_list]
    vals = path_statistics(specs, cfg, M, [SupInf()], threads)[:, :, 0] ** 2
    ests = tuple(McEstimate.from_values("sup_inf", vals[:, j], spec.seed) for j in range(len(eps_list)))
    means = [e.mean for e in ests]
    ratio = max(means) / min(means) if min(means) > 0 else (1.0 if max(means) == 0 else math.inf)
    return SweepResult(eps_list, ests, ratio)


@dataclass(frozen=True)
class RateFit:
    rho: np.ndarray
    estimates: tuple
    slope: float
    slope_ci: tuple
    theta_tilde: object
    blow_up: bool
    monotone_pathwise: bool

    @property
    def reference(self):
        return None if self.theta_tilde is None else -float(self.theta_tilde)

    def rows(self):
        return [[repr(float(r)), repr(e.mean), repr(e.stderr)] for r, e in zip(self.rho, self.estimates)]


def _loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def reference_exponent(spec, m_tilde=None):
    """``theta~`` for ``alpha = 2``; None when ``m~ = m - 1`` is not positive."""
    mt = spec.phi.growth - 1.0 if m_tilde is None else m_tilde
    if not mt > 0:
        return None
    return smoothing_exponent(ladder(spec.d, mt, spec.mu, 2))


def smoothing_rate_fit(spec, cfg, M, rho_list, threads=1, n_boot=400, m_tilde=None):
    """Fit ``log E ||u||^2_{L_inf((rho, T) x Q)}`` against ``log rho``.

    The slope CI comes from a bootstrap over paths with a generator seeded by
    the problem seed.  Non-finite estimates set ``blow_up`` and are left out of the fit.
    """
    rho = np.asarray(rho_list, dtype=float)
    if rho.size < 2 or np.any(np.diff(rho) <= 0):
        raise ValueError("rho_list needs at least two strictly increasing values")
    if rho[0] <= 0 or rho[-1] >= spec.T / 2:
        raise ValueError("rho values must lie in (0, T/2)")
    if M < 2:
        raise ValueError("M must be at least 2")
    stats = [SupInfWindow(r) for r in rho]
    vals = path_statistics([spec], cfg, M, stats, threads)[:, 0, :] ** 2
    ests = tuple(McEstimate.from_values(s.name, vals[:, j], spec.seed) for j, s in enumerate(stats))
    means = np.array([e.mean for e in ests])
    ok = np.isfinite(means) & (means > 0)
    blow_up = not bool(np.all(np.isfinite(means)))
    monotone = bool(np.all(np.diff(vals, axis=1) <= 0))
    if ok.sum() >= 2:
        slope = _loglog_slope(rho[ok], means[ok])
        rng = np.random.Generator(np.random.Philox(spec.seed))
        boots = []
        for _ in range(n_boot):
            idx = rng.integers(0, M, M)
            mb = vals[idx][:, ok].mean(axis=0)
            if np.all(mb > 0):
                boots.append(_loglog_slope(rho[ok], mb))
        ci = (float(np.percentile(boots, 2.5)), float(np.percentile(boots, 97.5))) if boots else (math.nan, math.nan)
    else:
        slope, ci = math.nan, (math.nan, math.nan)
    return RateFit(rho, ests, slope, ci, reference_exponent(spec, m_tilde), blow_up, monotone)


# ---------------------------------------------------------------------------
# Itô identity


@dataclass(frozen=True)
class ItoResidual:
    per_step: np.ndarray
    cumulative: float


def ito_identity_residual(trajectory, p, qv="expected"):
    """Per-step defect of the discrete Itô formula for ``||u||_p^p``.

    ``residual_n = ||u_{n+1}||_p^p - ||u_n||_p^p - drift_n - qv_n - martingale_n``.
    ``qv="expected"`` uses ``dt sum_k |M^k|^2``, ``"realized"`` uses ``|sum_k M^k dW^k|^2``.
    """
    p = float(p)
    if p < 2:
        raise ValueError("the identity is checked for p >= 2")
    if p not in trajectory.ito:
        raise ValueError(f"trajectory was not recorded with Itô terms for p={p:g}")
    t = trajectory.ito[p]
    key = {"expected": "qv_expected", "realized": "qv_realized"}[qv]
    res = np.diff(t["lp_pow"]) - t["drift"] - t[key] - t["martingale"]
    return ItoResidual(res, float(np.sum(res)))


def _ito_worker(job):
    spec, cfg, p, qv, path_index = job
    return ito_identity_residual(_run(spec, cfg, path_index), p, qv).cumulative


@dataclass(frozen=True)
class ItoRefinement:
    dts: tuple
    estimates: tuple
    ratios: tuple


def ito_check(spec, cfg, M, p=2.0, levels=2, qv="expected", threads=1):
    """Mean cumulative residual at ``dt, dt/2, ...`` on one Brownian path per index.

    The coarse levels sum fine increments, so every level sees the same noise.
    """
    if levels < 1:
        raise ValueError("levels must be positive")
    base_sub = 2 ** (levels - 1)
    ests, dts = [], []
    for lv in range(levels):
        c = replace(cfg, dt=cfg.dt / 2**lv, noise_substeps=cfg.noise_substeps * base_sub // 2**lv,
                    ito_p=(float(p),), keep_fields=False, record_hminus1=False)
        vals = map_paths(_ito_worker, [(spec, c, float(p), qv, m) for m in range(M)], threads)
        ests.append(McEstimate.from_values(f"ito_residual_L{p:g}", vals, spec.seed))
        dts.append(c.dt)
    ratios = tuple(a.mean / b.mean if b.mean else math.inf for a, b in zip(ests, ests[1:]))
    return ItoRefinement(tuple(dts), tuple(ests), ratios)


# ---------------------------------------------------------------------------
# moment bound with data functional


@dataclass(frozen=True)
class GronwallResult:
    lhs: McEstimate
    rhs: float
    fitted_N: float
    consistent: bool


def data_functional(spec, cfg, p, alpha, xi_moment):
    """``E||xi||_p^alpha + (int_0^T ||V1||_p^p + ||V2||_p^p dt)^(alpha/p)``."""
    g = spec.grid
    co = spec.coeffs
    n = cfg.n_steps(spec.T)
    total = 0.0
    for k in range(n):
        t = k * cfg.dt
        V1 = np.abs(co.f(t, g.coords, g.box))
        V2 = np.sqrt(sum(gk(t, g.coords, g.box) ** 2 for gk in co.g)) if co.g else np.zeros(g.shape)
        total += cfg.dt * (norm_lp(g, V1, p) ** p + norm_lp(g, V2, p) ** p)
    return xi_moment + total ** (alpha / p)


def gronwall_check(spec, cfg, M, p, alpha, threads=1):
    """Compare ``E sup_t ||u_t||_p^alpha`` with the data functional; ``fitted_N = lhs / rhs``."""
    if M < 2:
        raise ValueError("M must be at least 2")
    vals = path_statistics([spec], cfg, M, [SupLp(p)], threads)[:, 0, 0]
    lhs = McEstimate.from_values(f"sup_L{p:g}", vals**alpha, spec.seed)
    g = spec.grid
    if spec.xi.is_random:
        xi_m = float(np.mean([norm_lp(g, initial_field(spec, g, m), p) ** alpha for m in range(M)]))
    else:
        xi_m = norm_lp(g, initial_field(spec, g, 0), p) ** alpha
    rhs = data_functional(spec, cfg, p, alpha, xi_m)
    if rhs == 0:
        return GronwallResult(lhs, 0.0, 0.0 if lhs.mean == 0 else math.inf, lhs.mean == 0)
    return GronwallResult(lhs, rhs, lhs.mean / rhs, True)


# ---------------------------------------------------------------------------
# monotonicity of the operator pair


@dataclass(frozen=True)
class MonotonicityResult:
    phi_term_max: float
    fitted_N: float
    fitted_N_linear: float
    n_pairs: int


def _hm1_sq(g, v):
    return norm_hminus1(g, v) ** 2


def monotonicity_terms(spec, g, phi_f, psi_f, t=0.0):
    """``(phi_term, full_lhs, linear_lhs, ||phi - psi||^2_{H^-1})`` for one pair.

    ``full_lhs = 2 <A(phi) - A(psi), w>_{H^-1} + sum_k ||M^k(phi) - M^k(psi)||^2_{H^-1}``
    with ``w = phi - psi``; ``linear_lhs`` drops the ``Phi`` part.
    """
    s = stratonovich_to_ito(spec)
    co = s.coeffs
    w = phi_f - psi_f
    if not np.any(w):
        return 0.0, 0.0, 0.0, 0.0
    phi_term = -g.inner(s.phi(phi_f) - s.phi(psi_f), w)
    z = solve_poisson(g, w)
    kappa = s.epsilon + s.ito_laplacian_coefficient(t)
    lower = np.zeros(g.shape)
    for bi, gr in zip(co.drift_vector(g.d), centered_gradient(g, w)):
        if not bi.is_zero:
            lower += bi(t, g.coords, g.box) * gr
    if not co.c.is_zero:
        lower += co.c(t, g.coords, g.box) * w
    linear = 2.0 * (-kappa * g.inner(w, w) + g.inner(lower, z))
    sig = co.sigma(t)
    if sig:
        linear += sum(_hm1_sq(g, sig * gr) for gr in centered_gradient(g, w))
    for nu in co.nu:
        if not nu.is_zero:
            linear += _hm1_sq(g, nu(t, g.coords, g.box) * w)
    return phi_term, linear + 2.0 * phi_term, linear, _hm1_sq(g, w)


def random_pair(g, rng, n_modes=6):
    """Two smooth fields with random amplitudes; independent of the grid resolution."""
    a, b = rng.uniform(0.1, 3.0, size=2)
    return (a * smooth_random_field(g, rng, n_modes=n_modes),
            b * smooth_random_field(g, rng, n_modes=n_modes))


def monotonicity_check(spec, g, n_pairs, seed=None, n_modes=6):
    """Largest ``Phi``-term and largest ratio ``lhs / ||phi - psi||^2_{H^-1}`` over random pairs."""
    if not isinstance(g, Grid):
        raise TypeError("g must be a Grid")
    rng = np.random.Generator(np.random.Philox(spec.seed if seed is None else seed))
    phi_max, n_full, n_lin = -math.inf, -math.inf, -math.inf
    for _ in range(n_pairs):
        phi_f, psi_f = random_pair(g, rng, n_modes)
        pt, full, lin, den = monotonicity_terms(spec, g, phi_f, psi_f)
        phi_max = max(phi_max, pt)
        if den > 0:
            n_full = max(n_full, full / den)
            n_lin = max(n_lin, lin / den)
    return MonotonicityResult(phi_max, n_full, n_lin, n_pairs)


# ---------------------------------------------------------------------------
# vanishing viscosity


@dataclass(frozen=True)
class ViscosityResult:
    eps_list: tuple
    D: np.ndarray
    stderr: np.ndarray

    @property
    def ratios(self):
        return self.D[:-1] / self.D[1:]

    @property
    def strictly_decreasing(self):
        return bool(np.all(np.diff(self.D) < 0))


def _viscosity_worker(job):
    specs, cfg, path_index = job
    trs = [_run(sp, cfg, path_index) for sp in specs]
    g = specs[0].grid
    out = []
    for a, b in zip(trs, trs[1:]):
        diff = a.fields[1:] - b.fields[1:]
        out.append(cfg.dt * sum(_hm1_sq(g, d) for d in diff))
    return np.array(out)


def viscosity_convergence(spec, cfg, M, eps_list, threads=1):
    """Cauchy differences ``D_j = E sum_n dt ||u^{eps_j}_n - u^{eps_{j+1}}_n||^2_{H^-1}``."""
    eps_list = tuple(float(e) for e in eps_list)
    if len(eps_list) < 2 or any(e < 0 for e in eps_list) or any(a < b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must hold at least two non-increasing, non-negative values")
    cfg = replace(cfg, record_every=1, keep_fields=True, p_list=(), record_hminus1=False, ito_p=())
    specs = tuple(spec.with_epsilon(e) for e in eps_list)
    vals = np.array(map_paths(_viscosity_worker, [(specs, cfg, m) for m in range(M)], threads))
    se = vals.std(axis=0, ddof=1) / math.sqrt(M) if M > 1 else np.zeros(vals.shape[1])
    return ViscosityResult(eps_list, vals.mean(axis=0), se)
