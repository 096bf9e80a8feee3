"""Semi-implicit Euler-Maruyama time stepping.

One step solves the monotone system

    u+ - dt Delta_h (Phi(u+) + kappa u+) = rhs,
    rhs = u + dt (b.grad_h u + c u + f) + sigma grad_h u . d beta~
          + sum_k (nu_k u + g_k) dw_k,

with ``kappa = eps + sigma^2 / 2`` after the Itô conversion.  Drift is
implicit, noise explicit, transport uses centred differences.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve, solve_banded
from scipy.sparse import diags
from scipy.sparse.linalg import spsolve

from .grid import Grid, centered_gradient, forward_differences, norm_hminus1, norm_lp
from .model import initial_field, stratonovich_to_ito
from .noise import NoiseModel


class SolverError(RuntimeError):
    """Base class for time-stepping failures."""


class ConvergenceError(SolverError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class StepError(SolverError):
    def __init__(self, message, time, residual=None):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time
        self.residual = residual


class DataError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    jacobian_floor: float = 1e-12
    scheme: str = "fd"
    n_modes: int | None = None
    record_every: int = 1
    p_list: tuple = (2.0,)
    record_hminus1: bool = True
    ito_p: tuple = ()
    noise_substeps: int = 1
    keep_fields: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("fd", "galerkin"):
            raise ValueError("scheme must be 'fd' or 'galerkin'")
        if self.scheme == "galerkin" and not (self.n_modes and self.n_modes >= 1):
            raise ValueError("galerkin scheme needs n_modes >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        object.__setattr__(self, "p_list", tuple(float(p) for p in self.p_list))
        object.__setattr__(self, "ito_p", tuple(float(p) for p in self.ito_p))

    def n_steps(self, T):
        n = int(round(T / self.dt))
        if abs(n * self.dt - T) > 1e-12 * max(1.0, T):
            raise ValueError(f"T={T} is not a multiple of dt={self.dt}")
        return n


@dataclass
class Trajectory:
    """One simulated path.

    ``norms`` maps ``"L{p}"``, ``"inf"`` and ``"hm1"`` to per-step series of
    length ``n_steps + 1``; fields are thinned by ``record_every``.
    """

    times: np.ndarray
    norms: dict
    newton_iters: np.ndarray
    record_times: np.ndarray
    fields: np.ndarray | None
    dt: float
    path_index: int
    ito: dict = field(default_factory=dict)

    @property
    def final(self):
        return None if self.fields is None else self.fields[-1]

    def write_csv(self, path):
        keys = [k for k in self.norms if k.startswith("L")] + [k for k in ("inf", "hm1") if k in self.norms]
        names = ["norm_" + k[1:] if k.startswith("L") else "norm_" + k for k in keys]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + names + ["newton_iters"])
            for n, t in enumerate(self.times):
                it = 0 if n == 0 else int(self.newton_iters[n - 1])
                w.writerow([repr(float(t))] + [repr(float(self.norms[k][n])) for k in keys] + [it])


# ---------------------------------------------------------------------------
# monotone system and Newton


class MonotoneSystem:
    """``u -> u - dt Delta_h Psi(u) - rhs`` with non-decreasing ``Psi``."""

    def __init__(self, grid, dt, psi, dpsi, rhs, floor=1e-12):
        self.grid = grid
        self.dt = dt
        self.psi = psi
        self.dpsi = dpsi
        self.rhs = rhs
        self.floor = floor
        self._h2 = grid.h[0] ** 2 if grid.d == 1 else None

    def laplacian(self, w):
        if self.grid.d == 1:
            out = -2.0 * w
            out[1:] += w[:-1]
            out[:-1] += w[1:]
            return out / self._h2
        return (self.grid.laplacian_matrix @ w.ravel()).reshape(w.shape)

    def residual(self, u):
        return u - self.dt * self.laplacian(self.psi(u)) - self.rhs

    def solve_jacobian(self, u, r):
        """Solve ``(I - dt Delta_h diag(Psi'(u))) du = r``."""
        D = np.maximum(self.dpsi(u), self.floor)
        if self.grid.d == 1:
            k = self.dt / self._h2
            n = u.size
            ab = np.empty((3, n))
            ab[0, 1:] = -k * D[1:]
            ab[1] = 1.0 + 2.0 * k * D
            ab[2, :-1] = -k * D[:-1]
            return solve_banded((1, 1), ab, r, overwrite_ab=True, check_finite=False)
        J = diags(np.ones(u.size)) - self.dt * self.grid.laplacian_matrix @ diags(D.ravel())
        return spsolve(J.tocsc(), r.ravel()).reshape(u.shape)

    def norm(self, r):
        return float(np.sqrt(np.sum(r * r)))


class GalerkinSystem:
    """The monotone system projected on the leading ``n_modes`` sine modes.

    Unknowns are mode coefficients ``a`` with ``u = S a``; ``S`` has
    Euclidean-orthonormal eigenvectors of ``-Delta_h`` as columns.
    """

    def __init__(self, basis, eigs, dt, psi, dpsi, rhs, floor=1e-12):
        self.S = basis
        self.lam = eigs
        self.dt = dt
        self.psi = psi
        self.dpsi = dpsi
        self.shape = rhs.shape
        self.rhs = basis.T @ rhs.ravel()
        self.floor = floor

    def field(self, a):
        return (self.S @ a).reshape(self.shape)

    def residual(self, a):
        return a + self.dt * self.lam * (self.S.T @ self.psi(self.S @ a)) - self.rhs

    def solve_jacobian(self, a, r):
        D = np.maximum(self.dpsi(self.S @ a), self.floor)
        J = np.eye(a.size) + self.dt * self.lam[:, None] * (self.S.T @ (D[:, None] * self.S))
        return lu_solve(lu_factor(J, check_finite=False), r, check_finite=False)

    def norm(self, r):
        return float(np.sqrt(np.sum(r * r)))


def newton_solve(system, u_init, cfg):
    """Damped Newton for a monotone system.

    Stops when ``||residual||_2 <= newton_tol (1 + ||rhs||_2)``; a step is
    halved while it increases the residual.  Returns ``(u, iterations)``.
    """
    u = np.array(u_init, dtype=float)
    r = system.residual(u)
    nr = system.norm(r)
    target = cfg.newton_tol * (1.0 + system.norm(system.rhs))
    it = 0
    while nr > target:
        if it >= cfg.newton_max_iter:
            raise ConvergenceError(f"Newton did not converge in {it} iterations (residual {nr:.3e})", nr)
        du = system.solve_jacobian(u, -r)
        step = 1.0
        while True:
            un = u + step * du
            rn = system.residual(un)
            nrn = system.norm(rn)
            if nrn < nr or step < 2.0**-20:
                break
            step *= 0.5
        u, r, nr = un, rn, nrn
        it += 1
    return u, it


# ---------------------------------------------------------------------------
# discretisation context


def sine_basis(grid, n_modes):
    """Orthonormal (Euclidean) sine modes ordered by eigenvalue, and the eigenvalues."""
    if not 1 <= n_modes <= grid.size:
        raise ValueError(f"n_modes must lie in [1, {grid.size}], got {n_modes}")
    idx = grid.mode_order[:n_modes]
    cols, lam = [], []
    for k in idx:
        v = grid.sine_mode(k).ravel()
        cols.append(v / np.linalg.norm(v))
        lam.append(grid.eigenvalue(k))
    return np.column_stack(cols), np.array(lam)


def galerkin_project(g, v, n_modes):
    """Orthogonal projection on the first ``n_modes`` discrete sine modes."""
    S, _ = sine_basis(g, n_modes)
    v = g.check(v)
    return (S @ (S.T @ v.ravel())).reshape(g.shape)


class _Context:
    """Coefficients evaluated on the grid, cached when time-independent."""

    def __init__(self, spec, cfg):
        self.spec = stratonovich_to_ito(spec)
        self.cfg = cfg
        self.grid = Grid(spec.nodes, spec.box)
        self.X = self.grid.coords
        co = self.spec.coeffs
        fns = list(co.drift_vector(spec.d)) + [co.c, co.f] + list(co.nu) + list(co.g)
        self.static = all(fn.omega == 0 for fn in fns) and co.sigma.omega == 0
        self.has_transport = not co.sigma.is_zero
        self._cache = None
        phi = self.spec.phi
        self.phi = phi
        self.basis = None
        if cfg.scheme == "galerkin":
            self.basis, self.eigs = sine_basis(self.grid, cfg.n_modes)

    def coefficients(self, t):
        if self.static and self._cache is not None:
            return self._cache
        s, X, box = self.spec, self.X, self.spec.box
        co = s.coeffs
        b = [bi for bi in co.drift_vector(s.d) if not bi.is_zero]
        vals = {
            "b": None if not b else np.array([bi(t, X, box) for bi in co.drift_vector(s.d)]),
            "c": None if co.c.is_zero else co.c(t, X, box),
            "f": None if co.f.is_zero else co.f(t, X, box),
            "nu": [None if nu.is_zero else nu(t, X, box) for nu in co.nu],
            "g": [None if g.is_zero else g(t, X, box) for g in co.g],
            "sigma": co.sigma(t),
            "kappa": s.epsilon + s.ito_laplacian_coefficient(t),
        }
        if self.static:
            self._cache = vals
        return vals

    def noise_model(self, n_steps):
        return NoiseModel(self.spec.d if self.has_transport else 0, self.spec.k_noise,
                          self.spec.seed, self.cfg.dt, n_steps, self.cfg.noise_substeps)

    def split_increments(self, dW):
        d_tr = self.spec.d if self.has_transport else 0
        dW = np.asarray(dW, dtype=float).ravel()
        return dW[:d_tr], dW[d_tr:]

    def noise_terms(self, u, t, dW):
        """``M^k(u)`` for transport (``k <= d``) and the remaining channels."""
        co = self.coefficients(t)
        db, dw = self.split_increments(dW)
        transport = centered_gradient(self.grid, u) * co["sigma"] if len(db) else None
        mult = []
        for nu, g in zip(co["nu"], co["g"]):
            term = np.zeros_like(u)
            if nu is not None:
                term = term + nu * u
            if g is not None:
                term = term + g
            mult.append(term)
        return transport, mult, db, dw

    def explicit_rhs(self, u, t, dW):
        dt = self.cfg.dt
        co = self.coefficients(t)
        drift = np.zeros_like(u)
        if co["b"] is not None:
            drift += np.sum(co["b"] * centered_gradient(self.grid, u), axis=0)
        if co["c"] is not None:
            drift += co["c"] * u
        if co["f"] is not None:
            drift += co["f"]
        rhs = u + dt * drift
        transport, mult, db, dw = self.noise_terms(u, t, dW)
        if transport is not None:
            rhs = rhs + np.tensordot(db, transport, axes=1)
        for term, inc in zip(mult, dw):
            rhs = rhs + term * inc
        return rhs

    def psi_pair(self, kappa):
        phi = self.phi
        if kappa:
            return (lambda r: phi(r) + kappa * r), (lambda r: phi.deriv(r) + kappa)
        return phi, phi.deriv

    def advance(self, u, t, dW):
        rhs = self.explicit_rhs(u, t, dW)
        if not np.all(np.isfinite(rhs)):
            raise DataError(f"non-finite right-hand side at t={t:.6g}")
        psi, dpsi = self.psi_pair(self.coefficients(t)["kappa"])
        cfg = self.cfg
        try:
            if self.basis is None:
                sys_ = MonotoneSystem(self.grid, cfg.dt, psi, dpsi, rhs, cfg.jacobian_floor)
                new, it = newton_solve(sys_, u, cfg)
            else:
                sys_ = GalerkinSystem(self.basis, self.eigs, cfg.dt, psi, dpsi, rhs, cfg.jacobian_floor)
                a, it = newton_solve(sys_, self.basis.T @ u.ravel(), cfg)
                new = sys_.field(a)
        except ConvergenceError as exc:
            raise StepError(str(exc), t, exc.residual) from exc
        return new, it

    def initial(self, path_index):
        u0 = initial_field(self.spec, self.grid, path_index)
        if self.basis is not None:
            u0 = (self.basis @ (self.basis.T @ u0.ravel())).reshape(self.grid.shape)
        return u0


def semi_implicit_step(state, t, spec, cfg, dW):
    """Advance one step of size ``cfg.dt`` from time ``t``.

    ``dW`` holds the transport increments (only when ``sigma != 0``) followed
    by the ``w^k`` increments.
    """
    ctx = _Context(spec, cfg)
    u = ctx.grid.check(state)
    return ctx.advance(u, t, dW)[0]


# ---------------------------------------------------------------------------
# Itô identity terms


def _ito_terms(ctx, u, t, dW, p):
    """Discrete ingredients of the Itô formula for ``||u||_p^p`` at one step."""
    g = ctx.grid
    dt = ctx.cfg.dt
    vol = g.cell_volume
    co = ctx.coefficients(t)
    au = np.abs(u)
    w = au ** (p - 2.0)
    psi_p = w * u
    psi, _ = ctx.psi_pair(co["kappa"])
    Pu = psi(u)
    diff = 0.0
    for ax in range(g.d):
        diff += np.sum(forward_differences(g, Pu, ax) * forward_differences(g, psi_p, ax))
    diff *= -p * vol
    lower = np.zeros_like(u)
    if co["b"] is not None:
        lower += np.sum(co["b"] * centered_gradient(g, u), axis=0)
    if co["c"] is not None:
        lower += co["c"] * u
    if co["f"] is not None:
        lower += co["f"]
    drift = dt * (diff + p * np.sum(psi_p * lower) * vol)
    transport, mult, db, dw = ctx.noise_terms(u, t, dW)
    terms = []
    if transport is not None:
        terms.extend(transport)
    terms.extend(mult)
    incs = np.concatenate([db, dw])
    c2 = 0.5 * p * (p - 1.0)
    qv_exp = dt * c2 * sum(np.sum(m * m * w) for m in terms) * vol if terms else 0.0
    if terms:
        total = sum(m * i for m, i in zip(terms, incs))
        qv_real = c2 * np.sum(total * total * w) * vol
        # pairing with |u|^{p-2} u, the discrete counterpart of the
        # integrated-by-parts form used in the continuum identity
        mart = p * sum(i * np.sum(m * psi_p) for m, i in zip(terms, incs)) * vol
    else:
        qv_real = mart = 0.0
    return float(drift), float(qv_exp), float(qv_real), float(mart)


# ---------------------------------------------------------------------------
# paths


def solve_path(spec, cfg, path_index=0, increments=None):
    """Integrate one path from the initial datum over ``[0, T]``."""
    ctx = _Context(spec, cfg)
    g = ctx.grid
    n_steps = cfg.n_steps(spec.T)
    if increments is None:
        increments = ctx.noise_model(n_steps).make_stream(path_index)
    increments = np.asarray(increments, dtype=float).reshape(n_steps, -1)
    dt = cfg.dt
    u = ctx.initial(path_index)
    times = dt * np.arange(n_steps + 1)
    keys = [f"L{p:g}" for p in cfg.p_list]
    norms = {k: np.empty(n_steps + 1) for k in keys}
    norms["inf"] = np.empty(n_steps + 1)
    if cfg.record_hminus1:
        norms["hm1"] = np.empty(n_steps + 1)
    iters = np.zeros(n_steps, dtype=int)
    rec_idx = [n for n in range(n_steps + 1) if n % cfg.record_every == 0]
    if rec_idx[-1] != n_steps:
        rec_idx.append(n_steps)
    fields = np.empty((len(rec_idx),) + g.shape) if cfg.keep_fields else None
    ito = {p: {k: np.empty(n_steps) for k in ("drift", "qv_expected", "qv_realized", "martingale")}
           for p in cfg.ito_p}
    for p in cfg.ito_p:
        ito[p]["lp_pow"] = np.empty(n_steps + 1)
    rec = 0

    def record(n, u):
        nonlocal rec
        for k, p in zip(keys, cfg.p_list):
            norms[k][n] = norm_lp(g, u, p)
        norms["inf"][n] = float(np.max(np.abs(u)))
        if cfg.record_hminus1:
            norms["hm1"][n] = norm_hminus1(g, u)
        for p in cfg.ito_p:
            ito[p]["lp_pow"][n] = float(np.sum(np.abs(u) ** p) * g.cell_volume)
        if fields is not None and rec < len(rec_idx) and rec_idx[rec] == n:
            fields[rec] = u
            rec += 1

    record(0, u)
    for n in range(n_steps):
        t = times[n]
        for p in cfg.ito_p:
            terms = _ito_terms(ctx, u, t, increments[n], p)
            for k, v in zip(("drift", "qv_expected", "qv_realized", "martingale"), terms):
                ito[p][k][n] = v
        try:
            u, iters[n] = ctx.advance(u, t, increments[n])
        except StepError:
            raise
        except SolverError as exc:
            raise StepError(str(exc), t) from exc
        record(n + 1, u)
    return Trajectory(times, norms, iters, times[rec_idx], fields, dt, path_index, ito)
