"""Problem definitions for the stochastic porous medium equation.

The equation, in Stratonovich form on a box ``Q`` with zero Dirichlet data, is

    du = [Delta Phi(u) + eps Delta u + b.grad u + c u + f] dt
         + sigma grad u o d beta~ + sum_k (nu_k u + g_k) dw_k.

Coefficient functions are picked from a small registry (``const``, ``poly``,
``sine``, ``bump``); each is a product of 1D factors in the reference
coordinates ``s = (x - a) / (b - a)`` so values and derivatives are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy.stats import qmc

from . import noise as _noise


class SpecError(ValueError):
    """Malformed problem specification."""


class DegeneracyError(SpecError):
    """A non-degenerate operation was requested with ``epsilon == 0``."""


class AssumptionError(SpecError):
    """Raised by :meth:`AssumptionReport.raise_for_failures`."""


# ---------------------------------------------------------------------------
# coefficient registry


def _factor(kind, params, s, k_axis):
    """Return value, first and second derivative of one 1D factor in ``s``."""
    if kind == "poly":
        c = np.asarray(params, dtype=float)
        p = np.polynomial.Polynomial(c)
        d1, d2 = p.deriv(1), p.deriv(2)
        return p(s), d1(s), d2(s)
    if kind == "sine":
        w = k_axis * np.pi
        return np.sin(w * s), w * np.cos(w * s), -w * w * np.sin(w * s)
    if kind == "bump":
        return 4.0 * s * (1.0 - s), 4.0 - 8.0 * s, np.full_like(s, -8.0)
    raise SpecError(f"unknown coefficient kind {kind!r}")


@dataclass(frozen=True)
class CoefFn:
    """A registry function of ``(t, x)``.

    kinds
        ``const``: ``params = [a]``.
        ``poly``: ``params = [c0, c1, ...]``, product over axes of ``sum c_j s^j``.
        ``sine``: ``params = [amp, k1, k2]``, ``amp prod sin(k_i pi s_i)``.
        ``bump``: ``params = [amp]``, ``amp prod 4 s_i (1 - s_i)``.

    Every kind is multiplied by ``cos(omega t)``.
    """

    kind: str = "const"
    params: tuple = (0.0,)
    omega: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind not in ("const", "poly", "sine", "bump"):
            raise SpecError(f"unknown coefficient kind {self.kind!r}")
        if not self.params:
            raise SpecError(f"coefficient {self.kind!r} needs parameters")

    @classmethod
    def zero(cls):
        return cls("const", (0.0,))

    @property
    def is_zero(self):
        if self.kind == "poly":
            return all(p == 0.0 for p in self.params)
        return self.params[0] == 0.0

    def _time(self, t):
        return math.cos(self.omega * t) if self.omega else 1.0

    def _parts(self, x, box):
        x = np.asarray(x, dtype=float)
        d = x.shape[0]
        lo = np.array([a for a, _ in box]).reshape((-1,) + (1,) * (x.ndim - 1))
        ln = np.array([b - a for a, b in box]).reshape((-1,) + (1,) * (x.ndim - 1))
        s = (x - lo) / ln
        if self.kind == "sine":
            amp, ks = self.params[0], self.params[1:] or (1.0,)
            ks = [ks[i] if i < len(ks) else ks[-1] for i in range(d)]
            parts = [_factor("sine", None, s[i], ks[i]) for i in range(d)]
        elif self.kind == "bump":
            amp = self.params[0]
            parts = [_factor("bump", None, s[i], None) for i in range(d)]
        else:
            amp = 1.0
            parts = [_factor("poly", self.params, s[i], None) for i in range(d)]
        return amp, parts, ln

    def __call__(self, t, x, box):
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return np.full(x.shape[1:], self.params[0] * self._time(t))
        amp, parts, _ = self._parts(x, box)
        return amp * self._time(t) * np.prod([p[0] for p in parts], axis=0)

    def grad(self, t, x, box):
        """Gradient in ``x``, shape ``(d, *x.shape[1:])``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return np.zeros(x.shape)
        amp, parts, ln = self._parts(x, box)
        out = np.empty(x.shape)
        for i in range(x.shape[0]):
            prod = parts[i][1] / ln[i]
            for j, p in enumerate(parts):
                if j != i:
                    prod = prod * p[0]
            out[i] = amp * self._time(t) * prod
        return out

    def hessian_norm(self, t, x, box):
        """Frobenius norm of the Hessian in ``x``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return np.zeros(x.shape[1:])
        amp, parts, ln = self._parts(x, box)
        d = x.shape[0]
        total = np.zeros(x.shape[1:])
        for i in range(d):
            for j in range(d):
                prod = np.ones(x.shape[1:])
                for l, p in enumerate(parts):
                    if i == j == l:
                        prod = prod * p[2] / ln[l] ** 2
                    elif l in (i, j):
                        prod = prod * p[1] / ln[l]
                    else:
                        prod = prod * p[0]
                total += prod**2
        return np.abs(amp * self._time(t)) * np.sqrt(total)


@dataclass(frozen=True)
class TimeFn:
    """``sigma(t) = amp cos(omega t)``; x-independent by construction."""

    amp: float = 0.0
    omega: float = 0.0

    def __call__(self, t):
        return self.amp * (math.cos(self.omega * t) if self.omega else 1.0)

    @property
    def is_zero(self):
        return self.amp == 0.0


# ---------------------------------------------------------------------------
# nonlinearity


@dataclass(frozen=True)
class PowerLaw:
    """``Phi(r) = |r|^(m-1) r``, optionally with derivative capped at ``cap``."""

    m: float
    cap: float | None = None

    def __post_init__(self):
        if not self.m >= 1:
            raise SpecError(f"power-law exponent must satisfy m >= 1, got {self.m}")

    @property
    def growth(self):
        return float(self.m)

    @property
    def threshold(self):
        """``|r|`` beyond which the cap is active."""
        if self.cap is None:
            return math.inf
        if self.m == 1:
            return math.inf if self.cap >= 1 else 0.0
        return (self.cap / self.m) ** (1.0 / (self.m - 1.0))

    def _raw(self, r):
        return np.abs(r) ** (self.m - 1.0) * r if self.m != 1 else np.asarray(r, dtype=float)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.cap is None:
            return self._raw(r)
        s = self.threshold
        a = np.abs(r)
        out = self._raw(r)
        far = a > s
        if np.any(far):
            base = s**self.m if s > 0 else 0.0
            out = np.where(far, np.sign(r) * (base + self.cap * (a - s)), out)
        return out

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        d = self.m * np.abs(r) ** (self.m - 1.0) if self.m != 1 else np.ones_like(r)
        if self.cap is not None:
            d = np.minimum(d, self.cap)
        return d

    @property
    def lower_constant(self):
        """``c_bar`` with ``c_bar |r|^(m-1) <= Phi'(r)``; zero once truncated."""
        return float(self.m) if self.cap is None else 0.0


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear ``Phi`` through ``(r_k, v_k)``, extended linearly.

    ``m`` is the declared growth exponent used by the assumption checks.
    """

    r: tuple
    values: tuple
    m: float = 1.0

    def __post_init__(self):
        r = tuple(float(x) for x in self.r)
        v = tuple(float(x) for x in self.values)
        if len(r) != len(v) or len(r) < 2:
            raise SpecError("tabulated Phi needs matching r/values with >= 2 samples")
        if any(b <= a for a, b in zip(r, r[1:])):
            raise SpecError("tabulated r samples must be strictly increasing")
        if not all(map(math.isfinite, r + v)):
            raise SpecError("tabulated Phi must be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)

    @property
    def growth(self):
        return float(self.m)

    @property
    def slopes(self):
        return np.diff(self.values) / np.diff(self.r)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        x, v, s = np.array(self.r), np.array(self.values), self.slopes
        out = np.interp(r, x, v)
        out = np.where(r < x[0], v[0] + s[0] * (r - x[0]), out)
        return np.where(r > x[-1], v[-1] + s[-1] * (r - x[-1]), out)

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        s = self.slopes
        idx = np.clip(np.searchsorted(np.array(self.r), r, side="right") - 1, 0, len(s) - 1)
        return s[idx]

    @property
    def is_monotone(self):
        return bool(np.all(self.slopes >= 0))

    @property
    def lower_constant(self):
        return None


def phi_truncate(phi, n):
    """Lipschitz truncation ``Phi_n(r) = int_0^r min(Phi'(s), n) ds``."""
    if not n > 0:
        raise SpecError(f"truncation level must be positive, got {n}")
    if isinstance(phi, PowerLaw):
        cap = n if phi.cap is None else min(phi.cap, n)
        return PowerLaw(phi.m, float(cap))
    if isinstance(phi, Tabulated):
        if not phi.is_monotone:
            raise SpecError("phi_truncate requires a non-decreasing Phi")
        x = np.array(phi.r)
        if not np.any(x == 0.0):
            x = np.sort(np.append(x, 0.0))
        s = np.minimum(np.diff(phi(x)), n * np.diff(x))
        v = np.concatenate([[0.0], np.cumsum(s)])
        v -= v[np.searchsorted(x, 0.0)]
        return Tabulated(tuple(x), tuple(v), phi.m)
    raise SpecError(f"unsupported Phi type {type(phi).__name__}")


# ---------------------------------------------------------------------------
# problem specification


@dataclass(frozen=True)
class CoefficientSet:
    """Drift vector ``b``, reaction ``c``, transport amplitude ``sigma``,
    multiplicative/additive noise ``nu``/``g`` and the free term ``f``."""

    b: tuple = ()
    c: CoefFn = field(default_factory=CoefFn.zero)
    sigma: TimeFn = field(default_factory=TimeFn)
    nu: tuple = ()
    f: CoefFn = field(default_factory=CoefFn.zero)
    g: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(self.b))
        object.__setattr__(self, "nu", tuple(self.nu))
        object.__setattr__(self, "g", tuple(self.g))
        if len(self.nu) != len(self.g):
            nk = max(len(self.nu), len(self.g))
            nu = self.nu + (CoefFn.zero(),) * (nk - len(self.nu))
            g = self.g + (CoefFn.zero(),) * (nk - len(self.g))
            object.__setattr__(self, "nu", nu)
            object.__setattr__(self, "g", g)

    @property
    def k_noise(self):
        return len(self.nu)

    def drift_vector(self, d):
        if not self.b:
            return (CoefFn.zero(),) * d
        if len(self.b) != d:
            raise SpecError(f"b has {len(self.b)} components, expected {d}")
        return self.b


@dataclass(frozen=True)
class XiSpec:
    """Initial condition recipe.

    kinds
        ``function``: deterministic, ``fn`` from the coefficient registry.
        ``random_signs``: i.i.d. node signs scaled to discrete ``L_2`` norm ``scale``.
        ``random_uniform``: i.i.d. uniform on ``[low, high]``.
        ``smooth_random``: leading ``n_modes`` sine modes, coefficients ``~ k^-1.5``.

    Random kinds are drawn per path from a reserved noise channel.
    """

    kind: str = "function"
    fn: CoefFn = field(default_factory=lambda: CoefFn("sine", (1.0, 1.0)))
    scale: float = 1.0
    low: float = 0.0
    high: float = 1.0
    n_modes: int = 6

    def __post_init__(self):
        if self.kind not in ("function", "random_signs", "random_uniform", "smooth_random"):
            raise SpecError(f"unknown initial condition kind {self.kind!r}")

    @property
    def is_random(self):
        return self.kind != "function"


def _as_mu(mu):
    if isinstance(mu, str):
        if mu.strip().lower() in ("inf", "infinity", "∞"):
            return math.inf
        return Fraction(mu)
    if isinstance(mu, float) and math.isinf(mu):
        return math.inf
    if isinstance(mu, (int, Fraction)):
        return Fraction(mu)
    return float(mu)


def mu_admissible(d, mu):
    """``mu in Gamma_d = [2, inf] cap ((d + 2) / 2, inf]``."""
    return mu >= 2 and mu > Fraction(d + 2, 2)


@dataclass(frozen=True)
class ProblemSpec:
    """One problem instance together with its spatial resolution and seed."""

    d: int
    box: tuple
    nodes: tuple
    T: float
    phi: object
    coeffs: CoefficientSet = field(default_factory=CoefficientSet)
    epsilon: float = 0.0
    xi: XiSpec = field(default_factory=XiSpec)
    mu: object = math.inf
    alpha: float = 2.0
    seed: int = 0
    transport: str = "stratonovich"
    ito_correction: bool = False

    def __post_init__(self):
        d = int(self.d)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "box", tuple((float(a), float(b)) for a, b in self.box))
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        object.__setattr__(self, "mu", _as_mu(self.mu))
        if d < 1:
            raise SpecError("dimension must be positive")
        if len(self.box) != d or len(self.nodes) != d:
            raise SpecError("box and nodes must have one entry per dimension")
        if not self.T > 0:
            raise SpecError("horizon T must be positive")
        if not self.epsilon >= 0:
            raise SpecError("epsilon must be non-negative")
        if not self.alpha > 0:
            raise SpecError("alpha must be positive")
        if self.transport not in ("stratonovich", "ito"):
            raise SpecError("transport must be 'stratonovich' or 'ito'")
        if self.coeffs.b and len(self.coeffs.b) != d:
            raise SpecError(f"b needs {d} components")

    @property
    def grid(self):
        from .grid import Grid
        return Grid(self.nodes, self.box)

    @property
    def k_noise(self):
        return self.coeffs.k_noise

    def ito_laplacian_coefficient(self, t):
        """Extra Laplacian coefficient carried by the drift (``sigma^2 / 2`` once converted)."""
        return 0.5 * self.coeffs.sigma(t) ** 2 if self.ito_correction else 0.0

    def with_epsilon(self, eps):
        return replace(self, epsilon=float(eps))

    def with_phi(self, phi):
        return replace(self, phi=phi)


def stratonovich_to_ito(spec):
    """Rewrite the transport noise in Itô form, moving ``sigma^2/2 Delta u`` into the drift."""
    if spec.transport == "ito" or spec.coeffs.sigma.is_zero:
        return spec
    return replace(spec, transport="ito", ito_correction=True)


def initial_field(spec, grid, path_index=0):
    """Initial datum on ``grid`` for one path."""
    xi = spec.xi
    if xi.kind == "function":
        return xi.fn(0.0, grid.coords, grid.box)
    count = grid.size
    if xi.kind == "random_signs":
        u = _noise.uniforms(spec.seed, path_index, _noise.XI_OFFSET, count)
        v = np.where(u < 0.5, -1.0, 1.0).reshape(grid.shape)
        return xi.scale * v / np.sqrt(np.sum(v * v) * grid.cell_volume)
    if xi.kind == "random_uniform":
        u = _noise.uniforms(spec.seed, path_index, _noise.XI_OFFSET, count)
        return (xi.low + (xi.high - xi.low) * u).reshape(grid.shape)
    from .grid import smooth_random_field
    z = _noise.standard_normals(spec.seed, path_index, _noise.XI_OFFSET, xi.n_modes**grid.d)
    rng = _IterRng(z)
    return xi.scale * smooth_random_field(grid, rng, n_modes=xi.n_modes)


class _IterRng:
    """Feeds pre-drawn normals to ``smooth_random_field``."""

    def __init__(self, z):
        self._it = iter(z)

    def standard_normal(self):
        return float(next(self._it))


def xi_sup_estimate(spec):
    xi = spec.xi
    if xi.kind == "function":
        return float(np.max(np.abs(initial_field(spec, spec.grid)))) if spec.d <= 2 else abs(xi.fn.params[0])
    if xi.kind == "random_signs":
        vol = float(np.prod([b - a for a, b in spec.box]))
        return xi.scale / math.sqrt(vol)
    if xi.kind == "random_uniform":
        return max(abs(xi.low), abs(xi.high))
    return 3.0 * xi.scale


# ---------------------------------------------------------------------------
# non-degenerate form


@dataclass(frozen=True)
class NondegenerateBundle:
    """Quasilinear coefficients ``a^{ij}, F^i, F, g^{ik}, G^k, V^1, V^2``.

    ``a^{ij} = a I``, ``g^{ik} = sigma r`` for ``i = k <= d`` and zero otherwise.
    Arrays ``x`` have shape ``(d, ...)``.
    """

    spec: ProblemSpec
    c_bar: float
    theta: float
    m_tilde: float

    @property
    def d(self):
        return self.spec.d

    def a(self, t, x, r):
        s = self.spec
        return s.phi.deriv(r) + s.epsilon + s.ito_laplacian_coefficient(t)

    def F_vec(self, t, x, r):
        b = self.spec.coeffs.drift_vector(self.d)
        return np.array([bi(t, x, self.spec.box) * r for bi in b])

    def divergence_b(self, t, x):
        b = self.spec.coeffs.drift_vector(self.d)
        return sum(bi.grad(t, x, self.spec.box)[i] for i, bi in enumerate(b))

    def F(self, t, x, r):
        c = self.spec.coeffs
        box = self.spec.box
        return (c.c(t, x, box) - self.divergence_b(t, x)) * r + c.f(t, x, box)

    def g_diag(self, t, r):
        """Nonzero entries ``g^{kk} = sigma r``, ``k <= d``."""
        return self.spec.coeffs.sigma(t) * np.asarray(r, dtype=float)

    def dr_g_matrix(self, t):
        """``d_r g^{ik}`` as a ``d x (d + K)`` matrix."""
        out = np.zeros((self.d, self.d + self.spec.k_noise))
        out[:, : self.d] = self.spec.coeffs.sigma(t) * np.eye(self.d)
        return out

    def G(self, t, x, r):
        c = self.spec.coeffs
        shape = np.broadcast(np.empty(np.shape(x)[1:]), np.asarray(r)).shape
        out = np.zeros((self.d + c.k_noise,) + shape)
        for k, (nu, g) in enumerate(zip(c.nu, c.g)):
            out[self.d + k] = nu(t, x, self.spec.box) * r + g(t, x, self.spec.box)
        return out

    def V1(self, t, x):
        return np.abs(self.spec.coeffs.f(t, x, self.spec.box))

    def V2(self, t, x):
        c = self.spec.coeffs
        if not c.g:
            return np.zeros(np.shape(x)[1:])
        return np.sqrt(sum(g(t, x, self.spec.box) ** 2 for g in c.g))


def _bundle(spec):
    ito = stratonovich_to_ito(spec)
    c_bar = spec.phi.lower_constant
    if c_bar is None:
        c_bar = _tabulated_lower_constant(spec.phi)
    return NondegenerateBundle(ito, float(c_bar), float(spec.epsilon), spec.phi.growth - 1.0)


def as_nondegenerate(spec):
    """Quasilinear form of the viscous equation (``theta = eps``, ``c = c_bar``, ``m~ = m - 1``)."""
    if not spec.epsilon > 0:
        raise DegeneracyError("epsilon = 0: add viscosity before mapping to the non-degenerate form")
    return _bundle(spec)


def _tabulated_lower_constant(phi, n=2001):
    x = np.array(phi.r)
    r = np.linspace(x[0], x[-1], n)
    r = r[r != 0]
    return float(max(np.min(phi.deriv(r) / np.abs(r) ** (phi.m - 1.0)), 0.0))


# ---------------------------------------------------------------------------
# assumption checks


@dataclass(frozen=True)
class ConditionResult:
    condition: str
    passed: bool
    margin: float
    witness: dict | None = None
    note: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    results: tuple

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    @property
    def first_failure(self):
        return next((r for r in self.results if not r.passed), None)

    def __getitem__(self, condition):
        for r in self.results:
            if r.condition == condition:
                return r
        raise KeyError(condition)

    def raise_for_failures(self):
        bad = self.first_failure
        if bad is not None:
            raise AssumptionError(f"{bad.condition} failed: {bad.note} (margin {bad.margin:.6g}, witness {bad.witness})")

    def format(self):
        lines = []
        for r in self.results:
            flag = "PASS" if r.passed else "FAIL"
            w = "" if r.witness is None else f"  witness={r.witness}"
            lines.append(f"{flag}  {r.condition:<22} margin={r.margin:.6g}  {r.note}{w}")
        return "\n".join(lines)


def _sample_points(spec, budget):
    """Deterministic Halton samples of (t, x) and r in [-R, R]."""
    d = spec.d
    pts = qmc.Halton(d + 2, scramble=False).random(budget + 1)[1:]
    t = pts[:, 0] * spec.T
    lo = np.array([a for a, _ in spec.box])
    ln = np.array([b - a for a, b in spec.box])
    x = (lo + pts[:, 1 : d + 1] * ln).T
    R = 10.0 * (1.0 + xi_sup_estimate(spec))
    r = (2.0 * pts[:, d + 1] - 1.0) * R
    return t, x, r, R


def _ok(x):
    return bool(np.isfinite(x))


def validate_assumptions(spec, sample_budget=256):
    """Sample-based check of the structural assumptions; returns all margins."""
    if sample_budget < 1:
        raise SpecError("sample_budget must be >= 1")
    out = []
    d = spec.d
    phi = spec.phi
    coef = spec.coeffs

    # --- mu in Gamma_d and supported dimension
    ok = mu_admissible(d, spec.mu)
    margin = float(min(spec.mu - 2, spec.mu - Fraction(d + 2, 2))) if not math.isinf(spec.mu) else math.inf
    out.append(ConditionResult("mu.gamma_d", ok, margin, {"d": d, "mu": str(spec.mu)},
                               f"mu must lie in Gamma_d = [2, inf] cap ({(d + 2) / 2:g}, inf]"))
    out.append(ConditionResult("dim.supported", d in (1, 2), float(2 - d), {"d": d},
                               "simulation supports d in {1, 2}"))

    t, x, r, R = _sample_points(spec, sample_budget)
    # sign-symmetric probe grid for Phi, unit probes first
    rr = np.concatenate([[1.0, -1.0], np.linspace(-R, R, 2 * sample_budget + 1)])
    rr = rr[rr != 0.0]

    # --- Phi(0) = 0, monotone, lower bound
    p0 = float(phi(np.array(0.0)))
    out.append(ConditionResult("phi.zero", abs(p0) <= 1e-14, -abs(p0), {"r": 0.0}, "Phi(0) = 0"))
    dphi = phi.deriv(rr)
    i = int(np.argmin(dphi))
    out.append(ConditionResult("phi.monotone", bool(dphi[i] >= 0), float(dphi[i]),
                               {"r": float(rr[i])}, "Phi' >= 0"))
    m = phi.growth
    c_bar = phi.lower_constant
    if c_bar is None:
        c_bar = _tabulated_lower_constant(phi)
    ratio = dphi - c_bar * np.abs(rr) ** (m - 1.0)
    j = int(np.argmin(ratio))
    lower_ok = c_bar > 0 and ratio[j] >= -1e-12 * (1 + abs(dphi[j]))
    out.append(ConditionResult("phi.lower_bound", bool(lower_ok), float(ratio[j]), {"r": float(rr[j]), "c_bar": c_bar},
                               f"c_bar |r|^(m-1) <= Phi'(r) with c_bar={c_bar:g}, m={m:g}"))
    rphi = rr * phi(rr)
    big = np.abs(rr) >= 1.0
    lam = float(np.min(rphi[big] / np.abs(rr[big]) ** (m + 1))) if np.any(big) else 0.0
    C_grow = float(np.max(np.abs(dphi) / (np.abs(rr) ** (m - 1.0) + 1.0)))
    C_coer = float(max(0.0, np.max(lam * np.abs(rr) ** (m + 1) - rphi)))
    out.append(ConditionResult("phi.coercive", lam > 0, lam, {"lambda": lam, "C": max(C_grow, C_coer)},
                               "r Phi(r) >= lambda |r|^(m+1) - C, |Phi'| <= C |r|^(m-1) + C"))

    # --- boundary vanishing of b
    b = coef.drift_vector(d)
    worst, wit = 0.0, None
    lo = np.array([a for a, _ in spec.box])
    hi = np.array([bb for _, bb in spec.box])
    for ax in range(d):
        for side in (lo[ax], hi[ax]):
            xb = x.copy()
            xb[ax] = side
            for comp, bi in enumerate(b):
                for tt in (0.0, spec.T / 3):
                    val = np.abs(bi(tt, xb, spec.box))
                    k = int(np.argmax(val))
                    if val[k] > worst:
                        worst = float(val[k])
                        wit = {"t": tt, "x": xb[:, k].tolist(), "component": comp}
    out.append(ConditionResult("b.boundary", worst <= 1e-12, -worst, wit, "b^i = 0 on the boundary"))

    # --- coefficient bound K
    box = spec.box
    K_vals = np.zeros_like(t)
    for n in range(len(t)):
        tn, xn = t[n], x[:, n : n + 1]
        val = abs(coef.sigma(tn)) + abs(coef.c(tn, xn, box)[0]) + np.linalg.norm(coef.c.grad(tn, xn, box))
        val += sum(abs(bi(tn, xn, box)[0]) + np.linalg.norm(bi.grad(tn, xn, box)) + bi.hessian_norm(tn, xn, box)[0] for bi in b)
        if coef.nu:
            val += math.sqrt(sum(nu(tn, xn, box)[0] ** 2 for nu in coef.nu))
            val += math.sqrt(sum(np.sum(nu.grad(tn, xn, box) ** 2) for nu in coef.nu))
        K_vals[n] = val
    K = float(np.max(K_vals))
    out.append(ConditionResult("coeff.bounded", _ok(K), K, None, "sup |sigma|+|b|+|c|+|nu|+gradients (empirical K)"))

    # --- mapped quasilinear coefficients (theta = eps, possibly 0)
    bun = _bundle(spec)
    # ellipticity with unit vectors
    if d == 1:
        xi_dirs = np.ones((1, 1))
    else:
        xi_dirs = qmc.Halton(d, scramble=False).random(sample_budget + 1)[1:] - 0.5
        xi_dirs /= np.linalg.norm(xi_dirs, axis=1, keepdims=True)
    worst_e, wit_e = math.inf, None
    for n in range(len(t)):
        A = bun.a(t[n], x[:, n : n + 1], r[n]) * np.eye(d)
        Gr = bun.dr_g_matrix(t[n])
        form = A - 0.5 * Gr @ Gr.T
        e = xi_dirs[n % len(xi_dirs)]
        lhs = float(e @ form @ e)
        margin_e = lhs - (bun.c_bar * abs(r[n]) ** bun.m_tilde + bun.theta)
        if margin_e < worst_e:
            worst_e = margin_e
            wit_e = {"t": float(t[n]), "x": x[:, n].tolist(), "r": float(r[n]), "form": lhs}
    tol = 1e-10 * (1.0 + R ** max(bun.m_tilde, 1.0))
    out.append(ConditionResult("ellipticity", worst_e >= -tol, worst_e, wit_e,
                               f"(a - g_r g_r^T / 2) >= c|r|^m~ + theta, c={bun.c_bar:g}, m~={bun.m_tilde:g}, theta={bun.theta:g}"))

    # growth conditions with V1 = |f|, V2 = |g|
    V1 = np.array([bun.V1(t[n], x[:, n : n + 1])[0] for n in range(len(t))])
    V2 = np.array([bun.V2(t[n], x[:, n : n + 1])[0] for n in range(len(t))])
    lhsF = np.empty_like(t)
    lhsG = np.empty_like(t)
    for n in range(len(t)):
        xn = x[:, n : n + 1]
        Fi = bun.F_vec(t[n], xn, r[n])[:, 0]
        lhsF[n] = abs(bun.F(t[n], xn, r[n])[0]) + np.linalg.norm(Fi) + abs(bun.divergence_b(t[n], xn)[0] * r[n])
        G = bun.G(t[n], xn, r[n])[:, 0]
        lhsG[n] = np.linalg.norm(G) + math.sqrt(d) * abs(bun.g_diag(t[n], r[n]))
    for name, lhs, V, label in (("growth.drift", lhsF, V1, "V1=|f|"), ("growth.noise", lhsG, V2, "V2=|g|")):
        excess = lhs - V
        nz = np.abs(r) > 0
        Kemp = float(np.max(np.maximum(excess[nz], 0) / np.abs(r[nz]))) if np.any(nz) else 0.0
        k = int(np.argmax(excess - Kemp * np.abs(r)))
        resid = float(np.max(excess - Kemp * np.abs(r)))
        out.append(ConditionResult(name, _ok(Kemp) and resid <= 1e-9 * (1 + np.max(np.abs(lhs))), Kemp,
                                   {"t": float(t[k]), "x": x[:, k].tolist(), "r": float(r[k])},
                                   f"growth bound with {label}, empirical K"))
    sig = max(abs(coef.sigma(tt)) for tt in t)
    out.append(ConditionResult("noise.dr_bounded", _ok(sig), float(sig), None, "|d_r g^i| + |d_r d_i g^i| <= K"))
    Vsup = float(np.max(V1 + V2))
    out.append(ConditionResult("free_terms.bounded", _ok(Vsup), Vsup, None, "|V1| + |V2| <= N"))

    # noise truncation tail: share of the last retained k in |nu|, |g|
    if coef.k_noise:
        xn = x
        last = np.abs(coef.nu[-1](0.0, xn, box)) + np.abs(coef.g[-1](0.0, xn, box))
        tot = np.sqrt(sum(nu(0.0, xn, box) ** 2 for nu in coef.nu)) + np.sqrt(sum(g(0.0, xn, box) ** 2 for g in coef.g))
        tail = float(np.max(last / np.maximum(tot, 1e-300)))
    else:
        tail = 0.0
    out.append(ConditionResult("noise.tail", True, tail, None, f"l2 share of the last noise mode (K_noise={coef.k_noise})"))
    return AssumptionReport(tuple(out))
