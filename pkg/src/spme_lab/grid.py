"""Finite-difference calculus on a uniform Dirichlet grid.

Fields are numpy arrays of shape ``grid.shape`` holding the interior node
values; boundary values are implicitly zero.  Quadrature is the rectangle
rule with weight ``h^d``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.sparse.linalg import LinearOperator, cg


class GridError(ValueError):
    """Raised for malformed grids, mismatched fields or bad exponents."""


class PoissonError(RuntimeError):
    """Raised when the iterative Poisson solver fails to converge."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Grid:
    """Uniform node-centred grid of a box ``Q = prod (a_i, b_i)``.

    Parameters
    ----------
    nodes : tuple of int
        Interior node count per axis (at least 3).
    box : tuple of (float, float)
        Bounds per axis.
    """

    nodes: tuple
    box: tuple

    def __post_init__(self):
        nodes = tuple(int(n) for n in self.nodes)
        box = tuple((float(a), float(b)) for a, b in self.box)
        if len(nodes) not in (1, 2):
            raise GridError(f"only d in {{1, 2}} is supported, got d={len(nodes)}")
        if len(box) != len(nodes):
            raise GridError("box and nodes must have the same dimension")
        if min(nodes) < 3:
            raise GridError("at least 3 interior nodes per axis are required")
        if any(b <= a for a, b in box):
            raise GridError("box bounds must satisfy a < b")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "box", box)

    @classmethod
    def unit(cls, n, d=1):
        return cls((n,) * d, ((0.0, 1.0),) * d)

    @property
    def d(self):
        return len(self.nodes)

    @property
    def shape(self):
        return self.nodes

    @property
    def size(self):
        return int(np.prod(self.nodes))

    @cached_property
    def h(self):
        return tuple((b - a) / (n + 1) for (a, b), n in zip(self.box, self.nodes))

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    @property
    def volume(self):
        return float(np.prod([b - a for a, b in self.box]))

    @cached_property
    def axes(self):
        """Interior node coordinates per axis."""
        return tuple(a + h * np.arange(1, n + 1)
                     for (a, _), h, n in zip(self.box, self.h, self.nodes))

    @cached_property
    def coords(self):
        """Array of shape ``(d, *shape)`` with node coordinates."""
        return np.array(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def unit_coords(self):
        """Node coordinates mapped to the reference cube ``[0, 1]^d``."""
        lo = np.array([a for a, _ in self.box]).reshape((-1,) + (1,) * self.d)
        ln = np.array([b - a for a, b in self.box]).reshape((-1,) + (1,) * self.d)
        return (self.coords - lo) / ln

    @property
    def lengths(self):
        return tuple(b - a for a, b in self.box)

    def check(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != self.shape:
            if v.size == self.size:
                return v.reshape(self.shape)
            raise GridError(f"field of shape {v.shape} does not fit grid {self.shape}")
        return v

    def inner(self, u, v):
        """Discrete ``L_2`` inner product."""
        return float(np.sum(self.check(u) * self.check(v)) * self.cell_volume)

    # --- spectral data of -Delta_h -------------------------------------

    def eigenvalue(self, k):
        """Eigenvalue of ``-Delta_h`` for the sine mode with multi-index ``k``."""
        k = np.atleast_1d(k)
        return float(sum(4.0 / h**2 * np.sin(np.pi * ki / (2 * (n + 1)))**2
                         for ki, h, n in zip(k, self.h, self.nodes)))

    def sine_mode(self, k):
        """Discrete sine mode ``prod_i sin(k_i pi (x_i - a_i) / L_i)``."""
        k = np.atleast_1d(k)
        s = self.unit_coords
        return np.prod([np.sin(ki * np.pi * s[i]) for i, ki in enumerate(k)], axis=0)

    @cached_property
    def mode_order(self):
        """Multi-indices of all sine modes sorted by ``-Delta_h`` eigenvalue."""
        idx = np.array(list(np.ndindex(*self.nodes))) + 1
        lam = np.zeros(len(idx))
        for i, (h, n) in enumerate(zip(self.h, self.nodes)):
            lam += 4.0 / h**2 * np.sin(np.pi * idx[:, i] / (2 * (n + 1)))**2
        order = np.lexsort((*(idx[:, i] for i in reversed(range(self.d))), lam))
        return idx[order]

    # --- sparse operators ----------------------------------------------

    @cached_property
    def laplacian_matrix(self):
        """Sparse ``Delta_h`` acting on C-ordered flattened fields."""
        mats = []
        for h, n in zip(self.h, self.nodes):
            e = np.ones(n)
            mats.append(sparse.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1]) / h**2)
        if self.d == 1:
            return mats[0].tocsr()
        ix, iy = sparse.identity(self.nodes[0]), sparse.identity(self.nodes[1])
        return (sparse.kron(mats[0], iy) + sparse.kron(ix, mats[1])).tocsr()


def apply_laplacian(g, v):
    """Five-point (three-point in 1D) Dirichlet Laplacian."""
    v = g.check(v)
    out = np.zeros_like(v)
    for ax, h in enumerate(g.h):
        p = np.pad(v, [(1, 1) if i == ax else (0, 0) for i in range(g.d)])
        lo = [slice(None)] * g.d
        hi = [slice(None)] * g.d
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        out += (p[tuple(lo)] + p[tuple(hi)] - 2.0 * v) / h**2
    return out


def forward_differences(g, v, axis):
    """Differences across all ``n + 1`` cells of ``axis``, boundary cells included."""
    v = g.check(v)
    p = np.pad(v, [(1, 1) if i == axis else (0, 0) for i in range(g.d)])
    return np.diff(p, axis=axis) / g.h[axis]


def centered_gradient(g, v):
    """Centred differences, shape ``(d, *shape)``."""
    v = g.check(v)
    out = np.empty((g.d,) + v.shape)
    for ax, h in enumerate(g.h):
        p = np.pad(v, [(1, 1) if i == ax else (0, 0) for i in range(g.d)])
        lo = [slice(None)] * g.d
        hi = [slice(None)] * g.d
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        out[ax] = (p[tuple(hi)] - p[tuple(lo)]) / (2.0 * h)
    return out


def solve_poisson(g, rhs, tol=1e-10):
    """Solve ``-Delta_h w = rhs`` with zero Dirichlet data.

    In 1D this is a direct tridiagonal solve and ``tol`` is ignored.  In 2D
    conjugate gradients run matrix-free with a cap of ``10 * size``
    iterations and relative tolerance ``tol``.
    """
    rhs = g.check(rhs)
    if tol <= 0:
        raise GridError("tol must be positive")
    if not np.any(rhs):
        return np.zeros(g.shape)
    if g.d == 1:
        h2 = g.h[0] ** 2
        n = g.nodes[0]
        ab = np.empty((3, n))
        ab[0] = -1.0 / h2
        ab[1] = 2.0 / h2
        ab[2] = -1.0 / h2
        return solve_banded((1, 1), ab, rhs, check_finite=False)
    op = LinearOperator((g.size, g.size), dtype=float,
                        matvec=lambda x: -apply_laplacian(g, x.reshape(g.shape)).ravel())
    b = rhs.ravel()
    w, info = cg(op, b, rtol=tol, atol=0.0, maxiter=10 * g.size)
    res = float(np.linalg.norm(op.matvec(w) - b))
    if info != 0 or res > 10 * tol * np.linalg.norm(b):
        raise PoissonError(f"CG did not converge (info={info}, residual={res:.3e})", res)
    return w.reshape(g.shape)


def norm_lp(g, v, p):
    """Discrete ``L_p`` norm; ``p = inf`` is the max norm."""
    v = g.check(v)
    if p < 1:
        raise GridError(f"L_p norm needs p >= 1, got {p}")
    if np.isinf(p):
        return float(np.max(np.abs(v)))
    return float((np.sum(np.abs(v) ** p) * g.cell_volume) ** (1.0 / p))


def norm_h10(g, v):
    """Discrete ``H^1_0`` norm from boundary-inclusive forward differences.

    With this choice ``(v, -Delta_h v) = norm_h10(v)**2`` holds exactly.
    """
    total = sum(np.sum(forward_differences(g, v, ax) ** 2) for ax in range(g.d))
    return float(np.sqrt(total * g.cell_volume))


def norm_hminus1(g, v, tol=1e-10):
    """Discrete ``H^{-1}`` norm ``(v, (-Delta_h)^{-1} v)^{1/2}``."""
    v = g.check(v)
    if not np.any(v):
        return 0.0
    w = solve_poisson(g, v, tol)
    return float(np.sqrt(max(g.inner(v, w), 0.0)))


def gn_constant(d, lam):
    """Embedding constant ``N(lambda)`` from the Gagliardo-Nirenberg step."""
    q = 2.0 * (d + lam) / d
    if d == 1:
        base = (1.0 + lam) / lam
    elif d == 2:
        base = max(q * (d - 1) / d, (lam + 2.0) / 2.0)
    else:
        base = 2.0 * (d - 1) / (d - 2)
    return base ** (2.0 / q)


@dataclass(frozen=True)
class GNResult:
    lhs: float
    rhs: float
    passed: bool
    q: float
    constant: float


def gn_check(g, fields, dt, lam, slack=0.05):
    """Check the parabolic Gagliardo-Nirenberg embedding along a trajectory.

    ``lhs = sum_t ||v_t||_q^q dt`` and
    ``rhs = N^q (sum_t ||grad v_t||^2 dt) (max_t ||v_t||_lam^lam)^(2/d)``
    with ``q = 2 (d + lam) / d`` and ``N = N(lam)``.
    """
    if not 1.0 <= lam <= 2.0:
        raise GridError(f"lambda must lie in [1, 2], got {lam}")
    fields = [g.check(v) for v in fields]
    if not fields:
        raise GridError("trajectory is empty")
    q = 2.0 * (g.d + lam) / g.d
    const = gn_constant(g.d, lam)
    lhs = dt * sum(norm_lp(g, v, q) ** q for v in fields)
    grad = dt * sum(norm_h10(g, v) ** 2 for v in fields)
    sup = max(norm_lp(g, v, lam) ** lam for v in fields)
    rhs = const**q * grad * sup ** (2.0 / g.d)
    return GNResult(lhs, rhs, bool(lhs <= rhs * (1.0 + slack)), q, const)


def smooth_random_field(g, rng, n_modes=6, decay=1.5, amplitude=1.0):
    """Random field from the leading sine modes with coefficients ``~ k^-decay``.

    The draws do not depend on the grid resolution, so the same ``rng`` state
    gives the same continuum function sampled on any grid.
    """
    v = np.zeros(g.shape)
    for k in np.ndindex(*(n_modes,) * g.d):
        k = np.array(k) + 1
        a = rng.standard_normal()
        v += amplitude * a * np.linalg.norm(k) ** (-decay) * g.sine_mode(k)
    return v


def write_field_csv(g, v, path):
    """One row per node: coordinates then value."""
    v = g.check(v)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(g.d)] + ["value"])
        for idx in np.ndindex(*g.shape):
            w.writerow([repr(float(g.axes[i][j])) for i, j in enumerate(idx)]
                       + [repr(float(v[idx]))])
