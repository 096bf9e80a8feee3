"""Independent reference computations used by several test modules."""

import numpy as np
from scipy.optimize import brentq


def gauss_seidel_bisection(rhs, dt, h, phi, sweeps=20000, tol=1e-14):
    """Solve ``u - dt Delta_h Phi(u) = rhs`` (1D, Dirichlet) node by node.

    Each node solves the scalar monotone equation
    ``u_j + 2 k Phi(u_j) = rhs_j + k (Phi(u_{j-1}) + Phi(u_{j+1}))``
    with ``k = dt / h^2`` by bracketing root finding.
    """
    k = dt / h**2
    u = np.array(rhs, dtype=float)
    n = u.size
    for _ in range(sweeps):
        change = 0.0
        for j in range(n):
            left = phi(u[j - 1]) if j > 0 else 0.0
            right = phi(u[j + 1]) if j < n - 1 else 0.0
            target = rhs[j] + k * (left + right)

            def f(x):
                return x + 2 * k * phi(x) - target

            a, b = -1.0, 1.0
            while f(a) > 0:
                a *= 2
            while f(b) < 0:
                b *= 2
            new = brentq(f, a, b, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
            change = max(change, abs(new - u[j]))
            u[j] = new
        if change < tol:
            return u
    raise RuntimeError("Gauss-Seidel did not converge")


def implicit_euler_mode_amplitude(lam, dt, n):
    return (1.0 + dt * lam) ** (-n)


def ou_mode_variance(lam, dt, n, amp):
    """Variance of ``a_{j+1} = (a_j + amp dW) / (1 + dt lam)`` after ``n`` steps from 0."""
    q = (1.0 + dt * lam) ** -2
    return amp**2 * dt * q * (1 - q**n) / (1 - q)
