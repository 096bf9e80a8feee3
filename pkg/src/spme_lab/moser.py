"""Exponent ladder of the Moser iteration.

All ladder quantities are kept as ``Fraction`` when the inputs are rational,
so recursions such as ``p_{n+1} = m~ + gamma_bar p_n`` hold exactly.  Only
the iteration constants ``c_n`` and ``lambda_n``, which involve real powers,
are evaluated in floating point (in logarithms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class AdmissibilityError(ValueError):
    """``mu`` lies outside ``Gamma_d = [2, inf] cap ((d + 2) / 2, inf]``."""


class LadderDomainError(ValueError):
    """An iteration constant was requested below the admissible index ``n0``."""


def _exact(x):
    """Fraction when ``x`` is (recognisably) rational, float otherwise."""
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    x = float(x)
    if math.isinf(x):
        return math.inf
    f = Fraction(x).limit_denominator(10**6)
    return f if float(f) == x else x


def _conjugate(mu):
    if mu == math.inf:
        return Fraction(1)
    return mu / (mu - 1)


@dataclass(frozen=True)
class MoserLadder:
    """Constants of the Moser iteration for given ``(d, m~, mu, alpha)``.

    Attributes
    ----------
    mu_conj : conjugate exponent ``mu / (mu - 1)`` (exactly 1 for ``mu = inf``)
    gamma : ``1 + 2 / d``
    gamma_bar : ``gamma / mu_conj``
    delta : ``m~ gamma_bar / (gamma_bar - 1)``
    n0 : minimal positive ``n`` with ``p_n >= 2 mu_conj`` and ``alpha mu_conj / (delta gamma_bar^n) < 1``
    kappa : supremum of ``max{2p/(p-1), [p != 2] 4p/(p-2)}`` over ladder members ``p_n / mu_conj >= 2``
    theta_tilde : smoothing exponent ``(alpha mu_conj / delta) / (gamma_bar - 1)``
    """

    d: int
    m_tilde: object
    mu: object
    alpha: object
    mu_conj: object
    gamma: object
    gamma_bar: object
    delta: object
    n0: int
    kappa: object
    theta_tilde: object

    def p(self, n):
        """``p_n = m~ (gamma_bar^(n+1) - 1) / (gamma_bar - 1)``."""
        g = self.gamma_bar
        return self.m_tilde * (g ** (n + 1) - 1) / (g - 1)

    def p_sequence(self, n_max):
        return [self.p(n) for n in range(n_max + 1)]

    def exponent(self, n):
        """``alpha mu_conj / (delta gamma_bar^n)``, the power applied at step ``n``."""
        return self.alpha * self.mu_conj / (self.delta * self.gamma_bar**n)

    def lam(self, n):
        """``lambda_n = (p_n / mu_conj)^(-alpha p_n / (delta gamma_bar^n))``."""
        pn = self._p_float(n)
        e = float(self.alpha) * pn / (float(self.delta) * float(self.gamma_bar) ** n)
        return math.exp(-e * math.log(pn / float(self.mu_conj)))

    def _p_float(self, n):
        g = float(self.gamma_bar)
        return float(self.m_tilde) * (g ** (n + 1) - 1.0) / (g - 1.0)

    def lambda_sequence(self, n_max, start=1):
        return [self.lam(n) for n in range(start, n_max + 1)]

    def members(self, n_max):
        """Ladder members ``p_n / mu_conj`` that are at least 2, for ``n <= n_max``."""
        out = []
        for n in range(n_max + 1):
            v = self.p(n) / self.mu_conj
            if v >= 2:
                out.append(v)
        return out


def _kappa_term(p):
    a = 2 * p / (p - 1)
    if p == 2:
        return a
    return max(a, 4 * p / (p - 2))


def ladder(d, m_tilde, mu, alpha):
    """Build the :class:`MoserLadder` for ``(d, m~, mu, alpha)``.

    Raises
    ------
    AdmissibilityError
        If ``mu`` is not in ``Gamma_d``.
    """
    d = int(d)
    if d < 1:
        raise ValueError("dimension must be positive")
    m_tilde, alpha = _exact(m_tilde), _exact(alpha)
    mu = math.inf if isinstance(mu, str) and mu.strip().lower() in ("inf", "infinity") else _exact(mu)
    if not m_tilde > 0 or not alpha > 0:
        raise ValueError("need m~ > 0 and alpha > 0")
    if not (mu >= 2 and mu > Fraction(d + 2, 2)):
        raise AdmissibilityError(f"mu={mu} is not in Gamma_d for d={d}: need mu >= 2 and mu > {Fraction(d + 2, 2)}")
    mu_conj = _conjugate(mu)
    gamma = 1 + Fraction(2, d)
    gamma_bar = gamma / mu_conj
    delta = m_tilde * gamma_bar / (gamma_bar - 1)

    def p(n):
        return m_tilde * (gamma_bar ** (n + 1) - 1) / (gamma_bar - 1)

    n0 = 1
    while not (p(n0) >= 2 * mu_conj and alpha * mu_conj / (delta * gamma_bar**n0) < 1):
        n0 += 1
    # both candidate terms decrease in p, so the supremum sits at the
    # smallest members: p = 2 if present and the first member above 2
    kappa, n = None, 0
    while True:
        v = p(n) / mu_conj
        if v >= 2:
            term = _kappa_term(v)
            kappa = term if kappa is None else max(kappa, term)
            if v > 2:
                break
        n += 1
    theta = (alpha * mu_conj / delta) / (gamma_bar - 1)
    return MoserLadder(d, m_tilde, mu, alpha, mu_conj, gamma, gamma_bar, delta, n0, kappa, theta)


def smoothing_exponent(lad):
    """``theta~ = (alpha mu_conj / delta) sum_{n >= 1} gamma_bar^(-n)``."""
    return lad.theta_tilde


@dataclass(frozen=True)
class IterationConstants:
    n: np.ndarray
    log_c: np.ndarray
    log_products: np.ndarray
    lambda_sums: np.ndarray

    @property
    def products(self):
        with np.errstate(over="ignore"):
            return np.exp(self.log_products)

    @property
    def c(self):
        return np.exp(self.log_c)


def log_c(lad, n, N_free):
    """Logarithm of the step constant ``c_n`` with the free constant ``N = N_free``."""
    gbn = float(lad.gamma_bar) ** n
    e = float(lad.alpha * lad.mu_conj / lad.delta) / gbn
    if e >= 1:
        raise LadderDomainError(f"alpha mu'/(delta gamma_bar^n) = {e:.4g} >= 1 at n={n}")
    kappa, mc = float(lad.kappa), float(lad.mu_conj)
    pn = lad._p_float(n)
    return (math.log(N_free) / gbn
            + e * math.log(1.0 / e)
            - math.log1p(-e)
            + e * (math.log(N_free) + kappa * (math.log(pn) - math.log(mc))))


def iteration_constants(lad, N_free, n_max, n_start=None):
    """Step constants ``c_n``, partial products and partial sums of ``lambda_n``.

    Indices run from ``n_start`` (default ``n0``) to ``n_max``.
    """
    if not N_free > 0:
        raise ValueError("N_free must be positive")
    start = lad.n0 if n_start is None else int(n_start)
    if n_max < start:
        raise ValueError("n_max must be at least the start index")
    ns = np.arange(start, n_max + 1)
    lc = np.array([log_c(lad, int(n), N_free) for n in ns])
    lam = np.array([lad.lam(int(n)) for n in ns])
    return IterationConstants(ns, lc, np.cumsum(lc), np.cumsum(lam))


def ladder_table(lad, N_free, n_max):
    """Rows ``(n, p_n, alpha mu'/(delta gamma_bar^n), lambda_n, c_n)``; ``c_n`` is None below ``n0``."""
    rows = []
    for n in range(0, n_max + 1):
        e = lad.exponent(n)
        c = math.exp(log_c(lad, n, N_free)) if e < 1 else None
        rows.append((n, lad.p(n), e, lad.lam(n) if lad.p(n) > 0 else None, c))
    return rows


def format_value(v):
    if v is None:
        return "-"
    if isinstance(v, Fraction):
        return str(v) if v.denominator == 1 or v.denominator < 10**6 else f"{float(v):.10g}"
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return f"{float(v):.10g}" if isinstance(v, float) else str(v)


def format_ladder(lad, N_free, n_max):
    head = (f"d={lad.d} m~={format_value(lad.m_tilde)} mu={format_value(lad.mu)} alpha={format_value(lad.alpha)}\n"
            f"mu'={format_value(lad.mu_conj)} gamma={format_value(lad.gamma)} gamma_bar={format_value(lad.gamma_bar)} "
            f"delta={format_value(lad.delta)} n0={lad.n0} kappa={format_value(lad.kappa)} "
            f"theta~={format_value(lad.theta_tilde)}\n")
    lines = [f"{'n':>3}  {'p_n':>14}  {'alpha mu/(delta gb^n)':>22}  {'lambda_n':>14}  {'c_n':>14}"]
    for n, p, e, lam, c in ladder_table(lad, N_free, n_max):
        pv = format_value(p) if isinstance(p, Fraction) and p.denominator == 1 else f"{float(p):.10g}"
        lines.append(f"{n:>3}  {pv:>14}  {float(e):>22.10g}  {format_value(lam):>14}  {format_value(c):>14}")
    return head + "\n".join(lines)
