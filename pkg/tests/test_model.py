import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spme_lab.model import (AssumptionError, CoefFn, CoefficientSet, DegeneracyError, PowerLaw, ProblemSpec,
                            SpecError, Tabulated, TimeFn, XiSpec, as_nondegenerate, initial_field, mu_admissible,
                            phi_truncate, stratonovich_to_ito, validate_assumptions)

BOX = ((0.0, 2.0), (-1.0, 1.0))


def _spec(phi=None, **kw):
    base = dict(d=1, box=((0.0, 1.0),), nodes=(31,), T=0.5, phi=phi or PowerLaw(2.0))
    base.update(kw)
    return ProblemSpec(**base)


@pytest.mark.parametrize("fn", [CoefFn("poly", (0.5, -1.0, 2.0)), CoefFn("sine", (1.5, 2, 1), omega=3.0),
                                CoefFn("bump", (0.7,)), CoefFn("const", (2.0,))])
def test_coefficient_gradient_matches_finite_differences(fn):
    rng = np.random.default_rng(0)
    x = np.array([rng.uniform(0.2, 1.8, 5), rng.uniform(-0.8, 0.8, 5)])
    grad = fn.grad(0.3, x, BOX)
    h = 1e-6
    for i in range(2):
        e = np.zeros((2, 1))
        e[i] = h
        fd = (fn(0.3, x + e, BOX) - fn(0.3, x - e, BOX)) / (2 * h)
        np.testing.assert_allclose(grad[i], fd, rtol=1e-6, atol=1e-7)


def test_hessian_norm_of_bump():
    fn = CoefFn("bump", (1.0,))
    x = np.array([[0.3]])
    # 4 s (1 - s) on (0, 1) has second derivative -8
    assert fn.hessian_norm(0.0, x, ((0.0, 1.0),))[0] == pytest.approx(8.0)


def test_coefficient_errors():
    with pytest.raises(SpecError):
        CoefFn("exp", (1.0,))
    with pytest.raises(SpecError):
        CoefFn("const", ())
    assert CoefFn.zero().is_zero and not CoefFn("poly", (0, 1)).is_zero


def test_time_fn():
    s = TimeFn(2.0, math.pi)
    assert s(1.0) == pytest.approx(-2.0)
    assert TimeFn().is_zero


def test_power_law_and_truncation():
    phi = PowerLaw(2.0)
    r = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(phi(r), np.abs(r) * r)
    np.testing.assert_allclose(phi.deriv(r), 2 * np.abs(r))
    tr = phi_truncate(phi, 4.0)
    assert tr.threshold == pytest.approx(2.0)
    np.testing.assert_allclose(tr.deriv(r), np.minimum(2 * np.abs(r), 4.0))
    # continuous at the threshold, linear beyond
    assert tr(np.array(2.0)) == pytest.approx(4.0)
    assert tr(np.array(3.0)) == pytest.approx(8.0)
    assert tr.lower_constant == 0.0
    with pytest.raises(SpecError):
        PowerLaw(0.5)
    with pytest.raises(SpecError):
        phi_truncate(phi, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 4.0), st.floats(0.1, 20.0), st.lists(st.floats(-10, 10), min_size=2, max_size=20))
def test_truncation_is_monotone_and_lipschitz(m, n, pts):
    tr = phi_truncate(PowerLaw(m), n)
    r = np.sort(np.array(pts))
    v = tr(r)
    assert np.all(np.diff(v) >= -1e-9)
    assert np.all(np.abs(np.diff(v)) <= n * np.diff(r) + 1e-9)
    assert tr(np.array(0.0)) == 0.0


def test_tabulated_phi():
    phi = Tabulated((-1.0, 0.0, 1.0, 2.0), (-1.0, 0.0, 1.0, 4.0), m=2.0)
    assert phi(np.array(1.5)) == pytest.approx(2.5)
    assert phi(np.array(3.0)) == pytest.approx(7.0)
    assert phi.deriv(np.array(1.0)) == pytest.approx(3.0)
    assert phi.is_monotone
    tr = phi_truncate(phi, 2.0)
    assert tr(np.array(2.0)) == pytest.approx(3.0)
    with pytest.raises(SpecError):
        Tabulated((0.0, 0.0), (0.0, 1.0))


def test_mu_admissibility():
    assert mu_admissible(1, math.inf) and mu_admissible(2, 3)
    assert not mu_admissible(2, 2) and not mu_admissible(3, 2)


def test_spec_validation_errors():
    with pytest.raises(SpecError):
        _spec(T=0.0)
    with pytest.raises(SpecError):
        _spec(epsilon=-1.0)
    with pytest.raises(SpecError):
        _spec(box=((0, 1), (0, 1)))


def test_stratonovich_conversion():
    spec = _spec(coeffs=CoefficientSet(sigma=TimeFn(0.4)))
    ito = stratonovich_to_ito(spec)
    assert ito.ito_laplacian_coefficient(0.0) == pytest.approx(0.08)
    assert stratonovich_to_ito(ito) is ito
    plain = _spec()
    assert stratonovich_to_ito(plain) is plain


def test_nondegenerate_mapping():
    co = CoefficientSet(b=(CoefFn("bump", (1.0,)),), c=CoefFn("const", (0.5,)), sigma=TimeFn(0.4),
                        nu=(CoefFn("const", (0.2,)),), g=(CoefFn("const", (0.3,)),), f=CoefFn("const", (-0.7,)))
    spec = _spec(coeffs=co, epsilon=0.1)
    bun = as_nondegenerate(spec)
    assert (bun.c_bar, bun.theta, bun.m_tilde) == (2.0, 0.1, 1.0)
    x = np.array([[0.25]])
    r = 1.5
    assert bun.a(0.0, x, r) == pytest.approx(2 * 1.5 + 0.1 + 0.08)
    # F = (c - div b) r + f with div b = 4 (1 - 2 s)
    assert bun.F(0.0, x, r)[0] == pytest.approx((0.5 - 2.0) * 1.5 - 0.7)
    assert bun.F_vec(0.0, x, r)[0, 0] == pytest.approx(0.75 * 1.5)
    G = bun.G(0.0, x, r)
    assert G[0, 0] == 0.0 and G[1, 0] == pytest.approx(0.2 * 1.5 + 0.3)
    assert bun.V1(0.0, x)[0] == pytest.approx(0.7) and bun.V2(0.0, x)[0] == pytest.approx(0.3)
    with pytest.raises(DegeneracyError):
        as_nondegenerate(spec.with_epsilon(0.0))


def test_validation_passes_for_standard_problem():
    co = CoefficientSet(b=(CoefFn("bump", (1.0,)),), sigma=TimeFn(0.5), nu=(CoefFn("const", (0.3,)),),
                        g=(CoefFn("sine", (0.1, 1)),))
    rep = validate_assumptions(_spec(coeffs=co, epsilon=0.01))
    assert rep.passed, rep.format()
    assert rep["ellipticity"].margin >= -1e-9


def test_validation_flags_decreasing_phi_with_witness():
    rep = validate_assumptions(_spec(phi=Tabulated((-1.0, 1.0), (1.0, -1.0))))
    assert not rep.passed
    bad = rep["phi.monotone"]
    assert not bad.passed and bad.witness["r"] == 1.0
    with pytest.raises(AssumptionError):
        rep.raise_for_failures()


def test_validation_flags_gamma_d_first():
    spec = ProblemSpec(3, ((0, 1),) * 3, (5, 5, 5), 0.1, PowerLaw(2.0), mu=2)
    rep = validate_assumptions(spec)
    assert rep.first_failure.condition == "mu.gamma_d"
    assert "Gamma_d" in rep.first_failure.note


def test_validation_flags_drift_not_vanishing_on_boundary():
    rep = validate_assumptions(_spec(coeffs=CoefficientSet(b=(CoefFn("const", (1.0,)),))))
    assert not rep["b.boundary"].passed


def test_initial_field_kinds():
    g = _spec().grid
    signs = initial_field(_spec(xi=XiSpec("random_signs")), g, 3)
    assert g.inner(signs, signs) == pytest.approx(1.0)
    np.testing.assert_array_equal(signs, initial_field(_spec(xi=XiSpec("random_signs")), g, 3))
    assert not np.array_equal(signs, initial_field(_spec(xi=XiSpec("random_signs")), g, 4))
    uni = initial_field(_spec(xi=XiSpec("random_uniform", low=0.2, high=0.5)), g, 0)
    assert uni.min() >= 0.2 and uni.max() <= 0.5
    sm = initial_field(_spec(xi=XiSpec("smooth_random")), g, 0)
    assert sm.shape == g.shape and np.all(np.isfinite(sm))
    np.testing.assert_allclose(initial_field(_spec(), g), np.sin(np.pi * g.axes[0]))
