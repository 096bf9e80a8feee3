import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spme_lab.grid import (Grid, GridError, apply_laplacian, centered_gradient, forward_differences, gn_check,
                           gn_constant, norm_h10, norm_hminus1, norm_lp, smooth_random_field, solve_poisson,
                           write_field_csv)


def test_grid_basic_geometry():
    g = Grid.unit(127)
    assert g.h[0] == pytest.approx(1 / 128)
    assert g.shape == (127,)
    assert g.axes[0][0] == pytest.approx(1 / 128)
    g2 = Grid((3, 5), ((0, 2), (-1, 1)))
    assert g2.h == pytest.approx((0.5, 1 / 3))
    assert g2.coords.shape == (2, 3, 5)
    assert g2.volume == pytest.approx(4.0)


@pytest.mark.parametrize("nodes,box", [((2,), ((0, 1),)), ((5, 5, 5), ((0, 1),) * 3), ((5,), ((1, 0),))])
def test_grid_rejects_bad_input(nodes, box):
    with pytest.raises(GridError):
        Grid(nodes, box)


def test_field_shape_mismatch():
    with pytest.raises(GridError):
        Grid.unit(7).check(np.zeros(5))


@pytest.mark.parametrize("d", [1, 2])
def test_sine_modes_are_eigenvectors(d):
    g = Grid((15,) * d, ((0.0, 2.0),) * d) if d == 1 else Grid((9, 13), ((0, 1), (0, 2)))
    k = (2,) if d == 1 else (2, 3)
    v = g.sine_mode(k)
    np.testing.assert_allclose(-apply_laplacian(g, v), g.eigenvalue(k) * v, atol=1e-9)
    np.testing.assert_allclose(g.laplacian_matrix @ v.ravel(), apply_laplacian(g, v).ravel(), atol=1e-9)


def test_mode_order_sorted():
    g = Grid((5, 7), ((0, 1), (0, 2)))
    lam = [g.eigenvalue(k) for k in g.mode_order]
    assert np.all(np.diff(lam) >= 0)
    assert len(g.mode_order) == g.size


def test_discrete_sine_has_half_l2_norm():
    g = Grid.unit(99)
    assert norm_lp(g, g.sine_mode(1), 2) ** 2 == pytest.approx(0.5, rel=1e-13)


def test_hminus1_of_sine_matches_eigen_identity():
    g = Grid.unit(255)
    lam = g.eigenvalue(1)
    assert norm_hminus1(g, g.sine_mode(1)) == pytest.approx(math.sqrt(0.5 / lam), rel=1e-12)


def test_poisson_2d_against_direct_solve():
    g = Grid((12, 9), ((0, 1), (0, 1.5)))
    rng = np.random.default_rng(0)
    f = rng.standard_normal(g.shape)
    w = solve_poisson(g, f, tol=1e-12)
    from scipy.sparse.linalg import spsolve
    ref = spsolve(-g.laplacian_matrix.tocsc(), f.ravel()).reshape(g.shape)
    np.testing.assert_allclose(w, ref, rtol=1e-9, atol=1e-12)


def test_centered_gradient_exact_on_quadratics():
    g = Grid.unit(19)
    x = g.axes[0]
    v = x * (1 - x)
    np.testing.assert_allclose(centered_gradient(g, v)[0], 1 - 2 * x, atol=1e-12)


def test_norm_errors_and_inf():
    g = Grid.unit(9)
    v = np.linspace(-2, 1, 9)
    assert norm_lp(g, v, np.inf) == 2.0
    with pytest.raises(GridError):
        norm_lp(g, v, 0.5)
    assert norm_hminus1(g, np.zeros(9)) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 20), st.integers(3, 12), st.integers(0, 2**31 - 1), st.sampled_from([1, 2]))
def test_summation_by_parts_is_exact(n1, n2, seed, d):
    g = Grid.unit(n1) if d == 1 else Grid((n1, n2), ((0, 1), (0, 1)))
    v = np.random.default_rng(seed).standard_normal(g.shape)
    lhs = g.inner(v, -apply_laplacian(g, v))
    assert lhs == pytest.approx(norm_h10(g, v) ** 2, rel=1e-11, abs=1e-11)
    fd = forward_differences(g, v, 0)
    assert fd.shape[0] == g.shape[0] + 1


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 40), st.integers(0, 2**31 - 1))
def test_hminus1_poincare_bounds(n, seed):
    # lambda_min ||v||_{-1}^2 <= ||v||^2 <= lambda_max ||v||_{-1}^2
    g = Grid.unit(n)
    v = np.random.default_rng(seed).standard_normal(g.shape)
    hm = norm_hminus1(g, v) ** 2
    l2 = norm_lp(g, v, 2) ** 2
    assert g.eigenvalue(1) * hm <= l2 * (1 + 1e-10)
    assert l2 <= g.eigenvalue(n) * hm * (1 + 1e-10)


def test_gn_constant_values():
    assert gn_constant(1, 2.0) ** 6 == pytest.approx(2.25)
    assert gn_constant(2, 1.0) == pytest.approx(max(1.5, 1.5) ** (2 / 3))


def test_gn_check_sine_example():
    g = Grid.unit(255)
    v = np.sin(np.pi * g.axes[0])
    r = gn_check(g, [v] * 100, 0.01, 2.0)
    assert r.q == 6
    assert r.lhs == pytest.approx(5 / 16, rel=1e-10)
    # the discrete gradient norm lags pi^2/2 by O(h^2)
    assert r.rhs == pytest.approx(9 * math.pi**2 / 32, rel=1e-4)
    assert r.passed


def test_gn_check_rejects_lambda():
    g = Grid.unit(7)
    with pytest.raises(GridError):
        gn_check(g, [np.ones(7)], 0.1, 3.0)
    with pytest.raises(GridError):
        gn_check(g, [], 0.1, 1.0)


def test_smooth_random_field_is_resolution_independent():
    a = smooth_random_field(Grid.unit(31), np.random.default_rng(5))
    b = smooth_random_field(Grid.unit(63), np.random.default_rng(5))
    np.testing.assert_allclose(a, b[1::2], atol=1e-12)


def test_write_field_csv(tmp_path):
    g = Grid((3, 4), ((0, 1), (0, 1)))
    write_field_csv(g, np.arange(12.0).reshape(3, 4), tmp_path / "f.csv")
    rows = (tmp_path / "f.csv").read_text().splitlines()
    assert rows[0] == "x1,x2,value" and len(rows) == 13
