import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spme_lab.noise import NoiseModel, W_OFFSET, coarsen, standard_normals, uniforms


def test_streams_are_reproducible_and_keyed():
    a = standard_normals(1, 0, 0, 100)
    np.testing.assert_array_equal(a, standard_normals(1, 0, 0, 100))
    assert not np.array_equal(a, standard_normals(1, 1, 0, 100))
    assert not np.array_equal(a, standard_normals(1, 0, 1, 100))
    assert not np.array_equal(a, standard_normals(2, 0, 0, 100))


def test_prefix_property():
    # the step index is the counter: longer draws extend shorter ones
    np.testing.assert_array_equal(uniforms(3, 4, 5, 10), uniforms(3, 4, 5, 50)[:10])


def test_uniforms_open_interval_and_normal_moments():
    u = uniforms(0, 0, 0, 200_000)
    assert u.min() > 0 and u.max() < 1
    z = standard_normals(0, 0, 0, 200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1) < 0.02


def test_channel_values_do_not_depend_on_other_channels():
    a = NoiseModel(1, 2, 9, 0.01, 20).make_stream(3)
    b = NoiseModel(0, 3, 9, 0.01, 20).make_stream(3)
    assert a.shape == (20, 3)
    np.testing.assert_array_equal(a[:, 1:], b[:, :2])
    np.testing.assert_array_equal(a[:, 1], NoiseModel(0, 1, 9, 0.01, 20).channel_increments(3, W_OFFSET))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 30), st.integers(0, 1000))
def test_substeps_share_brownian_path(factor, n, path):
    fine = NoiseModel(1, 1, 5, 0.01, n * factor).make_stream(path)
    coarse = NoiseModel(1, 1, 5, 0.01 * factor, n, substeps=factor).make_stream(path)
    np.testing.assert_allclose(coarse, coarsen(fine, factor), rtol=1e-13, atol=1e-15)


def test_increment_variance_scales_with_dt():
    inc = NoiseModel(0, 1, 2, 0.04, 50_000).make_stream(0)
    assert inc.var() == pytest.approx(0.04, rel=0.03)


def test_errors():
    with pytest.raises(ValueError):
        NoiseModel(0, 1, 0, -1.0, 3)
    with pytest.raises(ValueError):
        NoiseModel(0, 1, 0, 1.0, 3).make_stream(-1)
    with pytest.raises(ValueError):
        coarsen(np.zeros((5, 1)), 2)
    assert NoiseModel(0, 0, 0, 1.0, 4).make_stream(0).shape == (4, 0)
