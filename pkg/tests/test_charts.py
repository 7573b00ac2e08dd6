import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randprod import charts, group
from randprod.charts import ChartSpec
from conftest import near_identity


def test_spec_validation():
    with pytest.raises(charts.ChartError):
        ChartSpec.affine(1.0)
    with pytest.raises(charts.ChartError):
        ChartSpec.affine(0.0)
    with pytest.raises(charts.ChartError):
        ChartSpec.exponential(0.5)
    with pytest.raises(charts.ChartError):
        ChartSpec("affine", 0.5, 0)
    with pytest.raises(ValueError):
        ChartSpec("spherical", 0.5, 2)
    assert ChartSpec.affine(0.5).with_dim(3).dim == 3


def test_affine_membership_on_boundary():
    c = ChartSpec.affine(0.5)
    on = np.eye(2) + 0.5 * group.unit(2, 0, 0)
    off = np.eye(2) + 0.5000001 * group.unit(2, 0, 0)
    assert charts.contains(c, on)
    assert not charts.contains(c, off)
    np.testing.assert_array_equal(charts.phi(c, on), 0.5 * group.unit(2, 0, 0))
    with pytest.raises(group.DomainError):
        charts.phi(c, off)


def test_affine_roundtrip(rng):
    c = ChartSpec.affine(0.5, 3)
    for x in near_identity(rng, 3, 30, 0.5):
        np.testing.assert_allclose(charts.phi_inv(c, charts.phi(c, x)), x, atol=1e-15)


def test_exponential_roundtrip(rng):
    c = ChartSpec.exponential(0.3, 2)
    v = rng.normal(size=(30, 2, 2))
    v *= (0.3 * rng.uniform(size=30) / np.linalg.norm(v, axis=(1, 2)))[:, None, None]
    for vi in v:
        x = charts.phi_inv(c, vi)
        assert charts.contains(c, x)
        np.testing.assert_allclose(charts.phi(c, x), vi, atol=1e-14)


def test_exponential_excludes_far_points():
    c = ChartSpec.exponential(0.3, 2)
    assert not charts.contains(c, group.rotation(np.pi / 2))
    assert not charts.contains(c, 1.5 * np.eye(2))
    assert charts.contains(c, group.rotation(0.2))


def test_phi_inv_rejects_large_vectors():
    with pytest.raises(group.DomainError):
        charts.phi_inv(ChartSpec.affine(0.5), 0.6 * np.eye(2))


def test_dimension_mismatch():
    with pytest.raises(charts.ChartError):
        charts.contains(ChartSpec.affine(0.5, 3), np.eye(2))


def test_coordinates_zero_outside(rng):
    c = ChartSpec.affine(0.3, 2)
    xs = near_identity(rng, 2, 200, 0.6)
    inside, coords = charts.coordinates(c, xs)
    assert np.all(coords[~inside] == 0)
    np.testing.assert_array_equal(coords[inside], xs[inside] - np.eye(2))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(2, 4), st.integers(0, 10_000))
def test_image_lies_in_radius_ball(r, k, seed):
    gen = np.random.default_rng(seed)
    for c in (ChartSpec.affine(r, k), ChartSpec.exponential(min(r, 0.4), k)):
        xs = near_identity(gen, k, 50, 1.2 * c.r)
        inside, coords = charts.coordinates(c, xs)
        assert np.all(np.linalg.norm(coords, axis=(1, 2)) <= c.r + 1e-12)
