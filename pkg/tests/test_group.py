import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from randprod import group
from conftest import near_identity


def test_identity_and_multiply():
    a = np.array([[1.0, 2.0], [0.0, 1.0]])
    np.testing.assert_array_equal(group.multiply(group.identity(2), a), a)
    with pytest.raises(group.DimensionError):
        group.multiply(np.eye(2), np.eye(3))


def test_as_element_rejects_singular_and_nonsquare():
    with pytest.raises(group.SingularMatrixError):
        group.as_element(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(group.DimensionError):
        group.as_element(np.ones((2, 3)))
    with pytest.raises(group.DomainError):
        group.as_element(np.array([[np.nan, 0], [0, 1.0]]))


def test_inverse_close_and_far(rng):
    close = near_identity(rng, 3, 20, 0.45)
    far = near_identity(rng, 3, 20, 3.0)
    far = far[group.is_invertible(far)]
    for a in (close, far):
        inv = group.inverse(a)
        np.testing.assert_allclose(np.matmul(a, inv), np.broadcast_to(np.eye(3), a.shape), atol=1e-12)
    # single matrices take the same routes
    np.testing.assert_allclose(group.inverse(close[0]) @ close[0], np.eye(3), atol=1e-14)


def test_neumann_inverse_scalar_case():
    np.testing.assert_allclose(group.neumann_inverse(1.1 * np.eye(2)), np.eye(2) / 1.1, rtol=1e-15)
    with pytest.raises(group.DomainError):
        group.neumann_inverse(3.0 * np.eye(2))


def test_exp_matches_scipy(rng):
    for scale in (0.01, 0.4, 2.0, 8.0):
        v = scale * rng.normal(size=(3, 3))
        np.testing.assert_allclose(group.mat_exp(v), sl.expm(v), rtol=1e-12, atol=1e-13)


def test_exp_stack_independent_of_batch(rng):
    v = rng.normal(size=(6, 2, 2)) * np.array([0.01, 0.1, 1, 3, 7, 0.5])[:, None, None]
    stacked = group.mat_exp(v)
    for i in range(6):
        np.testing.assert_array_equal(stacked[i], group.mat_exp(v[i]))


def test_log_matches_scipy(rng):
    for a in near_identity(rng, 3, 10, 0.95):
        np.testing.assert_allclose(group.mat_log(a), sl.logm(a).real, atol=1e-13)


def test_log_domain():
    with pytest.raises(group.DomainError):
        group.mat_log(2.5 * np.eye(2))


def test_log_of_exp_is_identity_on_small_vectors(rng):
    v = rng.normal(size=(50, 2, 2))
    v *= (0.6 * rng.uniform(size=50) / np.linalg.norm(v, axis=(1, 2)))[:, None, None]
    np.testing.assert_allclose(group.mat_log(group.mat_exp(v)), v, atol=1e-14)


def test_rotation_is_orthogonal():
    r = group.rotation(0.7)
    np.testing.assert_allclose(r @ r.T, np.eye(2), atol=1e-15)
    assert group.unit(2, 0, 1)[0, 1] == 1.0


def test_displacement_left_invariant(rng):
    g, h, c = rng.normal(size=(3, 3, 3)) + 2 * np.eye(3)
    d = group.displacement(g, h)
    assert group.displacement(c @ g, c @ h) == pytest.approx(d, rel=1e-10)
    assert group.displacement(g, g) == pytest.approx(0.0, abs=1e-14)


small = arrays(np.float64, (2, 2), elements=st.floats(-0.3, 0.3))


@settings(max_examples=60, deadline=None)
@given(small, small)
def test_inverse_of_product_property(y1, y2):
    a, b = np.eye(2) + y1, np.eye(2) + y2
    lhs = group.inverse(a @ b)
    rhs = group.inverse(b) @ group.inverse(a)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(small)
def test_exp_of_negative_is_inverse(v):
    np.testing.assert_allclose(group.mat_exp(v) @ group.mat_exp(-v), np.eye(2), atol=1e-13)
