import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fields, rel, vectors
from filtered_boris.errors import SingularMatrix
from filtered_boris.geom3 import cross, dot, hat_apply, hat_matrix, norm, solve3, vec3


def test_cross_examples():
    assert np.array_equal(cross((1, 0, 0), (0, 1, 0)), [0, 0, 1])
    assert np.array_equal(cross((1, 0, 0), (0, 0, 2)), [0, -2, 0])
    a = np.array([0.3, -1.2, 4.0])
    assert np.array_equal(cross(a, a), [0, 0, 0])


def test_hat_apply_examples():
    assert np.array_equal(hat_apply(np.array([0, 0, 1.0]), np.array([1.0, 0, 0])), [0, 1, 0])
    B = np.array([0.4, -2.0, 1.5])
    assert np.allclose(hat_apply(B, B), 0.0, atol=1e-15)
    v = cross(B, np.array([1.0, 0.0, 0.0]))  # v perpendicular to B
    twice = hat_apply(B, hat_apply(B, v))
    assert rel(twice, -dot(B, B) * v) < 1e-14


def test_hat_matrix_matches_cross():
    B, v = np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.7, -1.1])
    assert np.allclose(hat_matrix(B) @ v, cross(B, v), rtol=0, atol=1e-15)


def test_vec3_rejects_non_finite():
    assert np.array_equal(vec3(1, 2, 3), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        vec3(1.0, float("nan"), 0.0)
    with pytest.raises(ValueError):
        vec3([0.0, float("inf"), 0.0])


def test_solve3_examples():
    assert np.allclose(solve3(np.eye(3), [1, 2, 3]), [1, 2, 3])
    assert np.allclose(solve3(np.diag([2.0, 4.0, 8.0]), [2, 4, 8]), [1, 1, 1])
    rng = np.random.default_rng(0)
    A = rng.normal(size=(3, 3)) + 4 * np.eye(3)
    s = np.array([1.0, -1.0, 2.0])
    assert rel(solve3(A, A @ s), s) < 1e-13


def test_solve3_singular():
    A = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]])
    with pytest.raises(SingularMatrix):
        solve3(A, [1.0, 2.0, 3.0])
    with pytest.raises(SingularMatrix):
        solve3(np.zeros((3, 3)), [0.0, 0.0, 0.0])


def test_solve3_needs_pivoting():
    A = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.allclose(solve3(A, [2.0, 3.0, 4.0]), [3.0, 2.0, 4.0])


@given(vectors, vectors, vectors, st.floats(-3, 3), st.floats(-3, 3))
def test_cross_bilinear_antisymmetric(a, b, c, s, t):
    lhs = cross(s * a + t * b, c)
    rhs = s * cross(a, c) + t * cross(b, c)
    scale = (abs(s) * norm(a) + abs(t) * norm(b)) * norm(c) + 1e-300
    assert norm(lhs - rhs) <= 1e-13 * scale
    assert np.array_equal(cross(a, b), -cross(b, a))


@given(vectors, vectors)
def test_cross_orthogonal(a, b):
    c = cross(a, b)
    tol = 1e-14 * norm(a) * norm(b) * max(norm(a), norm(b)) + 1e-300
    assert abs(dot(c, a)) <= 4 * tol
    assert abs(dot(c, b)) <= 4 * tol


@given(fields(), vectors)
def test_hat_cubed_identity(B, v):
    once = hat_apply(B, v)
    thrice = hat_apply(B, hat_apply(B, once))
    # relative to |B|^3 |v|, since B x v may cancel when v is nearly parallel to B
    assert norm(thrice + dot(B, B) * once) <= 1e-12 * norm(B) ** 3 * norm(v) + 1e-300


@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9), vectors)
def test_solve3_residual_bound(entries, rhs):
    A = np.array(entries).reshape(3, 3) + 6 * np.eye(3)
    try:
        s = solve3(A, rhs)
    except SingularMatrix:
        assert abs(np.linalg.det(A)) < 1e-10 * max(np.linalg.norm(A, axis=1)) ** 3
        return
    bound = 1e-12 * (np.linalg.norm(A, 2) * norm(s) + norm(rhs))
    assert norm(A @ s - rhs) <= bound + 1e-300
