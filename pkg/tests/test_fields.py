import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import fields, vectors
from filtered_boris.errors import DegenerateField, ZeroField
from filtered_boris.fields import (
    FieldModel,
    ResonanceGuard,
    check_resonance,
    constant_b,
    constant_be,
    eval_B,
    eval_E,
    eval_point,
    guiding_center,
    make_preset,
    paper_sec8,
    split_velocity,
)
from filtered_boris.geom3 import dot, norm


def test_paper_field_at_origin():
    B = eval_B(paper_sec8(1 / 16), np.zeros(3), 0.0)
    assert np.array_equal(B, [0.0, 0.0, 16.0])


def test_paper_field_off_origin():
    B = eval_B(paper_sec8(1.0), np.array([1.0, 0.0, 2.0]), 0.0)
    assert np.allclose(B, [-1.0, 0.0, 3.0], rtol=0, atol=1e-15)


def test_constant_field_everywhere():
    m = constant_b(0.125)
    for x in ([0.0, 0.0, 0.0], [5.0, -3.0, 1.0]):
        assert np.array_equal(eval_B(m, np.array(x), 2.0), [0.0, 0.0, 8.0])


def test_decomposition_is_exposed():
    m = paper_sec8(0.25)
    x = np.array([0.3, -0.2, 0.7])
    strong = m.B0(m.epsilon * x) / m.epsilon
    assert np.allclose(eval_B(m, x, 0.0), strong + m.B1(x, 0.0))
    assert np.allclose(m.with_epsilon(0.5).B0(x), m.B0(x))


def test_paper_electric_field():
    E = eval_E(paper_sec8(0.1), np.array([1.0, 0.0, 5.0]), 0.0)
    assert np.allclose(E, [1.0, 0.0, 0.0], atol=1e-15)


def test_paper_electric_field_on_axis():
    with pytest.raises(DegenerateField):
        eval_E(paper_sec8(0.1), np.array([0.0, 0.0, 3.0]), 0.0)


def test_zero_electric_preset():
    E = eval_E(paper_sec8(0.1, electric=False), np.array([0.0, 0.0, 3.0]), 0.0)
    assert np.array_equal(E, np.zeros(3))


def test_constant_be_preset():
    m = constant_be(0.5, e_field=(1.0, 2.0, 3.0))
    assert np.array_equal(eval_E(m, np.ones(3), 7.0), [1.0, 2.0, 3.0])


def test_presets_by_name():
    for name in ("paper-sec8", "constant-B", "constant-BE"):
        assert make_preset(name, 0.5).name == name
    with pytest.raises(ValueError):
        make_preset("dipole", 0.5)


def test_model_validation():
    with pytest.raises(ValueError):
        paper_sec8(0.0)
    with pytest.raises(ValueError):
        FieldModel(0.1, B0=lambda y: np.array([0.0, 0.0, 0.5]))
    weak = FieldModel(0.1, B0=lambda y: np.zeros(3), strict=False)
    assert np.array_equal(eval_B(weak, np.ones(3), 0.0), np.zeros(3))


@pytest.mark.parametrize("x", [(1.0, 0.5, 0.2), (-0.3, 0.8, -1.0), (2.0, -1.5, 0.0)])
@pytest.mark.parametrize("delta", [1e-5, 1e-6])
def test_electric_field_is_minus_gradient(x, delta):
    m = paper_sec8(0.1)
    x = np.array(x)

    def U(y):
        return 1.0 / math.hypot(y[0], y[1])

    grad = np.array([(U(x + delta * e) - U(x - delta * e)) / (2 * delta) for e in np.eye(3)])
    assert np.allclose(eval_E(m, x, 0.0), -grad, rtol=0, atol=1e-8)


def test_guiding_center_example():
    gc = guiding_center(np.zeros(3), np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 2.0]))
    assert np.allclose(gc, [0.0, -0.5, 0.0], atol=1e-16)


def test_guiding_center_parallel_velocity():
    x = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(guiding_center(x, np.array([0.0, 0.0, 4.0]), np.array([0.0, 0.0, 2.0])), x)


def test_guiding_center_zero_field():
    with pytest.raises(ZeroField):
        guiding_center(np.zeros(3), np.ones(3), np.zeros(3))


@given(vectors, vectors, fields())
def test_guiding_center_offset_orthogonal_to_field(x, v, B):
    d = guiding_center(x, v, B) - x
    # roundoff scale of the cross product and of the subtraction
    scale = norm(d) + 1e-2 * norm(x) + norm(v) / norm(B)
    assert abs(dot(d, B)) <= 1e-14 * scale * norm(B)


@given(vectors, st.integers(4, 13))
def test_guiding_center_within_epsilon(v, j):
    eps = 2.0**-j
    B = eval_B(paper_sec8(eps), np.zeros(3), 0.0)
    assume(norm(v) > 0)
    # |x_gc - x| <= |v| / |B| = eps |v|
    assert norm(guiding_center(np.zeros(3), v, B)) <= eps * norm(v) * (1 + 1e-12)


def test_eval_point_variants():
    x, gc = np.array([1.0, 2.0, 3.0]), np.array([1.5, 2.0, 3.0])
    assert eval_point(x, gc, 2.0, "one") is x
    assert np.allclose(eval_point(x, gc, 0.0), x, rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        eval_point(x, gc, 1.0, "other")


def test_eval_point_at_pi():
    p = eval_point(np.zeros(3), np.array([1.0, 0.0, 0.0]), math.pi)
    assert np.allclose(p, [1 - math.pi**2 / 4, 0.0, 0.0], rtol=1e-12)
    assert p[0] == pytest.approx(-1.467401, abs=1e-6)


def test_split_velocity_example():
    par, perp = split_velocity(np.array([1.0, 1.0, 1.0]), np.array([0.0, 0.0, 2.0]))
    assert np.allclose(par, [0.0, 0.0, 1.0])
    assert np.allclose(perp, [1.0, 1.0, 0.0])


def test_split_velocity_limits():
    B = np.array([0.0, 3.0, 4.0])
    par, perp = split_velocity(2 * B, B)
    assert np.allclose(par, 2 * B) and np.allclose(perp, 0.0)
    v = np.array([1.0, 0.0, 0.0])
    par, perp = split_velocity(v, B)
    assert np.allclose(par, 0.0) and np.allclose(perp, v)
    with pytest.raises(ZeroField):
        split_velocity(v, np.zeros(3))


@given(vectors, fields())
def test_split_velocity_orthogonal(v, B):
    par, perp = split_velocity(v, B)
    v2 = dot(v, v)
    assert abs(dot(par, perp)) <= 1e-14 * v2 + 1e-300
    assert abs(dot(par, par) + dot(perp, perp) - v2) <= 1e-13 * v2


def test_resonance_examples():
    g = ResonanceGuard()
    assert check_resonance(g, 0.1, 1.0)
    st1 = check_resonance(g, 2 * math.pi, 1.0)
    assert not st1 and st1.k == 1
    st2 = check_resonance(g, math.pi, 1.0)
    assert not st2 and st2.k == 2


def test_resonance_third_harmonic():
    # 3 h b / 2 = pi
    s = check_resonance(ResonanceGuard(k_max=3), 2 * math.pi / 3, 1.0)
    assert s.k == 3
    assert check_resonance(ResonanceGuard(k_max=2), 2 * math.pi / 3, 1.0)


def test_guard_validation():
    for kw in ({"c_min": 0.0}, {"c_min": 1.0}, {"k_max": 0}):
        with pytest.raises(ValueError):
            ResonanceGuard(**kw)


@given(st.floats(0.0, 30.0), st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_resonance_monotone_in_c_min(hb, c1, c2):
    lo, hi = sorted((c1, c2))
    if not check_resonance(ResonanceGuard(c_min=lo), hb, 1.0):
        assert not check_resonance(ResonanceGuard(c_min=hi), hb, 1.0)
