import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mblab.lattice_geometry import reduce_coordinates
from mblab.potential import (
    PotentialSpec,
    Term,
    eval_F,
    eval_Fu,
    eval_Fuu,
    eval_Fuuu,
    from_records,
    pendulum,
    sup_norm_Fu,
    sup_norm_Fuu,
    sup_norm_Fuuu,
    to_records,
    transform_potential,
    zero,
)
from mblab.quadratic import QuadraticNumber as Q

TWO_PI = 2 * np.pi


def mixed_spec():
    return PotentialSpec(2, (
        Term(0.3, (1, 0), 1, "cos", "one_minus_cos"),
        Term(-0.2, (1, -2), 2, "sin", "sin"),
        Term(0.1, (0, 0), 3, "one_minus_cos", "cos"),
    ))


def test_pendulum_values():
    s = pendulum(0.25)
    x = np.array([0.3])
    assert eval_F(s, x, 0.0) == 0.0
    assert eval_Fu(s, x, 0.0) == 0.0
    assert eval_Fuu(s, x, 0.0) == pytest.approx(0.25 * TWO_PI ** 2)
    assert eval_F(s, x, 0.5) == pytest.approx(0.5)
    assert eval_Fu(s, x, 0.5) == pytest.approx(0.0, abs=1e-15)


def test_product_value():
    eps = 0.7
    s = PotentialSpec(1, (
        Term(eps, (0,), 1, "cos", "one_minus_cos"),
        Term(-eps, (1,), 1, "cos", "one_minus_cos"),
    ))
    assert eval_F(s, np.array([0.25]), 0.25) == pytest.approx(eps)


def test_vectorized_shapes():
    s = mixed_spec()
    x = np.random.default_rng(0).random((4, 5, 2))
    u = np.random.default_rng(1).random((4, 5))
    assert eval_F(s, x, u).shape == (4, 5)


@pytest.mark.parametrize("order,f,df", [(1, eval_F, eval_Fu), (2, eval_Fu, eval_Fuu), (3, eval_Fuu, eval_Fuuu)])
def test_derivatives_by_finite_differences(order, f, df):
    s = mixed_spec()
    rng = np.random.default_rng(order)
    x = rng.random((50, 2))
    u = rng.random(50)
    h = 1e-6
    fd = (f(s, x, u + h) - f(s, x, u - h)) / (2 * h)
    assert np.allclose(fd, df(s, x, u), atol=1e-5 * (1 + np.abs(fd).max()))


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
       st.integers(-2, 2), st.integers(-2, 2), st.integers(-2, 2))
def test_periodicity(x1, x2, u, k1, k2, k3):
    s = mixed_spec()
    a = eval_F(s, np.array([x1, x2]), u)
    b = eval_F(s, np.array([x1 + k1, x2 + k2]), u + k3)
    assert abs(a - b) <= 1e-9


def test_sup_norms():
    s = pendulum(0.25)
    assert sup_norm_Fu(s) == pytest.approx(TWO_PI * 0.25)
    assert sup_norm_Fu(s) == pytest.approx(np.pi / 2)
    u = np.linspace(0, 1, 20001)
    assert np.abs(eval_Fu(s, np.zeros((u.size, 1)), u)).max() == pytest.approx(TWO_PI * 0.25, rel=1e-8)
    assert sup_norm_Fu(zero(3)) == 0.0
    two = PotentialSpec(1, pendulum(0.25).terms + pendulum(0.5).terms)
    assert sup_norm_Fu(two) == pytest.approx(sup_norm_Fu(pendulum(0.25)) + sup_norm_Fu(pendulum(0.5)))


def test_sup_norms_bound_sampled_values():
    s = mixed_spec()
    rng = np.random.default_rng(3)
    x = rng.random((20000, 2))
    u = rng.random(20000)
    assert np.abs(eval_Fu(s, x, u)).max() <= sup_norm_Fu(s)
    assert np.abs(eval_Fuu(s, x, u)).max() <= sup_norm_Fuu(s)
    assert np.abs(eval_Fuuu(s, x, u)).max() <= sup_norm_Fuuu(s)


def test_transform_potential_rotated_basis():
    sq2 = Q.sqrt(2)
    red = reduce_coordinates([sq2, sq2])
    eps = 0.4
    s = PotentialSpec(2, (Term(eps, (1, 0), 0, "one_minus_cos", "cos"),))
    t = transform_potential(s, red)
    rng = np.random.default_rng(7)
    y = rng.uniform(-2, 2, (100, 2))
    u = rng.uniform(-2, 2, 100)
    B = np.array(red.B, dtype=float)
    expected = eps * (1 - np.cos(TWO_PI * (y[:, 0] + y[:, 1])))
    assert np.allclose(eval_F(t, y, u), expected)
    assert np.allclose(eval_F(t, y, u), eval_F(s, y @ B.T, u))


def test_transform_identity_and_x_independent():
    red = reduce_coordinates([Q.sqrt(2), 0])
    s = mixed_spec()
    assert transform_potential(s, red) == s
    p = pendulum(0.3, 2)
    red2 = reduce_coordinates([Q.sqrt(2), Q.sqrt(2)])
    assert transform_potential(p, red2) == p


def test_records_roundtrip():
    s = mixed_spec()
    assert from_records(2, to_records(s)) == s
    with pytest.raises(ValueError):
        Term(1.0, (0,), 1, "tan")
    with pytest.raises(ValueError):
        PotentialSpec(2, (Term(1.0, (0,), 1),))
