import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mblab.errors import DomainMismatch, ShiftTooLarge, StripOutOfRange
from mblab.grid import (
    ConstraintPair,
    DomainSpec,
    Field,
    box_sum,
    clamp,
    coarsen,
    constant_field,
    forward_differences,
    l1_norm,
    l2_norm,
    linear_field,
    meet_join,
    read_field,
    refine,
    resample,
    strip_domain,
    strip_restrict,
    translate,
    translate_valid,
    write_field,
)


def torus1(m=8, periods=(2,), jumps=()):
    return DomainSpec(1, 0, 0, periods, m, (), jumps)


def test_domain_shapes():
    d = DomainSpec(2, 1, 3, (2,), 4)
    assert d.shape == (25, 8)
    assert d.box_shape == (6, 2)
    assert d.axis_coords(0)[0] == -3.0 and d.axis_coords(0)[-1] == 3.0
    assert d.interior_mask().sum() == 23 * 8
    with pytest.raises(ValueError):
        DomainSpec(2, 1, 3, (2, 2), 4)


def test_translate_examples():
    d = torus1()
    u = constant_field(d, 0.0)
    assert np.all(translate(u, (0, 1)).values == 1.0)
    dj = torus1(jumps=(1,))
    lin = linear_field(dj, [0.5])
    assert np.array_equal(translate(lin, (1, 0)).values, lin.values - 0.5)
    assert np.array_equal(translate(lin, (2, 1)).values, lin.values)


def test_translate_truncated_and_limits():
    d = DomainSpec(1, 1, 2, (), 4)
    u = linear_field(d, [1.0])
    t = translate(u, (1, 0))
    valid = translate_valid(d, (1, 0))
    x = d.axis_coords(0)
    assert np.allclose(t.values[valid], (x - 1)[valid])
    assert valid.sum() == d.shape[0] - 4
    with pytest.raises(ShiftTooLarge):
        translate(u, (4, 0))


@settings(max_examples=40, deadline=None)
@given(st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3)),
       st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3)))
def test_translate_composition(k, l):
    d = DomainSpec(2, 0, 0, (2, 3), 4, (), (1, 0))
    rng = np.random.default_rng(0)
    u = Field(d, linear_field(d, [0.5, 0.0]).values + rng.random(d.shape))
    kl = tuple(a + b for a, b in zip(k, l))
    assert np.allclose(translate(translate(u, k), l).values, translate(u, kl).values, atol=1e-12)


def test_meet_join_and_clamp_oracles():
    d = torus1(m=4)
    a = Field(d, np.array([0, 1, 2, 3, 4, 5, 6, 7], dtype=float))
    b = Field(d, np.array([7, 6, 5, 4, 3, 2, 1, 0], dtype=float))
    lo, hi = meet_join(a, b)
    for i in range(8):
        assert lo.values[i] == min(a.values[i], b.values[i])
        assert hi.values[i] == max(a.values[i], b.values[i])
    assert meet_join(a, a)[0].values.tolist() == a.values.tolist()
    pair = ConstraintPair(constant_field(d, 2.0), constant_field(d, 5.0))
    c = clamp(a, pair)
    assert c.values.tolist() == [min(max(x, 2.0), 5.0) for x in a.values]
    inside = constant_field(d, 3.0)
    assert np.array_equal(clamp(inside, pair).values, inside.values)
    assert np.all(clamp(constant_field(d, 9.0), pair).values == 5.0)
    with pytest.raises(DomainMismatch):
        meet_join(a, constant_field(torus1(m=8), 0.0))


def test_strip_restrict():
    d = DomainSpec(2, 1, 2, (1,), 4)
    rng = np.random.default_rng(1)
    profile = rng.random((4, 4))
    vals = np.concatenate([profile] * 4 + [profile[:1]], axis=0)
    u = Field(d, vals)
    assert np.array_equal(strip_restrict(u, 0).values, strip_restrict(u, 1).values)
    assert np.array_equal(strip_restrict(u, -2).values, vals[0:4])
    assert np.array_equal(strip_restrict(u, 1).values, vals[12:16])
    assert strip_domain(d).shape == (4, 4)
    c = Field(d, np.full(d.shape, 0.3))
    assert np.all(strip_restrict(c, -1).values == 0.3)
    with pytest.raises(StripOutOfRange):
        strip_restrict(u, 2)


def test_file_roundtrip_bit_exact(tmp_path):
    d = DomainSpec(2, 1, 1, (3,), 4, (2.0, 2.0), (5,))
    rng = np.random.default_rng(2)
    u = Field(d, rng.standard_normal(d.shape) * 1e3)
    p = tmp_path / "u.txt"
    write_field(u, p)
    v = read_field(p)
    assert v.domain == d
    assert np.array_equal(v.values, u.values)
    write_field(v, tmp_path / "v.txt")
    assert (tmp_path / "v.txt").read_bytes() == p.read_bytes()


def test_box_sum_additivity_and_norms():
    d = DomainSpec(2, 1, 2, (2,), 4)
    rng = np.random.default_rng(3)
    vals = rng.standard_normal(d.shape)
    boxes = box_sum(vals, d)
    assert boxes.shape == d.box_shape
    assert boxes.sum() == pytest.approx(vals[:-1].sum())
    assert l1_norm(np.ones(d.shape), d) == pytest.approx(4 * 2)
    assert l2_norm(2 * np.ones(d.shape), d) == pytest.approx(np.sqrt(4 * 8))


def test_forward_differences_with_jump():
    d = torus1(m=4, periods=(1,), jumps=(1,))
    u = linear_field(d, [1.0])
    (dx,) = forward_differences(u.values, d)
    assert np.allclose(dx, 0.25)


def test_refine_and_coarsen():
    d = DomainSpec(2, 1, 1, (2,), 4, (), (1,))
    u = linear_field(d, [0.3, 0.5], c=0.1)
    f = refine(u, 2)
    assert f.domain.m == 8
    assert np.allclose(f.values, linear_field(f.domain, [0.3, 0.5], c=0.1).values)
    back = coarsen(f, 2)
    assert back.domain == d
    assert np.allclose(back.values, u.values)
    with pytest.raises(ValueError):
        coarsen(Field(torus1(m=3, periods=(1,)), np.zeros(3)), 2)


def test_resample_extends_periodic():
    small = DomainSpec(1, 0, 0, (1,), 4, (), (1,))
    big = DomainSpec(1, 0, 0, (3,), 4, (), (3,))
    u = linear_field(small, [1.0])
    assert np.allclose(resample(u, big).values, linear_field(big, [1.0]).values)
