from fractions import Fraction

import numpy as np
import pytest

from mblab.errors import RationalInput, ShiftTooLarge
from mblab.grid import DomainSpec, Field, constant_field, linear_field
from mblab.laminations import (
    approximate_recurrent,
    build_orbit,
    detect_gaps,
    rational_approximants,
    recurrent_hull,
)
from mblab.potential import pendulum, zero
from mblab.quadratic import QuadraticNumber as Q
from mblab.solvers import SolverConfig, minimize_periodic, periodic_domain

GOLDEN = Q.parse("(1+sqrt(5))/2")
CONJ = Q.parse("(sqrt(5)-1)/2")


def test_orbit_of_half_slope():
    dom = periodic_domain([Fraction(1, 2)], (2,), 8)
    orbit = build_orbit(linear_field(dom, [0.5]), 2)
    expected = sorted({-k1 / 2 + k2 for k1 in range(-2, 3) for k2 in range(-2, 3)})
    assert orbit.sorted_values == pytest.approx(expected)


def test_orbit_of_constant():
    dom = DomainSpec(1, 0, 0, (1,), 8)
    orbit = build_orbit(constant_field(dom, 0.3), 1)
    assert orbit.sorted_values == pytest.approx([-0.7, 0.3, 1.3])


def test_orbit_of_irrational_slope_on_truncated_line():
    a = float(CONJ)
    dom = DomainSpec(1, 1, 5, (), 4)
    orbit = build_orbit(linear_field(dom, [a]), 5)
    expected = sorted({-k1 * a + k2 for k1 in range(-5, 6) for k2 in range(-5, 6)})
    assert orbit.sorted_values == pytest.approx(expected, abs=1e-12)
    with pytest.raises(ShiftTooLarge):
        build_orbit(linear_field(dom, [a]), 6)


def test_recurrent_hulls():
    dom = DomainSpec(1, 0, 0, (1,), 8)
    u = constant_field(dom, 0.0)
    assert np.all(recurrent_hull(u, "sup_below", 2, [0]).values == -1.0)
    assert np.all(recurrent_hull(u, "inf_above", 2, [0]).values == 1.0)
    lin_dom = DomainSpec(1, 1, 6, (), 4)
    lin = linear_field(lin_dom, [float(CONJ)])
    hull = recurrent_hull(lin, "sup_below", 5, [CONJ])
    gap = lin.values - hull.values
    assert np.all(gap > 0)
    # the closest translate from below is within the best approximation error for |k| <= 5
    assert gap.min() <= abs(3 * float(CONJ) - 2) + 1e-12
    with pytest.raises(ValueError):
        recurrent_hull(lin, "sideways", 1, [CONJ])


def test_pendulum_constants_have_unit_gap():
    dom = periodic_domain([0], (1,), 16)
    spec = pendulum(0.25)
    rng = np.random.default_rng(0)
    seen = set()
    for _ in range(20):
        init = Field(dom, rng.uniform(-1, 2, dom.shape))
        res = minimize_periodic(spec, [0], dom, SolverConfig(residual_tol=1e-8), init=init)
        assert np.ptp(res.field.values) < 1e-6
        seen.add(round(float(res.field.values[0])))
    assert seen <= {-1, 0, 1, 2}
    report = detect_gaps(build_orbit(constant_field(dom, 0.0), 2), tol=0.1)
    assert len(report.gaps) == 1
    g = report.gaps[0]
    assert (g.lower, g.upper, g.width) == (0.0, 1.0, 1.0)
    assert report.classification == "lamination_like"
    lo, hi = g.pair
    assert np.all(lo.values == 0.0) and np.all(hi.values == 1.0)


def test_linear_family_is_foliation_like():
    dom = periodic_domain([Fraction(1, 2)], (2,), 8)
    fields = [linear_field(dom, [0.5], c=j / 8) for j in range(8)]
    report = detect_gaps(build_orbit(fields, 2), tol=0.2)
    assert report.classification == "foliation_like"
    assert report.gaps == [] and report.max_width == 0.0
    assert detect_gaps(build_orbit(fields[:1], 2), tol=0.2).classification == "lamination_like"


def test_rational_approximants():
    assert rational_approximants([GOLDEN, 0], 3) == [(1, 0), (2, 0), (Fraction(3, 2), 0)]
    with pytest.raises(RationalInput):
        rational_approximants([Fraction(1, 2)], 2)


def test_approximate_recurrent_zero_potential():
    rs = approximate_recurrent([GOLDEN], 5, SolverConfig(residual_tol=1e-9), zero(1), m=16, n_phases=4)
    conv = rational_approximants([GOLDEN], 5)
    assert [r.diagnostics["convergent"] for r in rs] == [[str(c[0])] for c in conv]
    # depth one reproduces the rational solve
    direct = minimize_periodic(zero(1), [1], periodic_domain([1], (1,), 16), SolverConfig(residual_tol=1e-9))
    assert rs[0].energy.total == pytest.approx(direct.energy.total)
    for d in range(1, 5):
        a, b = conv[d - 1][0], conv[d][0]
        dist = rs[d].diagnostics["distance_to_previous"]
        assert dist <= abs(float(a - b)) + 1e-12
