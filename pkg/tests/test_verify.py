import json
import math
from fractions import Fraction

import numpy as np
import pytest

from mblab.errors import PremiseViolated
from mblab.grid import ConstraintPair, DomainSpec, Field, constant_field, linear_field
from mblab.lattice_geometry import make_direction_system
from mblab.potential import pendulum
from mblab.solvers import SolverConfig, minimize_J1, minimize_J2, periodic_domain, sharp_interface
from mblab.verify import (
    CheckEntry,
    VerificationReport,
    check_bangert_bound,
    check_strip_limits,
    check_heteroclinic,
    check_ordered,
    check_rotation_bound,
    check_wsi,
    classify_shift,
)

HALF = Fraction(1, 2)


@pytest.fixture(scope="module")
def kink():
    d = DomainSpec(1, 1, 6, (), 16)
    pair = ConstraintPair(constant_field(d, 0.0), constant_field(d, 1.0))
    res = minimize_J2(pair, 6, None, pendulum(0.25), SolverConfig(residual_tol=1e-8))
    return res.field, pair


def test_wsi_linear_matches_prediction():
    dom = periodic_domain([HALF], (2,), 8)
    u = linear_field(dom, [0.5])
    e = check_wsi(u, shift_bound=3, alpha=[HALF])
    assert e.passed and e.details["n_disagree"] == 0
    assert classify_shift(u, (2, 1), 1e-12)[0] == "equal"
    assert classify_shift(u, (0, 1), 1e-12)[0] == "above"


def test_wsi_detects_crossing_translate():
    dom = DomainSpec(1, 0, 0, (2,), 16)
    u = Field(dom, 0.3 * np.sin(np.pi * dom.axis_coords(0)))
    e = check_wsi(u, shift_bound=1)
    assert not e.passed
    assert [1, 0] in e.details["mixed"] or [-1, 0] in e.details["mixed"]


def test_wsi_kink_with_second_invariant(kink):
    U, _ = kink
    s = make_direction_system([0], with_second=True)
    assert check_wsi(U, shift_bound=3, system=s).passed


def test_ordered():
    dom = DomainSpec(1, 0, 0, (1,), 16)
    x = dom.axis_coords(0)
    assert check_ordered([constant_field(dom, 0.0), constant_field(dom, 1.0)]).passed
    s, c = Field(dom, np.sin(2 * np.pi * x)), Field(dom, np.cos(2 * np.pi * x))
    assert not check_ordered([s, c]).passed


def test_ordered_J1_minimizers():
    d = DomainSpec(1, 1, 2, (), 8)
    pair = ConstraintPair(constant_field(d, 0.0), constant_field(d, 1.0))
    rng = np.random.default_rng(0)
    base = rng.uniform(0, 1, d.shape)
    out = []
    for t in np.linspace(0.05, 1.0, 10):
        init = Field(d, np.clip(t * base, 0, 1))
        out.append(minimize_J1(pair, init, pendulum(0.5), SolverConfig(residual_tol=1e-8)).field)
    assert check_ordered(out, tol=1e-7).passed


def test_rotation_bound():
    dom = periodic_domain([HALF], (2,), 16)
    u = linear_field(dom, [0.5])
    e = check_rotation_bound(u, [HALF])
    assert e.passed and e.measured == pytest.approx(0.0, abs=1e-14)
    wig = u.copy(u.values + np.sin(2 * np.pi * dom.axis_coords(0)) / 10)
    e = check_rotation_bound(wig, [HALF])
    assert e.passed and e.measured == pytest.approx(0.1, rel=1e-6)


def test_rotation_bound_truncated(kink):
    U, _ = kink
    # the profile still creeps toward its limit in the outer shell, by less than 1e-4
    e = check_rotation_bound(U, [0], tol=1e-4)
    assert e.passed and e.measured <= 1.0


def test_bangert_bound():
    dom = DomainSpec(1, 0, 0, (1,), 16)
    v, w = constant_field(dom, 0.0), constant_field(dom, 1.0)
    e = check_bangert_bound(v, w, [0], eps_quad=0.0)
    assert e.passed and e.details["L1"] == pytest.approx(1.0) and e.details["L2"] == pytest.approx(1.0)
    assert check_bangert_bound(v, v, [0], eps_quad=0.0).measured == 0.0
    with pytest.raises(PremiseViolated):
        check_bangert_bound(v, constant_field(dom, 1.5), [0], eps_quad=0.0)


def test_heteroclinic(kink):
    U, pair = kink
    assert check_heteroclinic(U, pair, tol=1e-3).passed
    sharp = sharp_interface(pair)
    e = check_heteroclinic(sharp, pair, tol=1e-3)
    assert max(e.details["left_strip_l2"] + e.details["right_strip_l2"]) == 0.0
    assert not check_heteroclinic(pair.lower, pair, tol=1e-3).passed


def test_strip_limits_of_kink(kink):
    U, pair = kink
    e = check_strip_limits(U, pair, pendulum(0.25), tol=1e-6)
    assert e.passed and e.details["branch"] == "limits"
    means = [lv["mean"] for lv in e.details["levels"][:2]]
    assert means[0] == pytest.approx(0.0, abs=1e-6) and means[1] == pytest.approx(1.0, abs=1e-6)


def test_strip_limits_constant_in_strips():
    d = DomainSpec(1, 1, 3, (), 8)
    pair = ConstraintPair(constant_field(d, 0.0), constant_field(d, 1.0))
    e = check_strip_limits(pair.lower, pair, pendulum(0.25))
    assert e.passed and e.details["branch"] == "in_M1"


def test_strip_limits_staircase_detects_middle_level():
    d = DomainSpec(1, 1, 8, (), 8)
    pair = ConstraintPair(constant_field(d, 0.0), constant_field(d, 2.0))
    x = d.axis_coords(0)
    steps = np.where(x < -3, 0.0, np.where(x < 3, 1.0, 2.0))
    e = check_strip_limits(Field(d, steps), pair, pendulum(0.25))
    assert e.details["intermediate_levels"] == [1.0]
    assert e.passed


def test_report_json():
    r = VerificationReport()
    r.add(CheckEntry("a", True, 0.0, 1.0)).add(CheckEntry("b", False, math.inf, 1.0, {"x": np.float64(2.0)}))
    assert not r.overall
    d = json.loads(r.to_json())
    assert d["checks"][1]["measured"] == "inf" and d["checks"][1]["details"]["x"] == 2.0
    assert "FAIL" in r.table()
