"""Checkable predicates for computed fields.

Every check returns a ``CheckEntry``; ``VerificationReport`` bundles them.
All checks are pure functions of their inputs and thresholds.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import sympy

from .errors import PremiseViolated
from .functionals import J1
from .grid import (
    ConstraintPair,
    Field,
    box_sum,
    strip_axis,
    strip_restrict,
    translate,
    translate_valid,
)
from .lattice_geometry import DirectionSystem, make_direction_system
from .potential import PotentialSpec
from .quadratic import QuadraticNumber, dot

ORDER_NAMES = {1: "above", 0: "equal", -1: "below"}


@dataclass
class CheckEntry:
    name: str
    passed: bool
    measured: float
    threshold: float
    details: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, entry: CheckEntry) -> "VerificationReport":
        self.checks.append(entry)
        return self

    def to_dict(self) -> dict:
        return {"overall": self.overall, "checks": [_jsonable(asdict(c)) for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        rows = [f"{'check':<28} {'result':<6} {'measured':>12} {'threshold':>12}"]
        for c in self.checks:
            rows.append(f"{c.name:<28} {'PASS' if c.passed else 'FAIL':<6} {c.measured:>12.4e} {c.threshold:>12.4e}")
        rows.append(f"overall: {'PASS' if self.overall else 'FAIL'}")
        return "\n".join(rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, (int, float, str, bool)) or obj is None:
        return obj
    return str(obj)


# ---------------------------------------------------------------------------
# WSI and ordering
# ---------------------------------------------------------------------------

def classify_shift(u: Field, k: Sequence[int], tol: float) -> tuple:
    """(classification, min, max) of T_k u - u over the nodes where it is defined."""
    diff = translate(u, k).values - u.values
    valid = translate_valid(u.domain, k)
    d = diff[valid]
    if d.size == 0:
        return "undefined", 0.0, 0.0
    lo, hi = float(d.min()), float(d.max())
    if hi <= tol and lo >= -tol:
        return "equal", lo, hi
    if lo >= -tol:
        return "above", lo, hi
    if hi <= tol:
        return "below", lo, hi
    return "mixed", lo, hi


def _shifts(dom, bound: int):
    rng = range(-bound, bound + 1)
    for k in itertools.product(rng, repeat=dom.n + 1):
        if not any(k):
            continue
        if any(abs(k[a]) >= 2 * dom.R for a in range(dom.n2)):
            continue
        yield k


def check_wsi(
    u: Field,
    shift_bound: int = 3,
    tol: float = 1e-7,
    system: Optional[DirectionSystem] = None,
    alpha: Optional[Sequence] = None,
) -> CheckEntry:
    """Every translate is above, equal to or below u, and agrees with the lattice prediction."""
    if system is None and alpha is not None:
        system = make_direction_system(alpha)
    mixed, disagree = [], []
    worst = 0.0
    count = 0
    for k in _shifts(u.domain, shift_bound):
        cls, lo, hi = classify_shift(u, k, tol)
        if cls == "undefined":
            continue
        count += 1
        if cls == "mixed":
            mixed.append(list(k))
            worst = max(worst, min(hi, -lo))
            continue
        if system is not None:
            want = ORDER_NAMES[system.predicted_order(k)]
            if want != cls:
                disagree.append({"k": list(k), "observed": cls, "predicted": want})
    passed = not mixed and not disagree
    return CheckEntry("wsi", passed, worst, tol, {
        "shifts_checked": count, "mixed": mixed[:20], "disagreements": disagree[:20],
        "n_mixed": len(mixed), "n_disagree": len(disagree)})


def check_ordered(fields: Sequence[Field], tol: float = 1e-7) -> CheckEntry:
    """Every pair is nodewise comparable up to ``tol``."""
    worst = 0.0
    bad = []
    for i, j in itertools.combinations(range(len(fields)), 2):
        d = fields[i].values - fields[j].values
        viol = min(float(d.max()), float(-d.min()))
        viol = max(viol, 0.0)
        worst = max(worst, viol)
        if viol > tol:
            bad.append([i, j])
    return CheckEntry("ordered", not bad, worst, tol, {"unordered_pairs": bad[:20], "n_fields": len(fields)})


# ---------------------------------------------------------------------------
# boundedness and integral bounds
# ---------------------------------------------------------------------------

def check_rotation_bound(u: Field, alpha: Sequence, tol: float = 1e-6) -> CheckEntry:
    """|u - alpha . x| on the outer shell does not exceed its sup on the inner half."""
    dom = u.domain
    a = np.array([float(QuadraticNumber.coerce(x)) for x in alpha])
    dev = np.abs(u.values - dom.coords() @ a)
    sup_all = float(dev.max())
    if dom.n2 == 0:
        jumps_ok = all(math.isclose(a[dom.n2 + i] * p, j, abs_tol=1e-9)
                       for i, (p, j) in enumerate(zip(dom.periods, dom.jumps)))
        return CheckEntry("rotation_bound", jumps_ok and math.isfinite(sup_all), sup_all, tol,
                          {"periodic": True, "jumps_match_alpha": jumps_ok})
    inner = np.ones(dom.shape, dtype=bool)
    for ax in range(dom.n2):
        x = np.abs(dom.axis_coords(ax)).reshape([-1 if b == ax else 1 for b in range(dom.n)])
        inner = inner & (x <= dom.R / 2)
    sup_in = float(dev[inner].max())
    sup_out = float(dev[~inner].max())
    return CheckEntry("rotation_bound", sup_out <= sup_in + tol, sup_all, tol,
                      {"inner_sup": sup_in, "shell_sup": sup_out})


def _covolume(basis_rows: Sequence[Sequence[int]], n: int) -> sympy.Expr:
    rows = [list(r[:n]) for r in basis_rows]
    if not rows:
        return sympy.Integer(1)
    M = sympy.Matrix(rows)
    return sympy.sqrt((M * M.T).det())


def check_bangert_bound(
    v: Field,
    w: Field,
    alpha: Sequence,
    eps_quad: float,
    shift_bound: int = 2,
    tol: float = 1e-9,
) -> CheckEntry:
    """L1 and L2 integrals of w - v per fundamental cell of the periodicity lattice are <= 1.

    The premise (T_k v >= w whenever k . (-alpha, 1) > 0) is verified first on
    the enumerated shifts; it implies v + 1 >= w, which is asserted as well.
    """
    dom = v.domain
    system = make_direction_system(alpha)
    for k in _shifts(dom, shift_bound):
        if dot(k, system.dir1).sign() <= 0:
            continue
        d = (translate(v, k).values - w.values)[translate_valid(dom, k)]
        if d.size and float(d.min()) < -tol:
            raise PremiseViolated(f"T_{tuple(k)} v falls below w by {-float(d.min()):.3e}")
    if float(np.min(v.values + 1.0 - w.values)) < -tol:
        raise PremiseViolated("v + 1 >= w fails")
    gap = w.values - v.values
    covol = float(_covolume(system.lattices[1].basis, dom.n))
    torus = float(np.prod(dom.periods)) if dom.periods else 1.0
    scale = dom.cell_volume * covol / torus
    L1 = float(box_sum(gap, dom).sum()) * scale
    L2 = float(box_sum(gap * gap, dom).sum()) * scale
    thr = 1.0 + eps_quad
    return CheckEntry("bangert_bound", L1 <= thr and L2 <= thr, max(L1, L2), thr,
                      {"L1": L1, "L2": L2, "covolume": covol})


# ---------------------------------------------------------------------------
# heteroclinic structure
# ---------------------------------------------------------------------------

def _strip_l2(diff: np.ndarray, dom, i: int) -> float:
    s = strip_axis(dom)
    boxes = box_sum(diff * diff, dom) * dom.cell_volume
    return math.sqrt(float(np.take(boxes, i + dom.R, axis=s).sum()))


def check_heteroclinic(U: Field, pair: ConstraintPair, tol: float = 1e-3, ends=None) -> CheckEntry:
    """Far strips close to the limits and the profile nondecreasing along the strip axis."""
    dom = U.domain
    P = dom.R
    left, right = ends if ends is not None else (pair.lower, pair.upper)
    s = strip_axis(dom)
    lnorm = [_strip_l2(U.values - left.values, dom, i) for i in (-P, -P + 1)]
    rnorm = [_strip_l2(U.values - right.values, dom, i) for i in (P - 2, P - 1)]
    k = [0] * (dom.n + 1)
    k[s] = -1  # tau_{-1} U (x) = U(x + e_s)
    step = translate(U, k).values - U.values
    mono = float(max(0.0, -step[translate_valid(dom, k)].min()))
    measured = max(lnorm + rnorm + [mono])
    return CheckEntry("heteroclinic", measured <= tol, measured, tol,
                      {"left_strip_l2": lnorm, "right_strip_l2": rnorm, "monotone_violation": mono})


def _strip_pair(pair: ConstraintPair, i: int) -> ConstraintPair:
    return ConstraintPair(strip_restrict(pair.lower, i), strip_restrict(pair.upper, i))


def check_strip_limits(
    u: Field,
    pair: ConstraintPair,
    spec: PotentialSpec,
    tol: float = 1e-6,
    plateau_tol: float = 1e-6,
) -> CheckEntry:
    """Strip limits phi (left) and psi (right), plus intermediate plateaus, have J1 <= tol.

    A plateau is a run of at least two consecutive strips with identical
    profiles (sup difference <= plateau_tol).  If every strip carries the same
    profile, u itself is a strip-independent field and is tested directly.
    """
    dom = u.domain
    P = dom.R
    profiles = [strip_restrict(u, i) for i in range(-P, P)]
    same = [float(np.max(np.abs(profiles[j + 1].values - profiles[j].values))) <= plateau_tol
            for j in range(len(profiles) - 1)]
    plateaus = []
    j = 0
    while j < len(same):
        if same[j]:
            start = j
            while j < len(same) and same[j]:
                j += 1
            plateaus.append((start - P, j - P))
        j += 1
    levels = []
    for a, b in plateaus:
        prof = profiles[a + P]
        if levels and float(np.max(np.abs(prof.values - levels[-1][1].values))) <= plateau_tol:
            continue
        levels.append(((a, b), prof))
    branch = "in_M1" if all(same) else "limits"
    ends = [(-P, profiles[0]), (P - 1, profiles[-1])]
    tested = ends + [(ab[0], prof) for ab, prof in levels]
    worst = 0.0
    values = []
    for i, prof in tested:
        sp = _strip_pair(pair, i)
        val = J1(prof, sp.lower, sp, spec, member_tol=max(tol, 1e-10)).total
        values.append({"strip": i, "J1": val, "mean": float(prof.values.mean())})
        worst = max(worst, abs(val))
    intermediate = [lv for lv in levels
                    if float(np.max(np.abs(lv[1].values - profiles[0].values))) > plateau_tol
                    and float(np.max(np.abs(lv[1].values - profiles[-1].values))) > plateau_tol]
    return CheckEntry("strip_limits", worst <= tol, worst, tol, {
        "branch": branch,
        "levels": values,
        "intermediate_levels": [float(lv[1].values.mean()) for lv in intermediate],
    })


# name used by the operation contract
check_corollary_249 = check_strip_limits
