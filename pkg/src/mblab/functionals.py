"""Discrete Lagrangian and the renormalized functionals J1 and J2.

Quadrature: the potential is sampled at the nodes (each node owns one cell of
volume h^n) and the gradient term uses forward differences on cell edges,
weighted by 1/lambda_k.  Both pieces are sums of nodal terms and of convex
functions of edge differences, so the discrete energy is submodular under
pointwise min/max.

Windows and strips are indexed by unit boxes: a node with coordinate x
belongs to box floor(x).  Box indices run over [-R, R-1] on truncated axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainMismatch, NotInGamma1, NotInGamma2, StripOutOfRange, WindowOutOfRange
from .grid import (
    ConstraintPair,
    DomainSpec,
    Field,
    box_sum,
    box_w12_sq,
    forward_differences,
    l1_norm,
    strip_axis,
    strip_domain,
    strip_restrict,
    translate,
)
from .potential import PotentialSpec, eval_F, sup_norm_Fu


@dataclass
class RenormValue:
    total: float
    window_terms: dict = field(default_factory=dict)
    tail_bound: float = 0.0
    converged: bool = True
    sequence: list = field(default_factory=list)
    monotone_tail: bool = True

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "window_terms": {",".join(map(str, k)): v for k, v in sorted(self.window_terms.items())},
            "tail_bound": self.tail_bound,
            "converged": self.converged,
            "sequence": list(self.sequence),
            "monotone_tail": self.monotone_tail,
        }


@dataclass
class BoundConstants:
    K1: float
    K2: float
    C_alpha: float
    Fu_sup: float
    gap_L1: float
    gap_L1_strip: float = float("nan")


# ---------------------------------------------------------------------------
# discrete Lagrangian
# ---------------------------------------------------------------------------

def lagrangian_density(u: Field, spec: PotentialSpec) -> np.ndarray:
    """Per-node value of 1/2 sum_k |D_k u|^2 / lambda_k + F(x, u) (no volume factor)."""
    dom = u.domain
    h2 = dom.h * dom.h
    dens = eval_F(spec, dom.coords(), u.values) if spec.terms else np.zeros(dom.shape)
    for lam, d in zip(dom.lambdas, forward_differences(u.values, dom)):
        dens = dens + (0.5 / lam) * d * d / h2
    return dens


def box_energies(u: Field, spec: PotentialSpec) -> np.ndarray:
    """Integral of L(u) over every unit box, shape ``domain.box_shape``."""
    return box_sum(lagrangian_density(u, spec), u.domain) * u.domain.cell_volume


def total_energy(u: Field, spec: PotentialSpec) -> float:
    return float(box_energies(u, spec).sum())


def _box_local(dom: DomainSpec, box: Sequence[int]) -> tuple:
    out = []
    for a, k in enumerate(box):
        j = k + dom.R if a < dom.n2 else k
        if not 0 <= j < dom.box_shape[a]:
            raise WindowOutOfRange(f"box index {k} outside the domain on axis {a}")
        out.append(j)
    return tuple(out)


def local_lagrangian(u: Field, spec: PotentialSpec, cell: Sequence[int]) -> float:
    """Integral of L(u) over the unit box ``cell`` (global box indices, length n)."""
    return float(box_energies(u, spec)[_box_local(u.domain, cell)])


def _window_slices(dom: DomainSpec, p: Sequence[int], q: Sequence[int]) -> tuple:
    if len(p) != dom.n2 or len(q) != dom.n2:
        raise WindowOutOfRange(f"window corners need {dom.n2} entries")
    sl = []
    for a in range(dom.n2):
        if p[a] > q[a] or p[a] < -dom.R or q[a] > dom.R - 1:
            raise WindowOutOfRange(f"window [{p[a]}, {q[a]}] outside [-{dom.R}, {dom.R - 1}]")
        sl.append(slice(p[a] + dom.R, q[a] + dom.R + 1))
    return tuple(sl)


def box_differences(u: Field, v: Field, spec: PotentialSpec) -> np.ndarray:
    """Per-box integral of L(u) - L(v)."""
    if u.domain != v.domain:
        raise DomainMismatch("u and v live on different domains")
    return box_energies(u, spec) - box_energies(v, spec)


def J1_window(u: Field, v: Field, spec: PotentialSpec, p: Sequence[int], q: Sequence[int]) -> float:
    """Integral of L(u) - L(v) over the boxes T_k, p <= k <= q (truncated axes)."""
    diff = box_differences(u, v, spec)
    return float(diff[_window_slices(u.domain, p, q)].sum())


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

@dataclass
class Membership:
    ok: bool
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def _strip_l2(diff: np.ndarray, dom: DomainSpec, i: int) -> float:
    s = strip_axis(dom)
    boxes = box_sum(diff * diff, dom) * dom.cell_volume
    return math.sqrt(float(np.take(boxes, i + dom.R, axis=s).sum()))


def membership(
    u: Field,
    cls: str,
    pair: ConstraintPair,
    tol: float = 1e-8,
    generators: Optional[Sequence[Sequence[int]]] = None,
    vtilde: Optional[Field] = None,
) -> Membership:
    """Check u against Gamma1, Gamma1_l, Gamma2 or Gamma2_tilde.

    Gamma1 additionally requires invariance under ``generators`` (shifts of
    the second lattice; default: unit shifts along jump-free periodic axes).
    """
    dom = u.domain
    bad = []
    below = float(np.max(pair.lower.values - u.values, initial=-np.inf))
    above = float(np.max(u.values - pair.upper.values, initial=-np.inf))
    if cls in ("Gamma1", "Gamma1_l", "Gamma2", "Gamma2_tilde"):
        if below > tol:
            bad.append(f"u below lower obstacle by {below:.3e}")
        if above > tol:
            bad.append(f"u above upper obstacle by {above:.3e}")
    else:
        raise ValueError(f"unknown class {cls!r}")
    if cls == "Gamma1":
        if generators is None:
            generators = []
            for a in range(dom.n2, dom.n):
                if dom.periods[a - dom.n2] > 1 and dom.jumps[a - dom.n2] == 0:
                    k = [0] * (dom.n + 1)
                    k[a] = 1
                    generators.append(k)
        for k in generators:
            dev = float(np.max(np.abs(translate(u, k).values - u.values)))
            if dev > tol:
                bad.append(f"not invariant under shift {tuple(k)} (deviation {dev:.3e})")
    if cls == "Gamma2":
        P = dom.R
        left = _strip_l2(u.values - pair.lower.values, dom, -P)
        right = _strip_l2(u.values - pair.upper.values, dom, P - 1)
        if left > tol:
            bad.append(f"||u - v||_L2(S_{-P}) = {left:.3e} exceeds {tol:.1e}")
        if right > tol:
            bad.append(f"||u - w||_L2(S_{P - 1}) = {right:.3e} exceeds {tol:.1e}")
    if cls == "Gamma2_tilde":
        if vtilde is None:
            raise ValueError("Gamma2_tilde needs vtilde")
        P = dom.R
        diff = u.values - vtilde.values
        branch_a = max(_strip_l2(diff, dom, -P), _strip_l2(diff, dom, P - 1)) <= tol
        # compact support proxy: u - vtilde vanishes within two strips of either end
        s = strip_axis(dom)
        m = dom.m
        edge = np.concatenate(
            [np.take(diff, np.arange(0, 2 * m + 1), axis=s).ravel(),
             np.take(diff, np.arange(dom.shape[s] - 2 * m - 1, dom.shape[s]), axis=s).ravel()]
        )
        branch_b = bool(np.max(np.abs(edge)) <= tol)
        if not (branch_a or branch_b):
            bad.append("u - vtilde neither decays at both ends nor has support away from them")
    return Membership(not bad, bad)


# ---------------------------------------------------------------------------
# J1
# ---------------------------------------------------------------------------

def _shell_mask(box_shape: Sequence[int], ntrunc: int) -> np.ndarray:
    mask = np.zeros(box_shape, dtype=bool)
    for a in range(ntrunc):
        idx = [slice(None)] * len(box_shape)
        idx[a] = 0
        mask[tuple(idx)] = True
        idx[a] = -1
        mask[tuple(idx)] = True
    return mask


def _expanding(diff: np.ndarray, dom: DomainSpec, axes: Sequence[int]) -> list:
    """Sums over the symmetric windows [-r, r-1] on ``axes``, r = 1..R."""
    seq = []
    for r in range(1, dom.R + 1):
        sl = [slice(None)] * diff.ndim
        for a in axes:
            sl[a] = slice(dom.R - r, dom.R + r)
        seq.append(float(diff[tuple(sl)].sum()))
    return seq


def J1(
    u: Field,
    v: Field,
    pair: ConstraintPair,
    spec: PotentialSpec,
    tail_tol: float = 1e-6,
    member_tol: float = 1e-10,
) -> RenormValue:
    """Expanding-window evaluation of J1(u) = lim J_{1;p,q}(u)."""
    mem = membership(u, "Gamma1_l", pair, tol=member_tol)
    if not mem:
        raise NotInGamma1("; ".join(mem.violations))
    dom = u.domain
    diff = box_differences(u, v, spec)
    terms = {}
    for idx in np.ndindex(*dom.box_shape[: dom.n2]):
        key = tuple(k - dom.R for k in idx)
        terms[key] = float(diff[idx].sum())
    total = float(diff.sum())
    if dom.n2 == 0:
        return RenormValue(total, terms, 0.0, True, [total], True)
    seq = _expanding(diff, dom, range(dom.n2))
    shell = _shell_mask(dom.box_shape, dom.n2)
    shell_sum = float(diff[shell].sum())
    decay = float(np.sqrt(box_w12_sq(u.values - v.values, dom)[shell].max()))
    tail = abs(shell_sum)
    converged = tail < tail_tol and decay < tail_tol
    monotone = _monotone_tail(seq)
    return RenormValue(total, terms, tail, converged, seq, monotone)


def _monotone_tail(seq: Sequence[float]) -> bool:
    if len(seq) < 3:
        return True
    d = np.diff(seq[len(seq) // 2:])
    return bool(np.all(d >= -1e-14) or np.all(d <= 1e-14))


def K1_bound(v: Field, w: Field, spec: PotentialSpec) -> BoundConstants:
    """K1 = C(alpha) + 2 ||F_u||_inf ||w - v||_L1, with C(alpha) measured from v."""
    dom = v.domain
    grads = forward_differences(v.values, dom)
    gsq = sum((d / dom.h) ** 2 for d in grads) if grads else np.zeros(dom.shape)
    C = float(np.sqrt(np.max(gsq)))
    fu = sup_norm_Fu(spec)
    gap = l1_norm(w.values - v.values, dom)
    K1 = C + 2.0 * fu * gap
    if dom.n2 >= 1:
        sd = strip_domain(dom)
        g_strip = l1_norm(strip_restrict(w, 0).values - strip_restrict(v, 0).values, sd)
    else:
        g_strip = gap
    K2 = 2.0 * (C + 2.0 * fu * g_strip)
    return BoundConstants(K1, K2, C, fu, gap, g_strip)


# ---------------------------------------------------------------------------
# J2
# ---------------------------------------------------------------------------

def strip_terms(u: Field, v: Field, spec: PotentialSpec) -> np.ndarray:
    """J_{2,i}(u) for i = -P..P-1 (P = R of the strip axis)."""
    dom = u.domain
    s = strip_axis(dom)
    diff = box_differences(u, v, spec)
    other = tuple(a for a in range(dom.n) if a != s)
    return diff.sum(axis=other) if other else diff


def J2_strip(u: Field, pair: ConstraintPair, spec: PotentialSpec, i: int) -> float:
    dom = u.domain
    if not -dom.R <= i <= dom.R - 1:
        raise StripOutOfRange(f"strip {i} outside [-{dom.R}, {dom.R - 1}]")
    return float(strip_terms(u, pair.lower, spec)[i + dom.R])


def J2_partial(u: Field, pair: ConstraintPair, spec: PotentialSpec, p: int, q: int) -> float:
    dom = u.domain
    if p > q or p < -dom.R or q > dom.R - 1:
        raise StripOutOfRange(f"strip window [{p}, {q}] outside [-{dom.R}, {dom.R - 1}]")
    return float(strip_terms(u, pair.lower, spec)[p + dom.R: q + dom.R + 1].sum())


def J2(
    u: Field,
    pair: ConstraintPair,
    spec: PotentialSpec,
    tail_tol: float = 1e-6,
    ends: Optional[tuple] = None,
    member_tol: float = 1e-10,
) -> RenormValue:
    """Sum of strip functionals; ``ends`` = (left limit, right limit), default (v, w)."""
    dom = u.domain
    left, right = ends if ends is not None else (pair.lower, pair.upper)
    mem = membership(u, "Gamma1_l", pair, tol=member_tol)
    P = dom.R
    dl = _strip_l2(u.values - left.values, dom, -P)
    dr = _strip_l2(u.values - right.values, dom, P - 1)
    if not mem or dl > tail_tol or dr > tail_tol:
        msg = mem.violations + [f"end-strip distances {dl:.3e}, {dr:.3e} vs {tail_tol:.1e}"]
        raise NotInGamma2("; ".join(msg))
    terms_arr = strip_terms(u, pair.lower, spec)
    terms = {(i - P,): float(t) for i, t in enumerate(terms_arr)}
    total = float(terms_arr.sum())
    seq = [float(terms_arr[P - r: P + r].sum()) for r in range(1, P + 1)]
    tail = abs(float(terms_arr[0])) + abs(float(terms_arr[-1]))
    converged = tail < tail_tol and max(dl, dr) < tail_tol
    return RenormValue(total, terms, tail, converged, seq, _monotone_tail(seq))


def window_upper_bound_M(n2: int) -> int:
    """Constant M of the window bound J_{1;p,q} <= J1 + M K1."""
    return 3 ** n2
