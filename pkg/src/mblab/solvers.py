"""Constrained minimization of the discrete energy.

The default scheme is a projected nonlinear Gauss-Seidel iteration on a
red-black colouring: every node of one colour is replaced by the minimizer of
the energy as a function of that node alone, clamped to the obstacles.  When
``2 sum_k 1/lambda_k / h^2`` exceeds ``sup |F_uu|`` the one-node problem is
strictly convex and a bracketed Newton iteration solves it exactly; otherwise
a scan over the bracket picks the smallest global minimizer first.  Both
variants map ordered neighbourhoods to ordered updates, so sweeps preserve the
pointwise order of two iterates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import GapConditionViolated, NotInGamma1, NotInGamma2
from .functionals import (
    J1,
    J2,
    RenormValue,
    box_energies,
    _strip_l2,
    membership,
    strip_terms,
    total_energy,
)
from .grid import (
    ConstraintPair,
    DomainSpec,
    Field,
    box_sum,
    coarsen,
    linear_field,
    neighbor,
    refine,
    strip_axis,
    translate,
    translate_valid,
)
from .potential import TWO_PI, PotentialSpec, eval_Fu, sup_norm_Fuu
from .quadratic import QuadraticNumber

log = logging.getLogger(__name__)

SCHEMES = ("gauss_seidel_monotone", "projected_gradient")


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 200_000
    residual_tol: float = 1e-8
    energy_tol: float = 1e-10
    scheme: str = "gauss_seidel_monotone"
    relaxation: float = 1.0
    seed: int = 0
    check_energy: bool = True
    multilevel: bool = True
    coarsest_m: int = 8
    check_every: int = 4

    def __post_init__(self):
        if self.residual_tol < 0 or self.energy_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@dataclass
class SolveResult:
    field: Field
    energy: RenormValue
    residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

def pde_operator(u: Field, spec: PotentialSpec) -> np.ndarray:
    """-sum_k D_k^2 u / lambda_k + F_u(x, u) at every node (edge nodes unreliable)."""
    dom = u.domain
    h2 = dom.h * dom.h
    out = eval_Fu(spec, dom.coords(), u.values) if spec.terms else np.zeros(dom.shape)
    for a, lam in enumerate(dom.lambdas):
        lap = neighbor(u.values, dom, a, 1) + neighbor(u.values, dom, a, -1) - 2.0 * u.values
        out = out - lap / (lam * h2)
    return out


def residual(u: Field, spec: PotentialSpec) -> float:
    """Sup over interior nodes of |-Delta_lambda u + F_u(x, u)|."""
    r = pde_operator(u, spec)
    mask = u.domain.interior_mask()
    return float(np.max(np.abs(r[mask]), initial=0.0))


def projected_residual(u: Field, spec: PotentialSpec, lower, upper, free: np.ndarray, contact_tol=1e-13) -> float:
    """KKT residual: plain residual off the obstacles, one-sided on contact."""
    r = pde_operator(u, spec)
    out = np.abs(r)
    if lower is not None:
        on_low = u.values <= lower + contact_tol
        out = np.where(on_low, np.maximum(-r, 0.0), out)
    if upper is not None:
        on_up = u.values >= upper - contact_tol
        out = np.where(on_up, np.maximum(r, 0.0), out)
    return float(np.max(out[free], initial=0.0))


# ---------------------------------------------------------------------------
# red-black relaxation
# ---------------------------------------------------------------------------

class _Stencil:
    """Flattened neighbour tables for the free nodes of each colour."""

    def __init__(self, dom: DomainSpec, free: np.ndarray):
        self.dom = dom
        shape = dom.shape
        total = int(np.prod(shape))
        flat = np.arange(total).reshape(shape)
        coords = dom.coords().reshape(total, dom.n)
        gsum = np.zeros(shape, dtype=np.int64)
        for a in range(dom.n):
            g = np.arange(shape[a]).reshape([-1 if b == a else 1 for b in range(dom.n)])
            gsum = gsum + g
        odd_periodic = any(shape[a] % 2 for a in range(dom.n2, dom.n))
        if odd_periodic:
            # one colour per node along the flattened order: plain Gauss-Seidel
            colours = [np.array([i]) for i in flat[free]]
        else:
            parity = (gsum % 2).ravel()
            fr = free.ravel()
            colours = [np.flatnonzero(fr & (parity == c)) for c in (0, 1)]
        w = np.array([1.0 / lam for lam in dom.lambdas])
        self.diag = 2.0 * w.sum() / (dom.h * dom.h)
        self.groups = []
        for idx in colours:
            if idx.size == 0:
                continue
            nbp, nbm, cp, cm = [], [], [], []
            multi = np.unravel_index(idx, shape)
            for a in range(dom.n):
                N = shape[a]
                j = multi[a]
                jp, jm = j + 1, j - 1
                corr_p = np.zeros(idx.size)
                corr_m = np.zeros(idx.size)
                if dom.is_periodic(a):
                    jump = dom.jumps[a - dom.n2]
                    corr_p = np.where(jp >= N, jump, 0.0)
                    corr_m = np.where(jm < 0, -jump, 0.0)
                    jp = jp % N
                    jm = jm % N
                mp = list(multi)
                mp[a] = jp
                mm = list(multi)
                mm[a] = jm
                nbp.append(np.ravel_multi_index(mp, shape))
                nbm.append(np.ravel_multi_index(mm, shape))
                cp.append(corr_p)
                cm.append(corr_m)
            self.groups.append([idx, nbp, nbm, cp, cm, coords[idx]])
        self.weights = w


class _LocalPotential:
    """F(x, .) at a fixed set of nodes: x-factors are evaluated once."""

    def __init__(self, spec: PotentialSpec, x: np.ndarray):
        self.parts = []
        for t in spec.terms:
            amp = t.coeff * _g_x(t, x)
            self.parts.append((amp, TWO_PI * t.ufreq, t.ukind))

    def value(self, s):
        out = 0.0
        for amp, w, kind in self.parts:
            c = np.cos(w * s)
            if kind == "cos":
                g = c
            elif kind == "sin":
                g = np.sin(w * s)
            else:
                g = 1.0 - c
            out = out + amp * g
        return out

    def derivs(self, s):
        """First and second derivative in u."""
        d1 = 0.0
        d2 = 0.0
        for amp, w, kind in self.parts:
            c = np.cos(w * s)
            sn = np.sin(w * s)
            if kind == "cos":
                d1 = d1 - amp * w * sn
                d2 = d2 - amp * w * w * c
            elif kind == "sin":
                d1 = d1 + amp * w * c
                d2 = d2 - amp * w * w * sn
            else:
                d1 = d1 + amp * w * sn
                d2 = d2 + amp * w * w * c
        return d1, d2


def _g_x(t, x):
    theta = TWO_PI * (x @ np.asarray(t.xfreq, dtype=float))
    if t.xkind == "cos":
        return np.cos(theta)
    if t.xkind == "sin":
        return np.sin(theta)
    return 1.0 - np.cos(theta)


def _line_min(loc: _LocalPotential, mean, diag, lo, hi, s0, convex):
    """argmin_s diag/2 (s - mean)^2 + F(x, s) over [lo, hi], vectorized.

    Safeguarded Newton on the derivative inside a sign-change bracket.  In the
    nonconvex case a sample scan first locates the smallest global minimizer.
    """
    if not loc.parts:
        return np.clip(mean, lo, hi)

    def gp(s):
        return diag * (s - mean) + loc.derivs(s)[0]

    if not convex:
        s0 = _scan_start(loc, mean, diag, lo, hi)
        # bracket the chosen basin: one sample spacing either side
        width = np.where(np.isfinite(hi - lo), hi - lo, 2.0) / 128.0
        lo_b = np.maximum(lo, s0 - width)
        hi_b = np.minimum(hi, s0 + width)
    else:
        lo_b, hi_b = lo, hi
    a = np.where(np.isfinite(lo_b), lo_b, mean - 1.0)
    b = np.where(np.isfinite(hi_b), hi_b, mean + 1.0)
    for _ in range(60):
        bad_a = (gp(a) > 0) & ~np.isfinite(lo_b)
        bad_b = (gp(b) < 0) & ~np.isfinite(hi_b)
        if not (bad_a.any() or bad_b.any()):
            break
        a = np.where(bad_a, a - 2.0 * (b - a + 1.0), a)
        b = np.where(bad_b, b + 2.0 * (b - a + 1.0), b)
    ga = gp(a)
    gb = gp(b)
    # minimizers sitting on a bracket end are final; collapse their bracket
    b = np.where(ga >= 0, a, b)
    a = np.where(gb <= 0, b, a)
    s = np.clip(s0, a, b)
    for _ in range(100):
        d1, d2 = loc.derivs(s)
        g = diag * (s - mean) + d1
        neg = g < 0
        a = np.where(neg, s, a)
        b = np.where(neg, b, s)
        cand = s - g / (diag + d2)
        outside = ~((cand >= a) & (cand <= b))
        cand = np.where(outside, 0.5 * (a + b), cand)
        step = np.max(np.abs(cand - s))
        s = cand
        if step <= 4e-15 * max(1.0, float(np.max(np.abs(s)))):
            break
    return np.clip(s, lo, hi)


def _scan_start(loc, mean, diag, lo, hi, samples=129):
    """Smallest global minimizer on a sample grid, as Newton start."""
    a = np.where(np.isfinite(lo), lo, mean - 1.0)
    b = np.where(np.isfinite(hi), hi, mean + 1.0)
    t = np.linspace(0.0, 1.0, samples)
    S = a[:, None] + (b - a)[:, None] * t[None, :]
    G = 0.5 * diag * (S - mean[:, None]) ** 2
    for amp, w, kind in loc.parts:
        c = np.cos(w * S)
        g = c if kind == "cos" else (np.sin(w * S) if kind == "sin" else 1.0 - c)
        G = G + amp[:, None] * g
    k = np.argmin(G, axis=1)
    return S[np.arange(S.shape[0]), k]


class Relaxer:
    """Projected red-black Gauss-Seidel on a fixed set of free nodes."""

    def __init__(self, spec: PotentialSpec, dom: DomainSpec, free: np.ndarray, lower=None, upper=None, relaxation=1.0):
        self.spec = spec
        self.dom = dom
        self.st = _Stencil(dom, free)
        self.lower = None if lower is None else np.asarray(lower, dtype=float).ravel()
        self.upper = None if upper is None else np.asarray(upper, dtype=float).ravel()
        self.convex = self.st.diag > sup_norm_Fuu(spec)
        self.locals = [_LocalPotential(spec, g[5]) for g in self.st.groups]
        self.lo = [self.lower[g[0]] if self.lower is not None else np.full(g[0].size, -np.inf) for g in self.st.groups]
        self.hi = [self.upper[g[0]] if self.upper is not None else np.full(g[0].size, np.inf) for g in self.st.groups]
        self.omega = relaxation
        # over-relaxed steps still descend while omega < 2 (c - K) / (c + K)
        K = sup_norm_Fuu(spec)
        self.descent_guaranteed = relaxation == 1.0 or (
            self.convex and relaxation < 2.0 * (self.st.diag - K) / (self.st.diag + K))

    def sweep(self, flat: np.ndarray) -> None:
        st = self.st
        wsum = 2.0 * st.weights.sum()
        for (idx, nbp, nbm, cp, cm, _), loc, lo, hi in zip(st.groups, self.locals, self.lo, self.hi):
            acc = 0.0
            for a in range(self.dom.n):
                acc = acc + st.weights[a] * (flat[nbp[a]] + cp[a] + flat[nbm[a]] + cm[a])
            mean = acc / wsum
            s = _line_min(loc, mean, st.diag, lo, hi, flat[idx], self.convex)
            if self.omega != 1.0:
                s = np.clip(flat[idx] + self.omega * (s - flat[idx]), lo, hi)
            flat[idx] = s


def _relax(
    u0: Field,
    spec: PotentialSpec,
    free: np.ndarray,
    lower,
    upper,
    cfg: SolverConfig,
    energy_fn,
):
    """Iterate sweeps until the projected residual drops below tolerance.

    With ``cfg.multilevel`` the problem is first solved on the grid with
    doubled spacing (recursively), and the interpolated coarse solution
    replaces the free values of ``u0``.  Injection, linear interpolation and
    clamping all preserve pointwise order, so the comparison principle
    survives the cascade.
    """
    dom = u0.domain
    vals = u0.values.copy()
    coarse_its = 0
    if cfg.multilevel and dom.m % 2 == 0 and dom.m // 2 >= cfg.coarsest_m:
        sl = tuple(slice(None, None, 2) for _ in range(dom.n))
        uc = coarsen(u0)
        lc = None if lower is None else np.asarray(lower)[sl]
        hc = None if upper is None else np.asarray(upper)[sl]
        ccfg = replace(cfg, residual_tol=max(cfg.residual_tol, 1e-6), scheme="gauss_seidel_monotone")
        coarse, _, coarse_its, _ = _relax(
            uc, spec, free[sl], lc, hc, ccfg, lambda f: total_energy(f, spec))
        fine = refine(coarse, 2).values
        vals = np.where(free, fine, vals)
    if lower is not None:
        vals = np.maximum(vals, lower)
    if upper is not None:
        vals = np.minimum(vals, upper)
    if cfg.scheme == "projected_gradient":
        vals = _projected_gradient(Field(dom, vals, u0.boundary_mode), spec, free, lower, upper, cfg)
    relaxer = Relaxer(spec, dom, free, lower, upper, cfg.relaxation)
    flat = vals.ravel()
    history = []
    E = energy_fn(Field(dom, vals, u0.boundary_mode))
    res = projected_residual(Field(dom, vals), spec, lower, upper, free)
    history.append((0, E, res, _contacts(vals, lower, upper, free)))
    it = 0
    stall = 0
    best = res
    while res > cfg.residual_tol and it < cfg.max_iters:
        relaxer.sweep(flat)
        it += 1
        if it % cfg.check_every and it < cfg.max_iters:
            continue
        f = Field(dom, vals, u0.boundary_mode)
        E_new = energy_fn(f)
        if cfg.check_energy and relaxer.descent_guaranteed:
            assert E_new <= E + 1e-12 * max(1.0, abs(E)), f"energy increased {E} -> {E_new}"
        E = E_new
        res = projected_residual(f, spec, lower, upper, free)
        history.append((it, E, res, _contacts(vals, lower, upper, free)))
        # give up once the residual has not improved for a long stretch
        if res < 0.999 * best:
            best, stall = res, 0
        else:
            stall += 1
            if stall >= 500:
                break
    return Field(dom, vals, u0.boundary_mode), res, it, history


def _contacts(vals, lower, upper, free, tol=1e-13) -> int:
    c = np.zeros(vals.shape, dtype=bool)
    if lower is not None:
        c |= vals <= lower + tol
    if upper is not None:
        c |= vals >= upper - tol
    return int(np.count_nonzero(c & free))


def _projected_gradient(u: Field, spec, free, lower, upper, cfg):
    """Bound-constrained quasi-Newton warm start (L-BFGS-B)."""
    dom = u.domain
    base = u.values.copy()
    idx = np.flatnonzero(free.ravel())
    vol = dom.cell_volume

    def fun(z):
        vals = base.copy().ravel()
        vals[idx] = z
        f = Field(dom, vals.reshape(dom.shape))
        E = float(box_energies(f, spec).sum())
        g = pde_operator(f, spec).ravel()[idx] * vol
        return E, g

    lo = None if lower is None else np.asarray(lower).ravel()[idx]
    hi = None if upper is None else np.asarray(upper).ravel()[idx]
    bounds = list(zip(lo if lo is not None else [None] * idx.size, hi if hi is not None else [None] * idx.size))
    out = minimize(fun, base.ravel()[idx], jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": min(cfg.max_iters, 20000), "ftol": 0.0, "maxcor": 20,
                            "gtol": 0.1 * cfg.residual_tol * vol})
    vals = base.ravel().copy()
    vals[idx] = out.x
    return vals.reshape(dom.shape)


# ---------------------------------------------------------------------------
# periodic minimizers
# ---------------------------------------------------------------------------

def _rational(a) -> Fraction:
    if isinstance(a, QuadraticNumber):
        return a.to_fraction()
    return Fraction(a)


def periodic_domain(alpha: Sequence, periods: Sequence[int], m: int, lambdas=()) -> DomainSpec:
    """Fully periodic torus whose jumps are alpha_k * period_k (must be integers)."""
    fr = [_rational(a) for a in alpha]
    jumps = []
    for a, p in zip(fr, periods):
        j = a * p
        if j.denominator != 1:
            raise ValueError(f"period {p} incompatible with rotation component {a}")
        jumps.append(int(j))
    return DomainSpec(len(fr), 0, 0, tuple(periods), m, tuple(lambdas), tuple(jumps))


def minimize_periodic(
    spec: PotentialSpec,
    alpha: Sequence,
    domain: DomainSpec,
    cfg: SolverConfig = SolverConfig(),
    init: Optional[Field] = None,
) -> SolveResult:
    """Minimize the energy per unit cell over u = alpha . x + periodic."""
    if domain.n2 != 0:
        raise ValueError("minimize_periodic needs a fully periodic domain")
    dom = periodic_domain(alpha, domain.periods, domain.m, domain.lambdas)
    alpha_f = [float(_rational(a)) for a in alpha]
    if init is None:
        u0 = linear_field(dom, alpha_f)
    else:
        if init.domain != dom:
            raise ValueError("init lives on a different domain")
        u0 = init
    free = np.ones(dom.shape, dtype=bool)
    vol = float(np.prod(dom.periods))
    u, res, it, hist = _relax(u0, spec, free, None, None, cfg, lambda f: total_energy(f, spec) / vol)
    boxes = box_energies(u, spec)
    terms = {tuple(int(i) for i in k): float(boxes[k]) for k in np.ndindex(*boxes.shape)}
    energy = RenormValue(float(boxes.sum()) / vol, terms, 0.0, True, [float(boxes.sum()) / vol])
    return SolveResult(u, energy, res, it, res <= cfg.residual_tol, hist)


# ---------------------------------------------------------------------------
# J1 in a gap
# ---------------------------------------------------------------------------

def _boundary_values(dom: DomainSpec, pair: ConstraintPair, ends=None) -> np.ndarray:
    """Target values on truncated faces: lower obstacle, except strip ends."""
    vals = pair.lower.values.copy()
    if ends is not None:
        s = strip_axis(dom)
        left, right = ends
        idx = [slice(None)] * dom.n
        idx[s] = 0
        vals[tuple(idx)] = left.values[tuple(idx)]
        idx[s] = -1
        vals[tuple(idx)] = right.values[tuple(idx)]
    return vals


def _apply_boundary(u: Field, target: np.ndarray) -> Field:
    interior = u.domain.interior_mask()
    return u.copy(np.where(interior, u.values, target))


def minimize_J1(
    pair: ConstraintPair,
    init: Field,
    spec: PotentialSpec,
    cfg: SolverConfig = SolverConfig(),
    tail_tol: float = 1e-6,
) -> SolveResult:
    """Minimize J1 over Gamma1(v, w) starting from ``init``."""
    mem = membership(init, "Gamma1_l", pair, tol=1e-12)
    if not mem:
        raise NotInGamma1("; ".join(mem.violations))
    dom = init.domain
    u0 = _apply_boundary(init, _boundary_values(dom, pair))
    free = dom.interior_mask()
    vE = total_energy(pair.lower, spec)
    u, res, it, hist = _relax(
        u0, spec, free, pair.lower.values, pair.upper.values, cfg,
        lambda f: total_energy(f, spec) - vE,
    )
    energy = J1(u, pair.lower, pair, spec, tail_tol=tail_tol)
    return SolveResult(u, energy, res, it, res <= cfg.residual_tol, hist)


# ---------------------------------------------------------------------------
# J2 heteroclinics
# ---------------------------------------------------------------------------

def check_gap_pair(pair: ConstraintPair, tol: float = 1e-12) -> None:
    gap = pair.upper.values - pair.lower.values
    if gap.size == 0 or float(gap.min()) <= tol:
        raise GapConditionViolated("obstacles touch: v < w fails")
    if float(gap.max()) > 1.0 + 1e-9:
        raise GapConditionViolated("w - v exceeds 1, so w > T_(0,1) v and the pair is not adjacent")


def sharp_interface(pair: ConstraintPair, ends=None) -> Field:
    """v on strips i < 0, w on strips i >= 0."""
    dom = pair.domain
    left, right = ends if ends is not None else (pair.lower, pair.upper)
    s = strip_axis(dom)
    x = dom.axis_coords(s).reshape([-1 if a == s else 1 for a in range(dom.n)])
    vals = np.where(x < 0, left.values, right.values)
    return Field(dom, vals, _strip_modes(dom))


def _strip_modes(dom: DomainSpec) -> tuple:
    modes = [("lower", "lower")] * dom.n2
    modes[strip_axis(dom)] = ("lower", "upper")
    return tuple(modes)


def _strip_integral(vals: np.ndarray, dom: DomainSpec, i: int) -> float:
    """Integral over [0,1]^{n2-1} x [i, i+1] x torus, the normalization window."""
    boxes = box_sum(vals, dom) * dom.cell_volume
    s = strip_axis(dom)
    idx = [slice(None)] * dom.n
    for a in range(dom.n2):
        idx[a] = dom.R  # box 0
    idx[s] = i + dom.R
    return float(boxes[tuple(idx)].sum())


def phase_shift(u: Field, pair: ConstraintPair) -> int:
    """Integer shift j such that u(. + j e) satisfies the normalization sandwich

    int_{S_-1} u <= 1/2 int_{S_0} (v + w) <= int_{S_0} u.
    """
    dom = u.domain
    target = 0.5 * _strip_integral(pair.lower.values + pair.upper.values, dom, 0)
    P = dom.R
    ints = [_strip_integral(u.values, dom, i) for i in range(-P, P)]
    for j in range(-P + 1, P):
        lo = ints[j - 1 + P]
        hi = ints[j + P]
        if lo <= target <= hi:
            return j
    return 0


def minimize_J2(
    pair: ConstraintPair,
    strips: int,
    init: Optional[Field],
    spec: PotentialSpec,
    cfg: SolverConfig = SolverConfig(),
    ends: Optional[tuple] = None,
    normalize: bool = True,
    tail_tol: float = 1e-6,
) -> SolveResult:
    """Minimize J2 over Gamma2(v, w) (or Gamma2(vtilde) when ``ends`` are equal)."""
    dom = pair.domain
    if dom.n2 < 1 or dom.R != strips:
        raise ValueError(f"strip axis must be truncated to [-{strips}, {strips}]")
    check_gap_pair(pair)
    if ends is None:
        ends = (pair.lower, pair.upper)
    same_ends = np.array_equal(ends[0].values, ends[1].values)
    if init is None:
        init = sharp_interface(pair, ends)
    mem = membership(init, "Gamma1_l", pair, tol=1e-12)
    if not mem:
        raise NotInGamma2("; ".join(mem.violations))
    target = _boundary_values(dom, pair, ends)
    u0 = _apply_boundary(init, target)
    u0.boundary_mode = _strip_modes(dom)
    free = dom.interior_mask()
    vE = total_energy(pair.lower, spec)

    def energy_fn(f):
        return total_energy(f, spec) - vE

    u, res, it, hist = _relax(u0, spec, free, pair.lower.values, pair.upper.values, cfg, energy_fn)
    shift = 0
    if normalize and not same_ends:
        shift = phase_shift(u, pair)
        if shift:
            k = [0] * (dom.n + 1)
            k[strip_axis(dom)] = -shift
            filled = np.where(
                dom.axis_coords(strip_axis(dom)).reshape(
                    [-1 if a == strip_axis(dom) else 1 for a in range(dom.n)]) < 0,
                ends[0].values, ends[1].values)
            moved = translate(u, k, fill=Field(dom, filled))
            moved = _apply_boundary(moved, target)
            u, res, it2, hist2 = _relax(moved, spec, free, pair.lower.values, pair.upper.values, cfg, energy_fn)
            hist += [(it + h[0], *h[1:]) for h in hist2[1:]]
            it += it2
    energy = J2(u, pair, spec, tail_tol=max(tail_tol, 1e-300), ends=ends) if _ends_ok(u, ends, tail_tol) \
        else _J2_unchecked(u, pair, spec)
    diag = {"phase_shift": shift}
    diag.update(_heteroclinic_diagnostics(u, pair, ends))
    return SolveResult(u, energy, res, it, res <= cfg.residual_tol, hist, diag)


def _ends_ok(u, ends, tol):
    dom = u.domain
    P = dom.R
    return (_strip_l2(u.values - ends[0].values, dom, -P) <= tol
            and _strip_l2(u.values - ends[1].values, dom, P - 1) <= tol)


def _J2_unchecked(u, pair, spec):
    t = strip_terms(u, pair.lower, spec)
    P = u.domain.R
    return RenormValue(float(t.sum()), {(i - P,): float(x) for i, x in enumerate(t)}, float("inf"), False,
                       [float(t[P - r: P + r].sum()) for r in range(1, P + 1)])


def _heteroclinic_diagnostics(u: Field, pair: ConstraintPair, ends) -> dict:
    dom = u.domain
    P = dom.R
    s = strip_axis(dom)
    left = [_strip_l2(u.values - ends[0].values, dom, i) for i in (-P, -P + 1)]
    right = [_strip_l2(u.values - ends[1].values, dom, i) for i in (P - 2, P - 1)]
    k = [0] * (dom.n + 1)
    k[s] = -1
    up = translate(u, k)
    valid = translate_valid(dom, k)
    mono = float(np.min((up.values - u.values)[valid], initial=0.0))
    return {
        "left_strip_l2": left,
        "right_strip_l2": right,
        "min_forward_step": mono,
        "min_gap_below": float(np.min(u.values - pair.lower.values)),
        "min_gap_above": float(np.min(pair.upper.values - u.values)),
    }


def truncation_study(pair_builder, strips: int, spec: PotentialSpec, cfg: SolverConfig = SolverConfig()) -> dict:
    """Solve at P and P + 2 and report the energy difference (no extrapolation)."""
    out = {}
    for P in (strips, strips + 2):
        pair = pair_builder(P)
        res = minimize_J2(pair, P, None, spec, cfg)
        out[P] = res.energy.total
    out["difference"] = out[strips + 2] - out[strips]
    return out


# ---------------------------------------------------------------------------
# original-coordinate residual after a coordinate reduction
# ---------------------------------------------------------------------------

def original_residual(u: Field, spec_x: PotentialSpec, red) -> float:
    """Residual of -Delta_x u + F_u(x, u) for a field computed in reduced coordinates.

    The field lives on a y-grid with x = B y.  A step s e_i in x is the y-step
    s B^{-1} e_i = s (B_ik / lambda_k)_k; with s = h * lcm(lambda) every such
    step lands on a y-node, so the plain x-stencil can be evaluated exactly.
    """
    dom = u.domain
    B = np.array(red.B, dtype=np.int64)
    lam = [int(v) for v in red.lambdas]
    L = 1
    for v in lam:
        L = L * v // np.gcd(L, v)
    s = dom.h * L
    base = [np.asarray(g) for g in np.meshgrid(*[np.arange(dom.shape[a]) + dom.offset(a) for a in range(dom.n)],
                                                indexing="ij")]
    lap = np.zeros(dom.shape)
    valid = np.ones(dom.shape, dtype=bool)
    for i in range(dom.n):
        d = [int(B[i, k]) * L // lam[k] for k in range(dom.n)]
        up, vu = u.at_global([g + dk for g, dk in zip(base, d)])
        dn, vd = u.at_global([g - dk for g, dk in zip(base, d)])
        lap = lap + (up + dn - 2.0 * u.values) / (s * s)
        valid &= vu & vd
    x = dom.coords() @ B.T.astype(float)
    r = -lap + eval_Fu(spec_x, x, u.values)
    return float(np.max(np.abs(r[valid]), initial=0.0))
