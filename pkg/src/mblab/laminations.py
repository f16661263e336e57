"""Translate orbits, recurrent hulls and the gap (lamination) diagnostic.

Values of an orbit are read at the origin and reduced modulo 1: vertical
integer shifts act as rotations of a circle of circumference 1, so gaps are
the arcs between consecutive orbit values, including the arc that wraps
through 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import RationalInput, ShiftTooLarge
from .grid import Field, linear_field, translate, translate_valid
from .lattice_geometry import make_direction_system
from .potential import PotentialSpec
from .quadratic import QuadraticNumber, convergents, dot
from .solvers import SolveResult, SolverConfig, minimize_periodic, periodic_domain

CLASSES = ("foliation_like", "lamination_like", "undetermined")


@dataclass
class OrbitSample:
    base: Field
    shifts: list  # (source index, kbar, value at origin)
    sorted_values: list
    shift_bound: int
    sources: list = field(default_factory=list)

    def field_for(self, entry) -> Field:
        src, kbar, _ = entry
        return translate(self.sources[src], kbar)


@dataclass
class Gap:
    lower: float
    upper: float
    width: float
    pair: tuple  # (Field below, Field above) with these origin values (mod 1)


@dataclass
class GapReport:
    gaps: list
    max_width: float
    classification: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "max_width": self.max_width,
            "gaps": [{"lower": g.lower, "upper": g.upper, "width": g.width} for g in self.gaps],
            "details": self.details,
        }


def _origin_value(u: Field, k: Sequence[int]) -> float:
    """T_k u(0) = u(-k) + k_{n+1}, read directly from the nodes."""
    dom = u.domain
    g = [np.array(-int(k[a]) * dom.m) for a in range(dom.n)]
    vals, valid = u.at_global(g)
    if not bool(valid):
        raise ShiftTooLarge(f"shift {tuple(k)} leaves the truncated domain")
    return float(vals) + int(k[-1])


def build_orbit(u: Union[Field, Sequence[Field]], shift_bound: int) -> OrbitSample:
    """Origin values of all T_k u with |k|_inf <= shift_bound (several fields may be pooled)."""
    fields = [u] if isinstance(u, Field) else list(u)
    dom = fields[0].domain
    for a in range(dom.n2):
        if shift_bound > dom.R:
            raise ShiftTooLarge(f"shift bound {shift_bound} exceeds R = {dom.R} on axis {a}")
    entries = []
    rng = range(-shift_bound, shift_bound + 1)
    for src, f in enumerate(fields):
        for k in itertools.product(rng, repeat=dom.n + 1):
            entries.append((src, k, _origin_value(f, k)))
    values = sorted({v for _, _, v in entries})
    dedup = []
    for v in values:
        if not dedup or v - dedup[-1] > 1e-12:
            dedup.append(v)
    return OrbitSample(fields[0], entries, dedup, shift_bound, fields)


def recurrent_hull(u: Field, sign: str, shift_bound: int, alpha: Sequence) -> Field:
    """Nodewise sup of translates lying below (``sup_below``) or inf of those above.

    Translates are selected by the exact sign of k . (-alpha, 1); only nodes
    where the translate is determined by u contribute.
    """
    if sign not in ("sup_below", "inf_above"):
        raise ValueError("sign must be 'sup_below' or 'inf_above'")
    system = make_direction_system(alpha)
    dom = u.domain
    want = -1 if sign == "sup_below" else 1
    for a in range(dom.n2):
        if shift_bound >= 2 * dom.R:
            raise ShiftTooLarge(f"shift bound {shift_bound} >= 2R = {2 * dom.R}")
    out = np.full(dom.shape, -np.inf if want < 0 else np.inf)
    rng = range(-shift_bound, shift_bound + 1)
    for k in itertools.product(rng, repeat=dom.n + 1):
        if dot(k, system.dir1).sign() != want:
            continue
        t = translate(u, k).values
        valid = translate_valid(dom, k)
        if want < 0:
            out = np.where(valid, np.maximum(out, t), out)
        else:
            out = np.where(valid, np.minimum(out, t), out)
    return u.copy(out)


def _circle_gaps(orbit: OrbitSample, floor: float) -> list:
    """(lower, upper, lower entry, upper entry) for spacings above ``floor`` on the circle."""
    reps = {}
    for e in orbit.shifts:
        r = e[2] - math.floor(e[2])
        if r >= 1.0 - 1e-12:
            r = 0.0
        key = round(r, 12)
        if key not in reps or (e[0], tuple(map(abs, e[1]))) < (reps[key][0], tuple(map(abs, reps[key][1]))):
            reps[key] = e
    keys = sorted(reps)
    vals = []
    for key in keys:
        if not vals or key - vals[-1] > 1e-12:
            vals.append(key)
    out = []
    for i, a in enumerate(vals):
        b = vals[i + 1] if i + 1 < len(vals) else vals[0] + 1.0
        if b - a > floor:
            out.append((a, b, reps[a], reps[vals[(i + 1) % len(vals)]]))
    return out


def _pair_fields(orbit: OrbitSample, lo, hi, ea, eb) -> tuple:
    fa = orbit.field_for(ea)
    fb = orbit.field_for(eb)
    ka = math.floor(ea[2] - lo + 0.5)
    kb = math.floor(eb[2] - hi + 0.5)
    return fa.copy(fa.values - ka), fb.copy(fb.values - kb)


def detect_gaps(
    orbit: OrbitSample,
    tol: float,
    step: int = 2,
    resolution: float = 1e-9,
    refined: Optional[OrbitSample] = None,
) -> GapReport:
    """Gaps of the orbit on the circle R/Z and the foliation/lamination proxy.

    A gap persists when the orbit enumerated with ``shift_bound + step``
    still shows a gap of width at least ``tol``.
    """
    floor = max(tol, resolution)
    raw = _circle_gaps(orbit, floor)
    gaps = [Gap(a, b, b - a, _pair_fields(orbit, a, b, ea, eb)) for a, b, ea, eb in raw]
    max_width = max((g.width for g in gaps), default=0.0)
    details = {"tol": tol, "step": step, "orbit_points": len(orbit.sorted_values)}
    if max_width < tol:
        return GapReport(gaps, max_width, "foliation_like", details)
    if refined is None:
        try:
            refined = build_orbit(orbit.sources, orbit.shift_bound + step)
        except ShiftTooLarge:
            details["refined"] = "unavailable"
            return GapReport(gaps, max_width, "undetermined", details)
    refined_gaps = _circle_gaps(refined, floor)
    refined_width = max((b - a for a, b, _, _ in refined_gaps), default=0.0)
    details["refined_max_width"] = refined_width
    cls = "lamination_like" if refined_width >= tol else "undetermined"
    return GapReport(gaps, max_width, cls, details)


# ---------------------------------------------------------------------------
# approximation by periodic minimizers
# ---------------------------------------------------------------------------

def _irrational_check(alpha):
    alpha = tuple(QuadraticNumber.coerce(a) for a in alpha)
    if all(a.is_rational for a in alpha):
        raise RationalInput("approximate_recurrent needs an irrational rotation vector")
    return alpha


def rational_approximants(alpha: Sequence, depth: int) -> list:
    """Per-depth rational vectors: convergents of irrational entries, rational entries kept."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    alpha = _irrational_check(alpha)
    per_entry = []
    for a in alpha:
        if a.is_rational:
            per_entry.append([a.to_fraction()] * depth)
        else:
            per_entry.append(convergents(a, depth))
    return [tuple(col[d] for col in per_entry) for d in range(depth)]


def _window_distance(a: Field, b: Field, window: float) -> float:
    """C0 distance on the nodes of [0, window]^n (both fields read via jumps)."""
    m = a.domain.m
    g1 = np.arange(int(round(window * m)) + 1)
    grids = np.meshgrid(*([g1] * a.domain.n), indexing="ij")
    va, _ = a.at_global(grids)
    vb, _ = b.at_global(grids)
    return float(np.max(np.abs(va - vb)))


def _origin(u: Field) -> float:
    return float(u.at_global([np.array(0)] * u.domain.n)[0])


def _normalize(u: Field) -> Field:
    return u.copy(u.values - math.floor(_origin(u)))


def approximate_recurrent(
    alpha: Sequence,
    depth: int,
    cfg: SolverConfig,
    spec: PotentialSpec,
    m: int = 32,
    n_phases: int = 8,
    window: float = 1.0,
    energy_tol: float = 1e-9,
) -> list:
    """Periodic minimizers for every convergent up to ``depth``.

    Each torus is started from n_phases shifted linear profiles; only global
    minimizers (energy within ``energy_tol``) are kept.  The representative of
    each level is the kept minimizer closest to the previous level on the
    window (at the first level, the one with the smallest value at the origin).  The returned results
    carry, in ``diagnostics``, the convergent, all kept minimizers and the C0
    distance to the previous level on the window.
    """
    approximants = rational_approximants(alpha, depth)
    out = []
    prev = None
    for d, rat in enumerate(approximants, start=1):
        periods = tuple(r.denominator for r in rat)
        dom = periodic_domain(rat, periods, m)
        runs = []
        for j in range(n_phases):
            init = linear_field(dom, [float(r) for r in rat], c=j / n_phases)
            runs.append(minimize_periodic(spec, rat, dom, cfg, init=init))
        best = min(r.energy.total for r in runs)
        cutoff = best + energy_tol * max(1.0, abs(best))
        kept, kept_runs = [], []
        for r in runs:
            if r.energy.total <= cutoff:
                f = _normalize(r.field)
                if not any(np.max(np.abs(f.values - k.values)) <= 1e-9 for k in kept):
                    kept.append(f)
                    kept_runs.append(r)
        if prev is None:
            pick = min(range(len(kept)), key=lambda i: _origin(kept[i]))
        else:
            pick = min(range(len(kept)), key=lambda i: _window_distance(kept[i], prev, window))
        lead = kept_runs[pick]
        res = SolveResult(kept[pick], lead.energy, lead.residual, lead.iterations,
                          all(r.converged for r in runs), lead.history)
        res.diagnostics = {
            "depth": d,
            "convergent": [str(r) for r in rat],
            "minimizers": kept,
            "energies": [r.energy.total for r in runs],
            "distance_to_previous": None if prev is None else _window_distance(res.field, prev, window),
        }
        prev = res.field
        out.append(res)
    return out


@dataclass
class LaminationSummary:
    reports: dict  # depth -> GapReport
    classification: str
    width_ratio: float
    results: list

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "width_ratio": self.width_ratio,
            "depths": {str(d): r.to_dict() for d, r in self.reports.items()},
            "convergents": [r.diagnostics["convergent"] for r in self.results],
            "distances": [r.diagnostics["distance_to_previous"] for r in self.results],
        }


def lamination_pipeline(
    alpha: Sequence,
    spec: PotentialSpec,
    depths: Sequence[int] = (3, 4),
    m: int = 32,
    cfg: SolverConfig = SolverConfig(),
    tol: Optional[float] = None,
    n_phases: int = 8,
    shift_bound: int = 2,
    step: int = 2,
    stability: float = 0.2,
) -> LaminationSummary:
    """Gap reports at two or more convergent depths and a combined verdict.

    lamination_like needs every depth to report a persistent gap and the
    largest gap width to vary by at most ``stability`` (relative) between
    consecutive depths; foliation_like needs the deepest level to be gap-free.
    """
    if tol is None:
        tol = 10.0 / m
    results = approximate_recurrent(alpha, max(depths), cfg, spec, m=m, n_phases=n_phases)
    reports = {}
    for d in depths:
        kept = results[d - 1].diagnostics["minimizers"]
        orbit = build_orbit(kept, shift_bound)
        reports[d] = detect_gaps(orbit, tol, step=step)
    widths = [reports[d].max_width for d in depths]
    ratio = 0.0
    for a, b in zip(widths, widths[1:]):
        if max(a, b) > 0:
            ratio = max(ratio, abs(a - b) / max(a, b))
    classes = [reports[d].classification for d in depths]
    if all(c == "lamination_like" for c in classes) and ratio <= stability:
        verdict = "lamination_like"
    elif classes[-1] == "foliation_like":
        verdict = "foliation_like"
    else:
        verdict = "undetermined"
    return LaminationSummary(reports, verdict, ratio, results)
