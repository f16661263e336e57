"""Periodic trigonometric potentials F(x, u).

Each term is ``coeff * g_x(2 pi kx . x) * g_u(2 pi ku u)`` with integer
frequencies and ``g`` one of cos, sin or 1 - cos, so F is 1-periodic in every
x_i and in u by construction.  Products of factors in separate x-coordinates
are written as sums of such terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
KINDS = ("cos", "sin", "one_minus_cos")


@dataclass(frozen=True)
class Term:
    coeff: float
    xfreq: tuple
    ufreq: int
    xkind: str = "cos"
    ukind: str = "one_minus_cos"

    def __post_init__(self):
        if self.xkind not in KINDS or self.ukind not in KINDS:
            raise ValueError(f"factor kind must be one of {KINDS}")
        object.__setattr__(self, "xfreq", tuple(int(k) for k in self.xfreq))
        object.__setattr__(self, "ufreq", int(self.ufreq))


@dataclass(frozen=True)
class PotentialSpec:
    n: int
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.xfreq) != self.n:
                raise ValueError("x-frequency length does not match dimension")

    @property
    def is_zero(self) -> bool:
        return all(t.coeff == 0 for t in self.terms)

    @property
    def x_independent(self) -> bool:
        return all(not any(t.xfreq) for t in self.terms)


def pendulum(eps: float, n: int = 1) -> PotentialSpec:
    """F = eps (1 - cos 2 pi u)."""
    return PotentialSpec(n, (Term(eps, (0,) * n, 1, "cos", "one_minus_cos"),))


def pendulum_x_factor(eps: float, n: int = 1, axis: int = 0) -> PotentialSpec:
    """F = eps/2 (1 + cos 2 pi x_axis)(1 - cos 2 pi u)."""
    k = [0] * n
    k[axis] = 1
    return PotentialSpec(n, (
        Term(eps / 2, (0,) * n, 1, "cos", "one_minus_cos"),
        Term(eps / 2, tuple(k), 1, "cos", "one_minus_cos"),
    ))


def zero(n: int) -> PotentialSpec:
    return PotentialSpec(n, ())


def _g(kind, theta):
    if kind == "cos":
        return np.cos(theta)
    if kind == "sin":
        return np.sin(theta)
    return 1.0 - np.cos(theta)


def _dg(kind, theta, order):
    """order-th derivative of g with respect to theta (order >= 1)."""
    # derivatives cycle through cos, -sin, -cos, sin (sin sits at position 3)
    start = 3 if kind == "sin" else 0
    sign = -1.0 if kind == "one_minus_cos" else 1.0
    r = (start + order) % 4
    base = np.cos(theta) if r % 2 == 0 else np.sin(theta)
    return sign * (base if r in (0, 3) else -base)


def _x_phase(term: Term, x):
    x = np.asarray(x, dtype=float)
    k = np.asarray(term.xfreq, dtype=float)
    return TWO_PI * np.tensordot(x, k, axes=([-1], [0])) if x.ndim else TWO_PI * x * k[0]


def _eval(spec: PotentialSpec, x, u, order: int):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.ndim and x.shape[-1] != spec.n:
        raise ValueError(f"points have {x.shape[-1]} coordinates, potential expects {spec.n}")
    out = np.zeros(np.broadcast_shapes(x.shape[:-1] if x.ndim else (), u.shape))
    for t in spec.terms:
        gx = _g(t.xkind, _x_phase(t, x))
        th = TWO_PI * t.ufreq * u
        if order == 0:
            gu = _g(t.ukind, th)
        else:
            gu = (TWO_PI * t.ufreq) ** order * _dg(t.ukind, th, order)
        out = out + t.coeff * gx * gu
    return out


def eval_F(spec: PotentialSpec, x, u):
    """F at points ``x`` (shape (..., n)) and values ``u`` (shape (...))."""
    return _eval(spec, x, u, 0)


def eval_Fu(spec: PotentialSpec, x, u):
    return _eval(spec, x, u, 1)


def eval_Fuu(spec: PotentialSpec, x, u):
    return _eval(spec, x, u, 2)


def eval_Fuuu(spec: PotentialSpec, x, u):
    return _eval(spec, x, u, 3)


def _x_factor_bound(t: Term) -> float:
    if not any(t.xfreq):
        return abs(float(_g(t.xkind, 0.0)))
    return 2.0 if t.xkind == "one_minus_cos" else 1.0


def _deriv_bound(spec: PotentialSpec, order: int) -> float:
    total = 0.0
    for t in spec.terms:
        if order == 0:
            gu = 2.0 if t.ukind == "one_minus_cos" else 1.0
        else:
            gu = (TWO_PI * abs(t.ufreq)) ** order
        total += abs(t.coeff) * _x_factor_bound(t) * gu
    return total


def sup_norm_Fu(spec: PotentialSpec) -> float:
    """Upper bound on sup |F_u| from the coefficients (triangle inequality)."""
    return _deriv_bound(spec, 1)


def sup_norm_Fuu(spec: PotentialSpec) -> float:
    return _deriv_bound(spec, 2)


def sup_norm_Fuuu(spec: PotentialSpec) -> float:
    return _deriv_bound(spec, 3)


def transform_potential(spec: PotentialSpec, red) -> PotentialSpec:
    """Potential in reduced coordinates: Fbar(y, u) = F(y B^T, u).

    kx . x = kx . (y B^T) = (kx B) . y, and kx B stays integral.
    """
    B = np.array(red.B, dtype=np.int64)
    terms = []
    for t in spec.terms:
        k = tuple(int(v) for v in np.asarray(t.xfreq, dtype=np.int64) @ B)
        terms.append(Term(t.coeff, k, t.ufreq, t.xkind, t.ukind))
    return PotentialSpec(spec.n, tuple(terms))


def from_records(n: int, records: Sequence[dict]) -> PotentialSpec:
    """Build a spec from config records with keys coeff, xfreq, ufreq, xkind, ukind."""
    terms = []
    for r in records:
        terms.append(Term(
            float(r["coeff"]),
            tuple(r.get("xfreq", (0,) * n)),
            int(r.get("ufreq", 1)),
            r.get("xkind", "cos"),
            r.get("ukind", "one_minus_cos"),
        ))
    return PotentialSpec(n, tuple(terms))


def to_records(spec: PotentialSpec) -> list:
    return [
        {"coeff": t.coeff, "xfreq": list(t.xfreq), "ufreq": t.ufreq, "xkind": t.xkind, "ukind": t.ukind}
        for t in spec.terms
    ]
