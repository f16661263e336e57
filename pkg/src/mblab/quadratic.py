"""Exact arithmetic in a real quadratic field Q(sqrt d).

Rotation vectors live in a single field per run, which makes questions such
as "is this entry irrational" or "is k . (-alpha, 1) zero" decidable.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Sequence

import sympy

from .errors import FieldMismatch, RationalInput


def _squarefree_part(d: int) -> tuple[int, int]:
    """Return (c, s) with d = c**2 * s and s square-free."""
    if d < 0:
        raise ValueError("radicand must be non-negative")
    if d in (0, 1):
        return (1, 0) if d == 1 else (0, 0)
    c = 1
    s = 1
    for p, e in sympy.factorint(d).items():
        c *= p ** (e // 2)
        if e % 2:
            s *= p
    return c, s


@total_ordering
class QuadraticNumber:
    """a + b*sqrt(d) with a, b rational and d square-free (d = 0 means Q)."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a=0, b=0, d: int = 0):
        a = Fraction(a)
        b = Fraction(b)
        d = int(d)
        if d != 0:
            c, s = _squarefree_part(d)
            if s == 1 or s == 0:
                # sqrt(d) is an integer
                a, b, d = a + b * c, Fraction(0), 0
            else:
                b, d = b * c, s
        if b == 0:
            d = 0
        self.a = a
        self.b = b
        self.d = d

    # -- construction helpers ------------------------------------------------
    @classmethod
    def sqrt(cls, d: int) -> "QuadraticNumber":
        return cls(0, 1, d)

    @classmethod
    def coerce(cls, x) -> "QuadraticNumber":
        if isinstance(x, QuadraticNumber):
            return x
        if isinstance(x, (int, Fraction)):
            return cls(x)
        raise TypeError(f"cannot coerce {type(x).__name__} to QuadraticNumber")

    @classmethod
    def parse(cls, text: str) -> "QuadraticNumber":
        """Parse expressions such as ``1/2 + 3/4*sqrt(5)`` or ``(1+sqrt(5))/2``."""
        try:
            expr = sympy.sympify(text.strip(), rational=True)
        except (sympy.SympifyError, TypeError, SyntaxError) as exc:
            raise ValueError(f"cannot parse quadratic number {text!r}") from exc
        expr = sympy.expand(expr)
        radicands = {int(p.base) for p in expr.atoms(sympy.Pow)
                     if p.exp == sympy.Rational(1, 2) and p.base.is_Integer}
        if len(radicands) > 1:
            raise FieldMismatch(f"{text!r} mixes square roots of {sorted(radicands)}")
        a = Fraction(0)
        b = Fraction(0)
        d = 0
        for term, coeff in expr.as_coefficients_dict().items():
            if not coeff.is_Rational:
                raise ValueError(f"non-rational coefficient in {text!r}")
            coeff = Fraction(int(coeff.p), int(coeff.q))
            if term == 1:
                a += coeff
                continue
            if isinstance(term, sympy.Pow) and term.exp == sympy.Rational(1, 2) and term.base.is_Integer:
                r = int(term.base)
                if d not in (0, r):
                    raise FieldMismatch(f"{text!r} mixes sqrt({d}) and sqrt({r})")
                d = r
                b += coeff
                continue
            raise ValueError(f"unsupported term {term} in {text!r}")
        return cls(a, b, d)

    # -- field bookkeeping ---------------------------------------------------
    def _common(self, other) -> tuple["QuadraticNumber", int]:
        other = QuadraticNumber.coerce(other)
        if self.d and other.d and self.d != other.d:
            raise FieldMismatch(f"Q(sqrt {self.d}) vs Q(sqrt {other.d})")
        return other, self.d or other.d

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def conjugate(self) -> "QuadraticNumber":
        return QuadraticNumber(self.a, -self.b, self.d)

    def norm(self) -> Fraction:
        return self.a * self.a - self.b * self.b * self.d

    def sign(self) -> int:
        """Exact sign of a + b*sqrt(d)."""
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare a^2 with b^2 d
        diff = self.a * self.a - self.b * self.b * self.d
        return sa if diff > 0 else sb

    def floor(self) -> int:
        guess = math.floor(float(self))
        # float is only a hint; fix up with exact comparisons
        while self < guess:
            guess -= 1
        while self >= guess + 1:
            guess += 1
        return guess

    def to_fraction(self) -> Fraction:
        if not self.is_rational:
            raise RationalInput(f"{self} is irrational")
        return self.a

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other, d = self._common(other)
        return QuadraticNumber(self.a + other.a, self.b + other.b, d)

    __radd__ = __add__

    def __neg__(self):
        return QuadraticNumber(-self.a, -self.b, self.d)

    def __sub__(self, other):
        return self + (-QuadraticNumber.coerce(other))

    def __rsub__(self, other):
        return QuadraticNumber.coerce(other) - self

    def __mul__(self, other):
        other, d = self._common(other)
        return QuadraticNumber(
            self.a * other.a + self.b * other.b * d,
            self.a * other.b + self.b * other.a,
            d,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other, _ = self._common(other)
        n = other.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt d)")
        num = self * other.conjugate()
        return QuadraticNumber(num.a / n, num.b / n, num.d)

    def __rtruediv__(self, other):
        return QuadraticNumber.coerce(other) / self

    # -- comparison ----------------------------------------------------------
    def __eq__(self, other):
        try:
            other = QuadraticNumber.coerce(other)
        except TypeError:
            return NotImplemented
        return self.a == other.a and self.b == other.b and (self.b == 0 or self.d == other.d)

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __hash__(self):
        return hash((self.a, self.b, self.d))

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(self.d)

    def __bool__(self):
        return self.sign() != 0

    def __repr__(self):
        return f"QuadraticNumber({self})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        return f"{self.a} + {self.b}*sqrt({self.d})"


def field_of(values: Iterable[QuadraticNumber]) -> int:
    """Common radicand of a collection (0 when all are rational)."""
    d = 0
    for x in values:
        if x.d:
            if d and x.d != d:
                raise FieldMismatch(f"entries in Q(sqrt {d}) and Q(sqrt {x.d})")
            d = x.d
    return d


def dot(k: Sequence[int], v: Sequence[QuadraticNumber]) -> QuadraticNumber:
    total = QuadraticNumber(0)
    for ki, vi in zip(k, v):
        if ki:
            total = total + vi * int(ki)
    return total


def continued_fraction(x: QuadraticNumber, depth: int) -> list[int]:
    """First ``depth`` partial quotients of x, computed exactly."""
    if x.is_rational:
        raise RationalInput("continued fraction expansion needs an irrational input")
    quotients = []
    y = x
    for _ in range(depth):
        a = y.floor()
        quotients.append(a)
        y = 1 / (y - a)
    return quotients


def convergents(x: QuadraticNumber, depth: int) -> list[Fraction]:
    """First ``depth`` continued-fraction convergents p/q of an irrational x."""
    x = QuadraticNumber.coerce(x)
    if x.is_rational:
        raise RationalInput(f"{x} is rational; convergents need an irrational entry")
    out = []
    p_prev, p = 0, 1
    q_prev, q = 1, 0
    for a in continued_fraction(x, depth):
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        out.append(Fraction(p, q))
    return out
