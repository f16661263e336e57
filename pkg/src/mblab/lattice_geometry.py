"""Invariant directions, integer lattices and the orthogonal coordinate change.

Directions are kept unnormalized: ``dir1 = (-alpha, 1)``.  Every predicate we
need (``k . a > 0``, ``k . a == 0``) is invariant under positive scaling, so
the unit vectors of the theory are never formed and all tests stay exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
import sympy

from .errors import ReductionUnavailable, SecondInvariantUnavailable
from .quadratic import QuadraticNumber, dot, field_of


# ---------------------------------------------------------------------------
# integer linear algebra
# ---------------------------------------------------------------------------

def _lcm(values):
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def hermite_normal_form(rows: Sequence[Sequence[int]]) -> list[list[int]]:
    """Row-style Hermite normal form of an integer matrix, zero rows dropped.

    Pivots are positive, entries above a pivot are reduced into [0, pivot).
    """
    A = [list(map(int, r)) for r in rows]
    if not A:
        return []
    ncols = len(A[0])
    r = 0
    for c in range(ncols):
        # Euclid on column c among rows r..end
        while True:
            nz = [i for i in range(r, len(A)) if A[i][c] != 0]
            if not nz:
                break
            piv = min(nz, key=lambda i: abs(A[i][c]))
            A[r], A[piv] = A[piv], A[r]
            done = True
            for i in range(r + 1, len(A)):
                if A[i][c]:
                    q = A[i][c] // A[r][c]
                    A[i] = [x - q * y for x, y in zip(A[i], A[r])]
                    if A[i][c]:
                        done = False
            if done:
                break
        if r < len(A) and A[r][c] != 0:
            if A[r][c] < 0:
                A[r] = [-x for x in A[r]]
            for i in range(r):
                q = A[i][c] // A[r][c]
                if q:
                    A[i] = [x - q * y for x, y in zip(A[i], A[r])]
            r += 1
            if r == len(A):
                break
    return [row for row in A[:r] if any(row)]


def integer_kernel(matrix: Sequence[Sequence[int]], ncols: int) -> list[list[int]]:
    """Basis of {k in Z^ncols : M k = 0}, returned in Hermite normal form.

    Unimodular column operations bring M to column echelon form M U = [H | 0];
    the columns of U paired with the zero columns span the integer kernel.
    """
    M = [list(map(int, r)) for r in matrix if any(r)]
    U = [[int(i == j) for j in range(ncols)] for i in range(ncols)]  # U[col] = column vector
    cols = [[M[i][j] for i in range(len(M))] for j in range(ncols)]
    start = 0
    for i in range(len(M)):
        while True:
            nz = [j for j in range(start, ncols) if cols[j][i] != 0]
            if not nz:
                break
            piv = min(nz, key=lambda j: abs(cols[j][i]))
            cols[start], cols[piv] = cols[piv], cols[start]
            U[start], U[piv] = U[piv], U[start]
            done = True
            for j in range(start + 1, ncols):
                if cols[j][i]:
                    q = cols[j][i] // cols[start][i]
                    cols[j] = [x - q * y for x, y in zip(cols[j], cols[start])]
                    U[j] = [x - q * y for x, y in zip(U[j], U[start])]
                    if cols[j][i]:
                        done = False
            if done:
                break
        if start < ncols and cols[start][i] != 0:
            start += 1
    kernel = [U[j] for j in range(start, ncols)]
    return hermite_normal_form(kernel)


def rank_of(rows: Sequence[Sequence[int]]) -> int:
    return len(hermite_normal_form(rows)) if rows else 0


def in_rational_span(vec: Sequence[int], basis: Sequence[Sequence[int]]) -> bool:
    if not basis:
        return not any(vec)
    return rank_of(list(basis) + [list(vec)]) == rank_of(basis)


def _rational_forms(direction: Sequence[QuadraticNumber]) -> list[list[int]]:
    """Split k . dir = 0 into integer forms for the rational and surd parts."""
    forms = []
    for part in ("a", "b"):
        coeffs = [getattr(x, part) for x in direction]
        if not any(coeffs):
            continue
        den = _lcm([c.denominator for c in coeffs])
        forms.append([int(c * den) for c in coeffs])
    return forms


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegerLattice:
    basis: tuple  # tuple of integer tuples (each a vector in Z^{n+1})
    dim: int

    @property
    def rank(self) -> int:
        return len(self.basis)

    def contains(self, k: Sequence[int]) -> bool:
        return in_rational_span(k, self.basis) and self._integral(k)

    def _integral(self, k):
        # basis is in HNF: solve greedily pivot by pivot
        rest = list(map(int, k))
        for row in self.basis:
            c = next(i for i, x in enumerate(row) if x)
            if rest[c] % row[c]:
                return False
            q = rest[c] // row[c]
            rest = [x - q * y for x, y in zip(rest, row)]
        return not any(rest)

    def as_matrix(self) -> list[list[int]]:
        return [list(b) for b in self.basis]


@dataclass(frozen=True)
class DirectionSystem:
    alpha: tuple  # QuadraticNumber entries
    t: int
    dir1: tuple
    dir2: Optional[tuple]
    lattices: tuple  # IntegerLattice for Lambda-bar_1, ..., Lambda-bar_{t+1}

    @property
    def n(self) -> int:
        return len(self.alpha)

    @property
    def n2(self) -> int:
        """Number of directions orthogonal to V_2 (= n - rank Lambda-bar_2)."""
        return self.n - self.lattices[1].rank

    def predicted_order(self, k: Sequence[int]) -> int:
        """Exact sign that T_k u - u must have for u in M(a^1, ..., a^t).

        +1: translate above, 0: equal, -1: below.
        """
        # k . a^1 = 0 already places k in Lambda-bar_2, and so on down the chain
        dirs = [self.dir1] + ([self.dir2] if self.dir2 is not None else [])
        for d in dirs:
            sgn = dot(k, d).sign()
            if sgn != 0:
                return sgn
        return 0


def integer_orthogonal_lattice(directions: Sequence[Sequence], dim: Optional[int] = None) -> IntegerLattice:
    """Z^{n+1} intersected with the orthogonal complement of ``directions``."""
    dirs = [[QuadraticNumber.coerce(x) for x in d] for d in directions]
    if dim is None:
        if not dirs:
            raise ValueError("dimension required when no directions are given")
        dim = len(dirs[0])
    forms = []
    for d in dirs:
        forms.extend(_rational_forms(d))
    if not forms:
        basis = [[int(i == j) for j in range(dim)] for i in range(dim)]
    else:
        basis = integer_kernel(forms, dim)
    return IntegerLattice(tuple(tuple(b) for b in basis), dim)


def make_direction_system(alpha: Sequence, with_second: bool = False) -> DirectionSystem:
    alpha = tuple(QuadraticNumber.coerce(a) for a in alpha)
    field_of(alpha)
    n = len(alpha)
    dir1 = tuple(-a for a in alpha) + (QuadraticNumber(1),)
    lam1 = integer_orthogonal_lattice([], dim=n + 1)
    lam2 = integer_orthogonal_lattice([dir1])
    if not with_second:
        return DirectionSystem(alpha, 1, dir1, None, (lam1, lam2))
    if lam2.rank == 0:
        raise SecondInvariantUnavailable("rank of the second lattice is 0")
    n2 = n - lam2.rank
    if n2 >= n:
        raise SecondInvariantUnavailable("no periodic direction available")
    e = [0] * (n + 1)
    e[n2] = 1
    if not in_rational_span(e, lam2.basis):
        raise SecondInvariantUnavailable(
            f"e^{n2 + 1} is not in span of the second lattice; reduce coordinates first"
        )
    dir2 = tuple(-x for x in e)
    lam3 = integer_orthogonal_lattice([dir1, [QuadraticNumber(x) for x in dir2]])
    return DirectionSystem(alpha, 2, dir1, tuple(QuadraticNumber(x) for x in dir2), (lam1, lam2, lam3))


def is_admissible(system: DirectionSystem) -> bool:
    if system.dir1[-1].sign() <= 0:
        return False
    if system.t == 2:
        d2 = [x.to_fraction() if isinstance(x, QuadraticNumber) else Fraction(x) for x in system.dir2]
        if any(v.denominator != 1 for v in d2):
            return False
        if not in_rational_span([int(v) for v in d2], system.lattices[1].basis):
            return False
    return True


# ---------------------------------------------------------------------------
# coordinate reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoordinateReduction:
    B: tuple  # n x n integer matrix, rows
    lambdas: tuple
    new_rotation: tuple
    n2: int

    def matrix(self) -> np.ndarray:
        return np.array(self.B, dtype=float)

    @property
    def coefficients(self) -> tuple:
        """(c_1, ..., c_n) = alpha B diag(1/lambda)."""
        return tuple(r / lam for r, lam in zip(self.new_rotation, self.lambdas))


def _primitive(v):
    g = 0
    for x in v:
        g = math.gcd(g, abs(x))
    if g == 0:
        return None
    v = [x // g for x in v]
    first = next(x for x in v if x)
    return tuple(-x for x in v) if first < 0 else tuple(v)


def _orthogonal_basis(span_rows: Sequence[Sequence[int]], target_dim: int, n: int, bound: int) -> list:
    """Greedy orthogonal integer basis of span(span_rows) from short vectors."""
    if target_dim == 0:
        return []
    cands = set()
    for v in itertools.product(range(-bound, bound + 1), repeat=n):
        p = _primitive(v)
        if p is not None and in_rational_span(p, span_rows):
            cands.add(p)
    chosen = []
    for v in sorted(cands, key=lambda w: (sum(x * x for x in w), tuple(-x for x in w))):
        if all(sum(a * b for a, b in zip(v, c)) == 0 for c in chosen):
            chosen.append(v)
            if len(chosen) == target_dim:
                return chosen
    raise ReductionUnavailable(
        f"no orthogonal integer basis of dimension {target_dim} within bound {bound}"
    )


def reduce_coordinates(alpha: Sequence, bound: int = 10) -> CoordinateReduction:
    """Orthogonal integer change of coordinates aligning V_2 with trailing axes."""
    alpha = tuple(QuadraticNumber.coerce(a) for a in alpha)
    n = len(alpha)
    system = make_direction_system(alpha)
    lam2 = system.lattices[1]
    r = lam2.rank
    if not 1 <= r <= n - 1:
        raise ReductionUnavailable(f"reduction needs 1 <= rank <= n-1, got rank {r}")
    v2 = [list(b[:n]) for b in lam2.basis]
    # V_2^perp as the kernel of the V_2 rows
    perp = integer_kernel(v2, n)
    n2 = n - r
    omega_perp = _orthogonal_basis(perp, n2, n, bound)
    omega_par = _orthogonal_basis(v2, r, n, bound)
    cols = omega_perp + omega_par
    B = tuple(tuple(cols[j][i] for j in range(n)) for i in range(n))
    lambdas = tuple(sum(x * x for x in c) for c in cols)
    new_rot = tuple(dot([B[i][j] for i in range(n)], alpha) for j in range(n))
    red = CoordinateReduction(B, lambdas, new_rot, n2)
    c = red.coefficients
    if any(x.is_rational for x in c[:n2]) or any(not x.is_rational for x in c[n2:]):
        raise ReductionUnavailable("reduced coefficients do not split into irrational/rational parts")
    surd_rows = [[x.a, x.b] for x in c[:n2]]
    if n2 > 1 and sympy.Matrix(surd_rows).rank() < n2:
        raise ReductionUnavailable("irrational coefficients are rationally dependent")
    return red
