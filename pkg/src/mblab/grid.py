"""Structured grids on truncated cylinders and the fields living on them.

Axis layout: the first ``n2`` axes are truncated to [-R, R] (nodes at
``-R + j h``, both ends included and held fixed by the solvers); the remaining
``n - n2`` axes are periodic with period ``l`` and hold ``l m`` nodes at
``j h``.  A periodic axis may carry an integer ``jump``:
``u(x + l e_k) = u(x) + jump``, which is how fields with a rotation vector
are stored without subtracting the linear part.

Node ``j`` on a truncated axis has global index ``j - R m``; on a periodic
axis the global index is ``j``.  Global index ``g`` sits at ``x = g h``.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DomainMismatch, ShiftTooLarge, StripOutOfRange


@dataclass(frozen=True)
class DomainSpec:
    n: int
    n2: int
    R: int
    periods: tuple
    m: int
    lambdas: tuple = ()
    jumps: tuple = ()

    def __post_init__(self):
        periods = tuple(int(p) for p in self.periods)
        object.__setattr__(self, "periods", periods)
        if len(periods) != self.n - self.n2:
            raise ValueError(f"expected {self.n - self.n2} periods, got {len(periods)}")
        lambdas = tuple(float(x) for x in self.lambdas) or (1.0,) * self.n
        jumps = tuple(int(j) for j in self.jumps) or (0,) * len(periods)
        if len(lambdas) != self.n or len(jumps) != len(periods):
            raise ValueError("lambdas must have n entries and jumps one per period")
        if self.m < 1 or any(p < 1 for p in periods) or (self.n2 and self.R < 1):
            raise ValueError("m, periods and R must be positive integers")
        if any(lam <= 0 for lam in lambdas):
            raise ValueError("lambdas must be positive")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "jumps", jumps)

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def shape(self) -> tuple:
        return tuple([2 * self.R * self.m + 1] * self.n2 + [p * self.m for p in self.periods])

    @property
    def box_shape(self) -> tuple:
        return tuple([2 * self.R] * self.n2 + list(self.periods))

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    def is_periodic(self, axis: int) -> bool:
        return axis >= self.n2

    def offset(self, axis: int) -> int:
        """Global index of local node 0 on ``axis``."""
        return -self.R * self.m if axis < self.n2 else 0

    def axis_coords(self, axis: int) -> np.ndarray:
        N = self.shape[axis]
        return (np.arange(N) + self.offset(axis)) * self.h

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``self.shape + (n,)`` (cached, read-only)."""
        return _coords(self)

    def interior_mask(self) -> np.ndarray:
        """True on nodes not lying on the truncation boundary."""
        mask = np.ones(self.shape, dtype=bool)
        for a in range(self.n2):
            idx = [slice(None)] * self.n
            idx[a] = 0
            mask[tuple(idx)] = False
            idx[a] = -1
            mask[tuple(idx)] = False
        return mask

    def with_lambdas(self, lambdas) -> "DomainSpec":
        return replace(self, lambdas=tuple(lambdas))


@lru_cache(maxsize=32)
def _coords(domain: DomainSpec) -> np.ndarray:
    axes = [domain.axis_coords(a) for a in range(domain.n)]
    out = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    out.flags.writeable = False
    return out


@dataclass
class Field:
    domain: DomainSpec
    values: np.ndarray
    boundary_mode: tuple = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.shape:
            raise DomainMismatch(f"values shape {self.values.shape} != {self.domain.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        if not self.boundary_mode:
            self.boundary_mode = (("lower", "lower"),) * self.domain.n2

    def copy(self, values=None) -> "Field":
        vals = self.values.copy() if values is None else values
        return Field(self.domain, vals, self.boundary_mode)

    def __sub__(self, other):
        _same_domain(self, other)
        return self.values - other.values

    def at_global(self, gidx: Sequence[np.ndarray]) -> tuple:
        """Values at global node indices (broadcastable per-axis arrays).

        Returns ``(values, valid)``; truncated axes clip out-of-range indices
        and mark them invalid, periodic axes wrap and add the jump.
        """
        return _gather(self.values, self.domain, gidx)


def _same_domain(a: Field, b: Field):
    if a.domain != b.domain:
        raise DomainMismatch("fields live on different domains")


@dataclass
class ConstraintPair:
    lower: Field
    upper: Field

    def __post_init__(self):
        _same_domain(self.lower, self.upper)
        if np.any(self.lower.values > self.upper.values):
            raise ValueError("lower obstacle exceeds upper obstacle")

    @property
    def domain(self) -> DomainSpec:
        return self.lower.domain

    def is_adjacent_shape(self, tol: float = 0.0) -> bool:
        gap = self.upper.values - self.lower.values
        return bool(np.all(gap > 0) and np.all(gap <= 1 + tol))


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def constant_field(domain: DomainSpec, c: float = 0.0) -> Field:
    if any(domain.jumps):
        raise ValueError("constant fields need zero jumps")
    return Field(domain, np.full(domain.shape, float(c)))


def linear_field(domain: DomainSpec, alpha: Sequence[float], c: float = 0.0) -> Field:
    alpha = np.asarray([float(a) for a in alpha])
    for a, p, j in zip(alpha[domain.n2:], domain.periods, domain.jumps):
        if not math.isclose(a * p, j, abs_tol=1e-12):
            raise ValueError("linear field incompatible with the periodic jumps")
    vals = domain.coords() @ alpha + c if domain.n else np.zeros(())
    return Field(domain, vals)


# ---------------------------------------------------------------------------
# index machinery
# ---------------------------------------------------------------------------

def _gather(values: np.ndarray, domain: DomainSpec, gidx: Sequence[np.ndarray]):
    gidx = [np.asarray(g, dtype=np.int64) for g in gidx]
    local = []
    corr = 0.0
    valid = True
    for a, g in enumerate(gidx):
        N = domain.shape[a]
        j = g - domain.offset(a)
        if domain.is_periodic(a):
            wraps = np.floor_divide(j, N)
            local.append(j - wraps * N)
            jump = domain.jumps[a - domain.n2]
            if jump:
                corr = corr + wraps * jump
        else:
            ok = (j >= 0) & (j < N)
            valid = valid & ok
            local.append(np.clip(j, 0, N - 1))
    vals = values[tuple(np.broadcast_arrays(*local))] + corr
    valid = np.broadcast_to(valid, vals.shape)
    return vals, valid


def _global_grid(domain: DomainSpec) -> list:
    out = []
    for a in range(domain.n):
        g = np.arange(domain.shape[a]) + domain.offset(a)
        shape = [1] * domain.n
        shape[a] = -1
        out.append(g.reshape(shape))
    return out


def neighbor(values: np.ndarray, domain: DomainSpec, axis: int, step: int) -> np.ndarray:
    """u at node + step*e_axis; truncated axes repeat the edge value."""
    N = domain.shape[axis]
    if domain.is_periodic(axis):
        out = np.roll(values, -step, axis=axis)
        jump = domain.jumps[axis - domain.n2]
        if jump:
            idx = [slice(None)] * domain.n
            if step > 0:
                idx[axis] = slice(N - step, N)
                out[tuple(idx)] += jump
            else:
                idx[axis] = slice(0, -step)
                out[tuple(idx)] -= jump
        return out
    idx = np.clip(np.arange(N) + step, 0, N - 1)
    return np.take(values, idx, axis=axis)


def forward_differences(values: np.ndarray, domain: DomainSpec) -> list:
    """Per-axis forward differences; zero on the last node of truncated axes."""
    out = []
    for a in range(domain.n):
        d = neighbor(values, domain, a, 1) - values
        if not domain.is_periodic(a):
            idx = [slice(None)] * domain.n
            idx[a] = -1
            d[tuple(idx)] = 0.0
        out.append(d)
    return out


def box_sum(density: np.ndarray, domain: DomainSpec) -> np.ndarray:
    """Sum a nodal density over unit boxes (node x in [k, k+1) belongs to box k).

    Returns an array of shape ``domain.box_shape``.  The last node of each
    truncated axis belongs to no box.
    """
    m = domain.m
    idx = tuple(slice(0, -1) if a < domain.n2 else slice(None) for a in range(domain.n))
    d = density[idx]
    new_shape = []
    for b in domain.box_shape:
        new_shape.extend([b, m])
    d = d.reshape(new_shape)
    return d.sum(axis=tuple(range(1, 2 * domain.n, 2)))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def translate(u: Field, kbar: Sequence[int], fill: Optional[Field] = None) -> Field:
    """T_k u(x) = u(x - k) + k_{n+1}; exact relabelling of nodes.

    Nodes whose preimage leaves the truncated domain take ``fill`` values when
    given, otherwise the boundary value of u (plus k_{n+1}).
    """
    dom = u.domain
    kbar = [int(k) for k in kbar]
    if len(kbar) != dom.n + 1:
        raise ValueError("shift vector must have n + 1 entries")
    for a in range(dom.n2):
        if abs(kbar[a]) >= 2 * dom.R:
            raise ShiftTooLarge(f"|k_{a + 1}| = {abs(kbar[a])} >= 2R = {2 * dom.R}")
    g = _global_grid(dom)
    src = [g[a] - kbar[a] * dom.m for a in range(dom.n)]
    vals, valid = u.at_global(src)
    vals = vals + kbar[-1]
    if fill is not None:
        _same_domain(u, fill)
        vals = np.where(valid, vals, fill.values)
    return Field(dom, np.array(vals, dtype=float), u.boundary_mode)


def translate_valid(domain: DomainSpec, kbar: Sequence[int]) -> np.ndarray:
    """Mask of nodes where T_k u is determined by u on the truncated domain."""
    mask = np.ones(domain.shape, dtype=bool)
    for a in range(domain.n2):
        N = domain.shape[a]
        j = np.arange(N) - int(kbar[a]) * domain.m
        ok = (j >= 0) & (j < N)
        shape = [1] * domain.n
        shape[a] = -1
        mask &= ok.reshape(shape)
    return mask


def meet_join(a: Field, b: Field) -> tuple:
    _same_domain(a, b)
    return (a.copy(np.minimum(a.values, b.values)), a.copy(np.maximum(a.values, b.values)))


def clamp(u: Field, pair: ConstraintPair) -> Field:
    _same_domain(u, pair.lower)
    return u.copy(np.maximum(np.minimum(u.values, pair.upper.values), pair.lower.values))


def strip_axis(domain: DomainSpec) -> int:
    """Axis used as the heteroclinic direction: the last truncated axis."""
    if domain.n2 < 1:
        raise StripOutOfRange("domain has no truncated axis to cut into strips")
    return domain.n2 - 1


def strip_domain(domain: DomainSpec) -> DomainSpec:
    """Domain of a single strip read as a 1-periodic profile in the strip axis."""
    strip_axis(domain)
    periods = (1,) + tuple(domain.periods)
    jumps = (0,) + tuple(domain.jumps)
    return DomainSpec(domain.n, domain.n2 - 1, domain.R, periods, domain.m, domain.lambdas, jumps)


def strip_restrict(u: Field, i: int) -> Field:
    """Nodes of strip S_i = {x_s in [i, i+1)} as a field on ``strip_domain``."""
    dom = u.domain
    s = strip_axis(dom)
    if not -dom.R <= i <= dom.R - 1:
        raise StripOutOfRange(f"strip {i} outside [-{dom.R}, {dom.R - 1}]")
    start = (i + dom.R) * dom.m
    sl = [slice(None)] * dom.n
    sl[s] = slice(start, start + dom.m)
    # the strip axis is the last truncated one, i.e. the first periodic axis afterwards
    return Field(strip_domain(dom), np.ascontiguousarray(u.values[tuple(sl)]))


def resample(u: Field, target: DomainSpec, fill: Optional[Field] = None) -> Field:
    """Evaluate u at the nodes of ``target`` (same m, grid-aligned)."""
    if target.m != u.domain.m or target.n != u.domain.n:
        raise DomainMismatch("resample needs the same spacing and dimension")
    vals, valid = u.at_global(_global_grid(target))
    vals = np.array(vals, dtype=float)
    if not np.all(valid):
        if fill is None:
            raise DomainMismatch("target extends beyond the truncated source domain")
        vals = np.where(valid, vals, fill.values)
    return Field(target, vals)


def _refine_axis(vals: np.ndarray, axis: int, periodic: bool, jump: int, factor: int) -> np.ndarray:
    N = vals.shape[axis]
    Nf = N * factor if periodic else (N - 1) * factor + 1
    j = np.arange(Nf)
    lo = j // factor
    t = (j - lo * factor) / factor
    v0 = np.take(vals, lo, axis=axis)
    if periodic:
        hi = lo + 1
        v1 = np.take(vals, hi % N, axis=axis)
        shp = [1] * vals.ndim
        shp[axis] = -1
        v1 = v1 + (hi >= N).reshape(shp) * jump
    else:
        v1 = np.take(vals, np.minimum(lo + 1, N - 1), axis=axis)
    shp = [1] * vals.ndim
    shp[axis] = -1
    t = t.reshape(shp)
    return (1 - t) * v0 + t * v1


def coarsen(u: Field, factor: int = 2) -> Field:
    """Injection onto the grid with spacing h * factor (every factor-th node)."""
    dom = u.domain
    if dom.m % factor:
        raise ValueError(f"m = {dom.m} is not divisible by {factor}")
    sl = tuple(slice(None, None, factor) for _ in range(dom.n))
    return Field(replace(dom, m=dom.m // factor), u.values[sl].copy(), u.boundary_mode)


def refine(u: Field, factor: int) -> Field:
    """Multilinear interpolation onto a grid with spacing h / factor."""
    dom = u.domain
    vals = u.values
    for a in range(dom.n):
        periodic = dom.is_periodic(a)
        jump = dom.jumps[a - dom.n2] if periodic else 0
        vals = _refine_axis(vals, a, periodic, jump, factor)
    return Field(replace(dom, m=dom.m * factor), vals, u.boundary_mode)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def l1_norm(values: np.ndarray, domain: DomainSpec) -> float:
    return float(box_sum(np.abs(values), domain).sum() * domain.cell_volume)


def l2_norm(values: np.ndarray, domain: DomainSpec) -> float:
    return math.sqrt(float(box_sum(values * values, domain).sum() * domain.cell_volume))


def box_w12_sq(diff: np.ndarray, domain: DomainSpec) -> np.ndarray:
    """Per-box squared W^{1,2} norm of a difference field (values, not Field)."""
    dens = diff * diff
    for a, d in enumerate(forward_differences_plain(diff, domain)):
        dens = dens + (d / domain.h) ** 2
    return box_sum(dens, domain) * domain.cell_volume


def forward_differences_plain(values: np.ndarray, domain: DomainSpec) -> list:
    """Forward differences of a jump-free array on the grid of ``domain``."""
    return forward_differences(values, replace(domain, jumps=(0,) * len(domain.periods)))


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

MAGIC = "MBFIELD v1"


def write_field(u: Field, path) -> None:
    d = u.domain
    head = [d.n, d.n2, d.R, d.m, *d.periods]
    if any(d.jumps):
        head += list(d.jumps)
    lines = [MAGIC, " ".join(str(x) for x in head), " ".join(repr(float(x)) for x in d.lambdas)]
    lines.extend("%.17g" % x for x in u.values.ravel(order="C"))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field(path) -> Field:
    with open(path) as fh:
        lines = fh.read().split("\n")
    if lines[0].strip() != MAGIC:
        raise ValueError(f"{path}: not an {MAGIC} file")
    head = [int(x) for x in lines[1].split()]
    n, n2, R, m = head[:4]
    k = n - n2
    periods = tuple(head[4:4 + k])
    jumps = tuple(head[4 + k:4 + 2 * k]) or (0,) * k
    lambdas = tuple(float(x) for x in lines[2].split())
    dom = DomainSpec(n, n2, R, periods, m, lambdas, jumps)
    vals = np.array([float(x) for x in lines[3:] if x.strip()], dtype=float)
    return Field(dom, vals.reshape(dom.shape))
