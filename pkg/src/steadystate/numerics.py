"""Grids, quadrature, bracketed root finding and Perron eigenpairs.

Everything here works on uniform grids and dense numpy arrays.  Quadrature is
composite Simpson when the number of cells is even and the trapezoid rule
otherwise, so convergence tests should use even cell counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import GridMisaligned, NoBracket, NoConvergence, NotMetzler

ROOT_TOL = 1e-12
POWER_TOL = 1e-10
MAX_ITER = 100_000


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n_cells + 1`` nodes on ``[lower, upper]``."""

    lower: float
    upper: float
    n_cells: int

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"grid needs lower < upper, got [{self.lower}, {self.upper}]")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"grid needs an integer n_cells >= 2, got {self.n_cells}")

    @property
    def h(self) -> float:
        return (self.upper - self.lower) / self.n_cells

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.linspace(self.lower, self.upper, self.n_cells + 1)
        x.flags.writeable = False
        return x

    def index_of(self, x: float, rtol: float = 1e-9) -> int:
        """Index of the node at ``x``; raises GridMisaligned if there is none."""
        pos = (x - self.lower) / self.h
        k = int(round(pos))
        if not 0 <= k <= self.n_cells or abs(pos - k) > rtol * max(1.0, self.n_cells):
            raise GridMisaligned(f"{x} is not a node of {self}", point=x)
        return k


def aligned_grid(lower: float, upper: float, n_cells: int,
                 breakpoints: Sequence[float] = ()) -> Grid:
    """Smallest grid with at least ``n_cells`` cells having every breakpoint on a node.

    Each segment between consecutive breakpoints also gets an even number of
    cells, so Simpson's rule on the whole grid equals the sum over segments.
    """
    length = upper - lower
    fracs = [(b - lower) / length for b in breakpoints if lower < b < upper]
    n = max(2, int(n_cells))
    for cand in range(n, 8 * n + 2000):
        ks = []
        for f in fracs:
            pos = f * cand
            if abs(pos - round(pos)) > 1e-9 * cand:
                break
            ks.append(int(round(pos)))
        else:
            cuts = [0] + sorted(ks) + [cand]
            if all((b - a) % 2 == 0 and b > a for a, b in zip(cuts, cuts[1:])):
                return Grid(lower, upper, cand)
    raise GridMisaligned(
        f"no grid with about {n_cells} cells puts {list(breakpoints)} on nodes",
        breakpoints=list(breakpoints))


@dataclass(frozen=True)
class GridFn:
    """Values of a function at the nodes of a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_cells + 1,):
            raise ValueError(f"expected {self.grid.n_cells + 1} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function has non-finite values")
        object.__setattr__(self, "values", vals)

    def __call__(self, x):
        return np.interp(x, self.grid.nodes, self.values)

    def scaled(self, c: float) -> "GridFn":
        return GridFn(self.grid, c * self.values)


@dataclass(frozen=True)
class SampledField:
    """Node samples of a possibly discontinuous field.

    ``left[k]`` is the limit from below at node k and ``right[k]`` the limit
    from above; they differ from ``values`` only at declared breakpoints.
    Arithmetic acts on all three arrays, so products and quotients of fields
    keep their one-sided limits.
    """

    values: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @classmethod
    def continuous(cls, values) -> "SampledField":
        v = np.asarray(values, dtype=float)
        return cls(v, v, v)

    def where_zero(self, mask_field: "SampledField") -> "SampledField":
        """Copy with entries set to 0 wherever ``mask_field`` is 0."""
        if self.is_continuous and mask_field.is_continuous:
            return SampledField.continuous(np.where(mask_field.values == 0, 0.0, self.values))
        return SampledField(*(np.where(m == 0, 0.0, v) for m, v in
                              zip((mask_field.values, mask_field.left, mask_field.right),
                                  (self.values, self.left, self.right))))

    @property
    def is_continuous(self) -> bool:
        return self.left is self.values and self.right is self.values

    def _combine(self, other, op):
        if isinstance(other, SampledField):
            if self.is_continuous and other.is_continuous:
                return SampledField.continuous(op(self.values, other.values))
            return SampledField(op(self.values, other.values), op(self.left, other.left),
                                op(self.right, other.right))
        if self.is_continuous:
            return SampledField.continuous(op(self.values, other))
        return SampledField(op(self.values, other), op(self.left, other), op(self.right, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._combine(other, np.divide)

    def __rtruediv__(self, other):
        if self.is_continuous:
            return SampledField.continuous(other / self.values)
        return SampledField(other / self.values, other / self.left, other / self.right)

    def min(self) -> float:
        return float(min(self.values.min(), self.left.min(), self.right.min()))


def simpson_weights(n_cells: int, h: float) -> np.ndarray:
    """Quadrature weights: composite Simpson for even n_cells, trapezoid otherwise."""
    w = np.empty(n_cells + 1)
    if n_cells % 2 == 0:
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w[0] = w[-1] = 1.0
        return w * (h / 3.0)
    w[:] = 1.0
    w[0] = w[-1] = 0.5
    return w * h


def integrate(f: GridFn) -> float:
    return float(simpson_weights(f.grid.n_cells, f.grid.h) @ f.values)


def integrate_segment(values: np.ndarray, h: float, i0: int, i1: int) -> float:
    """Integral of node values between node indices i0 < i1."""
    if i1 <= i0:
        return 0.0
    return float(simpson_weights(i1 - i0, h) @ values[i0:i1 + 1])


def integrate_pieces(values, h: float, i0: int, i1: int, cuts: Sequence[int] = ()) -> float:
    """Integral over [i0, i1] split at the node indices in ``cuts``.

    ``values`` may be a plain array (continuous integrand) or a SampledField,
    in which case each piece uses the inward one-sided limits at its ends.
    """
    inner = sorted(c for c in cuts if i0 < c < i1)
    edges = [i0] + inner + [i1]
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        if isinstance(values, SampledField):
            piece = values.values[a:b + 1].copy()
            piece[0] = values.right[a]
            piece[-1] = values.left[b]
        else:
            piece = np.asarray(values)[a:b + 1]
        total += float(simpson_weights(b - a, h) @ piece)
    return total


def cumulative_integral(f: GridFn) -> GridFn:
    """Running trapezoid integral from the lower end, zero at the first node."""
    v = f.values
    g = np.concatenate(([0.0], np.cumsum(0.5 * f.grid.h * (v[1:] + v[:-1]))))
    return GridFn(f.grid, g)


def cumulative_cells(field: SampledField, h: float) -> np.ndarray:
    """Running trapezoid integral using one-sided limits on each cell."""
    cells = 0.5 * h * (field.right[:-1] + field.left[1:])
    return np.concatenate(([0.0], np.cumsum(cells)))


def bisect_root(f: Callable[[float], float], lo: float, hi: float,
                tol: float = ROOT_TOL, max_iter: int = 400) -> float:
    """Bisection on a sign-changing bracket.

    Stops once the bracket is narrower than ``tol`` (or cannot shrink in
    floating point) and returns its midpoint, or an endpoint where f vanishes.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0 or math.isnan(flo) or math.isnan(fhi):
        raise NoBracket(f"no sign change on [{lo}, {hi}]", lo=lo, hi=hi, f_lo=flo, f_hi=fhi)
    for _ in range(max_iter):
        if abs(hi - lo) <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fmid = f(mid)
        if fmid == 0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class PerronResult(NamedTuple):
    value: float
    vector: np.ndarray
    residual: float
    iterations: int
    irreducible: bool


def is_irreducible(A: np.ndarray) -> bool:
    """Strong connectivity of the nonzero pattern of ``A`` (diagonal ignored)."""
    import scipy.sparse as sp
    from scipy.sparse.csgraph import connected_components

    pattern = np.abs(A) > 0
    np.fill_diagonal(pattern, False)
    n_comp, _ = connected_components(sp.csr_matrix(pattern), directed=True, connection="strong")
    return n_comp == 1


def perron_rightmost(M, tol: float = POWER_TOL, max_iter: int = MAX_ITER) -> PerronResult:
    """Rightmost real eigenvalue of a Metzler matrix by shifted power iteration.

    Iterates on ``M + sigma*I`` with ``sigma = max|diag| + 1`` (a nonnegative
    matrix) with L1 normalisation.  For reducible matrices the limit is some
    rightmost nonnegative eigenpair; ``irreducible`` in the result flags this.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    off = M - np.diag(np.diag(M))
    if np.any(off < 0):
        i, j = np.argwhere(off < 0)[0]
        raise NotMetzler(f"negative off-diagonal entry M[{i},{j}] = {M[i, j]}", row=int(i), col=int(j))
    n = M.shape[0]
    sigma = float(np.max(np.abs(np.diag(M)))) + 1.0
    B = M + sigma * np.eye(n)
    if n > 64 and np.count_nonzero(B) < 0.1 * n * n:
        import scipy.sparse as sp
        B = sp.csr_matrix(B)
    v = np.full(n, 1.0 / n)
    lam = 0.0
    res = math.inf
    for it in range(1, max_iter + 1):
        w = B @ v
        norm = w.sum()
        v = w / norm
        if it % 10 == 0 or it == max_iter:
            Bv = B @ v
            lam = float(Bv.sum()) - sigma
            res = float(np.abs(Bv - (lam + sigma) * v).sum())
            if res <= tol * (1.0 + abs(lam)):
                return PerronResult(lam, v, res, it, is_irreducible(M))
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps",
                        eigenvalue=lam, residual=res, iterations=max_iter,
                        vector=v.tolist())


def numerical_rank(A: np.ndarray, threshold: float) -> int:
    """Rank by column-pivoted QR: number of |R_kk| above ``threshold``."""
    import scipy.linalg

    if A.size == 0:
        return 0
    R = scipy.linalg.qr(A, mode="r", pivoting=True)[0]
    return int(np.sum(np.abs(np.diag(R)) > threshold))


def brent_root(f: Callable[[float], float], lo: float, hi: float, tol: float = ROOT_TOL,
               max_iter: int = 400) -> float:
    """Bracketed root by Brent's method; same contract as :func:`bisect_root`.

    The bracket is kept throughout, so the result is as safe as bisection but
    typically needs a fraction of the function evaluations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0 or math.isnan(flo) or math.isnan(fhi):
        raise NoBracket(f"no sign change on [{lo}, {hi}]", lo=lo, hi=hi, f_lo=flo, f_hi=fhi)
    return float(brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=max_iter))
