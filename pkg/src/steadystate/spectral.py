"""Spectral bounds and eigenvectors of the transport generators.

For the transport models the spectral bound at a fixed environment is the
unique real root of the characteristic equation ``K(lam) = 1`` with

    K(lam) = int_fertile beta/gamma * exp(-int_0^s (lam + mu)/gamma) ds.

The upwind matrix built by :func:`assemble_generator_matrix` is an independent
first-order discretisation of the same generator and serves as an oracle.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import NoBracket, ResolventConditionViolated
from .models import Environment
from .numerics import (GridFn, SampledField, brent_root, cumulative_cells, numerical_rank,
                       perron_rightmost)

LAMBDA_MAX = 1e3


class SpectralResult(NamedTuple):
    bound: float
    residual: float
    iterations: int
    method: str


class Multiplicity(NamedTuple):
    geometric: int
    algebraic: int
    order: int


def _log_survival(rates, lam: float, h: float) -> np.ndarray:
    q = (rates.mu + lam) / rates.gamma
    return cumulative_cells(q, h)


class CharacteristicFn:
    """K(lam) for one model and environment, with the rates sampled once."""

    def __init__(self, model, env: Environment):
        self.model = model
        self.env = env
        self.rates = model.transport_rates(env)
        self._weight = self.rates.beta / self.rates.gamma
        self.evaluations = 0

    def survival(self, lam: float) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(-_log_survival(self.rates, lam, self.model.grid.h))

    def __call__(self, lam: float) -> float:
        self.evaluations += 1
        surv = self.survival(lam)
        with np.errstate(invalid="ignore", over="ignore"):
            integrand = (self._weight * surv).where_zero(self._weight)
        lo, hi = self.model.fertile_idx
        with np.errstate(invalid="ignore", over="ignore"):
            return self.model.integrate(integrand, lo, hi)


def survival(model, env: Environment, lam: float) -> GridFn:
    """exp(-int_0^s (mu + lam)/gamma) on the model grid."""
    return GridFn(model.grid, CharacteristicFn(model, env).survival(lam))


def characteristic_value(model, env: Environment, lam: float) -> float:
    return CharacteristicFn(model, env)(lam)


def spectral_bound(model, env: Environment, tol: float = 1e-12,
                   lam_max: float = LAMBDA_MAX) -> SpectralResult:
    """Root of K(lam) = 1 by bracket doubling from [-1, 1] and a bracketed Brent solve."""
    K = CharacteristicFn(model, env)
    f = lambda lam: K(lam) - 1.0
    lo, hi = -1.0, 1.0
    flo, fhi = f(lo), f(hi)
    while fhi > 0 and hi <= lam_max:
        lo, flo = hi, fhi
        hi *= 2.0
        fhi = f(hi)
    while flo < 0 and -lo <= lam_max:
        hi, fhi = lo, flo
        lo *= 2.0
        flo = f(lo)
    if not (flo >= 0 >= fhi):
        raise NoBracket(f"K(lam) - 1 does not change sign on [{lo}, {hi}]",
                        lo=lo, hi=hi, K_lo=flo + 1.0, K_hi=fhi + 1.0,
                        environment=[env.e1, env.e2])
    root = brent_root(f, lo, hi, tol)
    return SpectralResult(root, abs(K(root) - 1.0), K.evaluations, "characteristic")


def eigen_profile(model, env: Environment, lam: float) -> GridFn:
    """Normalised positive eigenvector (gamma(0)/gamma(s)) * survival, unit L1 mass."""
    K = CharacteristicFn(model, env)
    gamma = K.rates.gamma.values
    phi = gamma[0] / gamma * K.survival(lam)
    return GridFn(model.grid, phi / model.integrate(phi))


def boundary_residual(model, env: Environment, p: GridFn) -> float:
    """|gamma(0) p(0) - int beta p| for a profile on the model grid."""
    rates = model.transport_rates(env)
    lo, hi = model.fertile_idx
    births = model.integrate(rates.beta * p.values, lo, hi)
    return float(abs(rates.gamma.values[0] * p.values[0] - births))


def assemble_generator_matrix(model, env: Environment, n: int | None = None) -> np.ndarray:
    """First-order upwind matrix of p -> -(gamma p)_s - mu p with the renewal condition.

    Unknowns are the node values p_1..p_N (N = number of cells of the aligned
    grid).  The boundary value p_0 is eliminated through the trapezoid
    quadrature of the birth integral, which lands in the first row, so the
    result is a Metzler matrix of order N.
    """
    if n is not None:
        model = model.with_cells(n)
    g = model.grid
    N, h = g.n_cells, g.h
    rates = model.transport_rates(env)
    gam, mu = rates.gamma.values, rates.mu.values
    lo, hi = model.fertile_idx
    w = np.zeros(N + 1)
    w[lo:hi + 1] = h
    w[lo] = w[hi] = 0.5 * h
    births = w * rates.beta.values
    births[lo] = w[lo] * rates.beta.right[lo]
    births[hi] = w[hi] * rates.beta.left[hi]
    # gamma_0 p_0 = sum_j births_j p_j  =>  gamma_0 p_0 = sum_{j>=1} c_j p_j
    c = births[1:] * gam[0] / (gam[0] - births[0])
    M = np.zeros((N, N))
    idx = np.arange(N)
    M[idx, idx] = -gam[1:] / h - mu[1:]
    M[idx[1:], idx[:-1]] = gam[1:-1] / h
    M[0, :] += c / h
    return M


def matrix_spectral_bound(model, env: Environment, n: int, tol: float = 1e-10) -> SpectralResult:
    res = perron_rightmost(assemble_generator_matrix(model, env, n), tol)
    return SpectralResult(res.value, res.residual, res.iterations, "matrix")


def resolvent_apply(model, env: Environment, lam: float, f: GridFn) -> GridFn:
    """Explicit resolvent (c + G(s)) H(s) of the transport generator at ``lam``.

    F = exp(-int (lam + mu)/gamma), H = F/gamma, G = int_0^s f/F and
    c = int beta/gamma F G / (1 - int beta/gamma F) over the fertile interval.
    """
    if f.grid != model.grid:
        model = model.with_cells(f.grid.n_cells)
        if f.grid != model.grid:
            raise ValueError("profile grid does not match the model grid")
    h = model.grid.h
    rates = model.transport_rates(env)
    F = np.exp(-_log_survival(rates, lam, h))
    weight = rates.beta / rates.gamma
    lo, hi = model.fertile_idx
    denom_int = model.integrate(weight * F, lo, hi)
    if denom_int >= 1.0:
        raise ResolventConditionViolated(
            f"int beta/gamma F = {denom_int:.6g} >= 1; lam = {lam} is too small",
            value=denom_int, lam=lam)
    ratio = f.values / F
    G = np.concatenate(([0.0], np.cumsum(0.5 * h * (ratio[1:] + ratio[:-1]))))
    c = model.integrate(weight * (F * G), lo, hi) / (1.0 - denom_int)
    H = F / rates.gamma.values
    return GridFn(model.grid, (c + G) * H)


def resolvent_identity_residual(model, env: Environment, lam: float, f: GridFn) -> float:
    """||(lam I - M) R(lam) f - f||_1 with M the upwind matrix on the same grid.

    The explicit resolvent and the matrix are independent discretisations of
    the same operator, so this is O(h) for smooth f.
    """
    r = resolvent_apply(model, env, lam, f)
    m = model if f.grid == model.grid else model.with_cells(f.grid.n_cells)
    M = assemble_generator_matrix(m, env)
    x = r.values[1:]
    resid = lam * x - M @ x - f.values[1:]
    return float(m.grid.h * np.sum(np.abs(resid)))


def probe_profiles(grid, count: int) -> list:
    """A constant and ``count - 1`` hat functions, each with unit L1 mass."""
    x = grid.nodes
    length = grid.upper - grid.lower
    probes = [np.full_like(x, 1.0 / length)]
    k = max(count - 1, 0)
    width = max(2.0 * grid.h, length / max(k, 1))
    for c in np.linspace(grid.lower, grid.upper, k) if k else []:
        hat = np.clip(1.0 - np.abs(x - c) / width, 0.0, None)
        probes.append(hat)
    from .numerics import simpson_weights
    w = simpson_weights(grid.n_cells, grid.h)
    return [GridFn(grid, p / (w @ p)) for p in probes]


def resolvent_distance(model, env1: Environment, env2: Environment, lam: float,
                       probe_count: int = 16) -> float:
    """Largest L1 distance between the two resolvents over a set of unit probes.

    This is a lower bound for the operator-norm distance, used as a continuity
    diagnostic rather than a certified norm.
    """
    best = 0.0
    for f in probe_profiles(model.grid, probe_count):
        d = resolvent_apply(model, env1, lam, f).values - resolvent_apply(model, env2, lam, f).values
        best = max(best, model.integrate(np.abs(d)))
    return best


def multiplicity(M: np.ndarray, lam: float, rank_tol: float | None = None) -> Multiplicity:
    """Geometric and algebraic multiplicity of ``lam`` from numerical ranks.

    The algebraic multiplicity is read off the ranks of successive powers of
    ``M - lam I`` until they stop decreasing.  Each power is judged against a
    threshold scaled with its own infinity norm.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    A = M - lam * np.eye(n)
    rel = 1e-7 if rank_tol is None else rank_tol / max(np.linalg.norm(M, np.inf), 1e-300)

    def rank(B):
        return numerical_rank(B, rel * max(np.linalg.norm(B, np.inf), 1e-300))

    r = rank(A)
    geometric = n - r
    P = A
    prev = r
    for _ in range(n):
        P = P @ A
        rk = rank(P)
        if rk == prev:
            break
        prev = rk
    return Multiplicity(geometric, n - prev, n)


def multiplicity_diagnostic(model, env: Environment, lam: float | None, n: int,
                            rank_tol: float | None = None) -> Multiplicity:
    """Multiplicities of the rightmost eigenvalue of the discretised generator.

    ``lam=None`` uses the matrix's own Perron eigenvalue, which is what the
    rank test needs; the continuous spectral bound differs from it by O(h).
    """
    M = assemble_generator_matrix(model, env, n)
    if lam is None:
        lam = perron_rightmost(M).value
    return multiplicity(M, lam, rank_tol)
