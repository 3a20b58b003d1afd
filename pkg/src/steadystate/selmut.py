"""Selection-mutation model: the newborn kernel, its spectral radius and steady states.

Newborn maturity distributions ``v(l)`` are mapped to the next generation by

    (M_lam v)(l) = int b(l, lhat) I_lam(lhat) v(lhat) dlhat,
    I_lam(lhat) = int_lhat^a_m beta(E, lhat, a) exp(-int_0^a (mu(E, lhat, r) + lam) dr) da.

The spectral bound of the generator at ``E`` is the ``lam`` with r(M_lam) = 1.
The inner age integral uses exponentially fitted cell weights: on each cell
the survival factor is integrated exactly as an exponential, which keeps the
discrete kernel within the continuous norm bound sup(beta)/lam even on coarse
grids.  The outer maturity integral uses trapezoid weights.
"""
from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from .errors import NoBracket, NoConvergence
from .models import Density2D, Environment, SelectionMutationModel, total_mass
from .numerics import Grid, GridFn, brent_root

logger = logging.getLogger(__name__)

POWER_TOL = 1e-12
LAMBDA_MAX = 1e3


class KernelMatrix(NamedTuple):
    """Discretised M_lam on the maturity grid; ``matrix[i, j]`` already carries the weight of node j."""

    matrix: np.ndarray
    grid: Grid
    weights: np.ndarray


class RadiusResult(NamedTuple):
    radius: float
    eigen: GridFn
    iterations: int
    flags: list


def trapezoid_weights(grid: Grid) -> np.ndarray:
    w = np.full(grid.n_cells + 1, grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    return w


def _logmean(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(x - y) / (log x - log y), extended continuously to x = y and by 0 where either vanishes."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    out = np.zeros_like(x)
    pos = (x > 0) & (y > 0)
    same = pos & np.isclose(x, y, rtol=1e-12, atol=0.0)
    diff = pos & ~same
    out[same] = 0.5 * (x[same] + y[same])
    lx, ly = np.log(x[diff]), np.log(y[diff])
    out[diff] = (x[diff] - y[diff]) / (lx - ly)
    return out


def _rates(model: SelectionMutationModel, env: Environment, grid: Grid):
    """beta and mu on the (lhat, a) lattice; both names l and lhat bind the maturity axis."""
    L, A = np.meshgrid(grid.nodes, grid.nodes, indexing="ij")
    b = model.bindings(env)
    beta = model.beta.sample(L.shape, lhat=L, l=L, a=A, **b)
    mu = model.mu.sample(L.shape, lhat=L, l=L, a=A, **b)
    return beta, mu


def survival_lattice(model: SelectionMutationModel, env: Environment, lam: float,
                     grid: Grid | None = None, mu: np.ndarray | None = None) -> np.ndarray:
    """exp(-int_0^a (mu(E, l, r) + lam) dr) on the (l, a) lattice."""
    grid = grid or model.grid
    if mu is None:
        mu = _rates(model, env, grid)[1]
    h = grid.h
    cum = np.concatenate((np.zeros((mu.shape[0], 1)),
                          np.cumsum(0.5 * h * (mu[:, 1:] + mu[:, :-1]), axis=1)), axis=1)
    with np.errstate(over="ignore"):
        return np.exp(-(cum + lam * grid.nodes[None, :]))


def _age_integrals(beta: np.ndarray, weight: np.ndarray, h: float) -> np.ndarray:
    """Per row j, int_{a_j}^{a_m} beta * weight da with exponentially fitted cells."""
    cells = h * 0.5 * (beta[:, 1:] + beta[:, :-1]) * _logmean(weight[:, 1:], weight[:, :-1])
    n = beta.shape[0]
    # keep only cells to the right of the diagonal node a_j = lhat_j
    mask = np.arange(n - 1)[None, :] >= np.arange(n)[:, None]
    return np.sum(np.where(mask, cells, 0.0), axis=1)


def kernel_assemble(model: SelectionMutationModel, env: Environment, lam: float,
                    n_l: int | None = None, n_a: int | None = None) -> KernelMatrix:
    """Nonnegative matrix of v -> int b(., lhat) I_lam(lhat) v(lhat) dlhat.

    The maturity and age axes share one grid, so the lower age limit lhat is
    always a node.  ``n_a`` must equal ``n_l`` when given.
    """
    n = n_l or model.n_cells
    if n_a is not None and n_a != n:
        raise ValueError("the maturity and age grids must coincide (n_a == n_l)")
    grid = Grid(0.0, model.a_m, n)
    beta, mu = _rates(model, env, grid)
    S = survival_lattice(model, env, lam, grid, mu)
    I = _age_integrals(beta, S, grid.h)
    x = grid.nodes
    Lm, Lh = np.meshgrid(x, x, indexing="ij")
    b = model.kernel.sample(Lm.shape, l=Lm, lhat=Lh)
    w = trapezoid_weights(grid)
    return KernelMatrix(b * (w * I)[None, :], grid, w)


def kernel_l1_norm(K: KernelMatrix) -> float:
    """Operator norm of the kernel on L^1 with trapezoid weights: max_j sum_i w_i K_ij / w_j."""
    return float(np.max(K.weights @ K.matrix / K.weights))


def is_strictly_positive(K: KernelMatrix) -> bool:
    # the last column (lhat = a_m) has an empty age interval and carries no mass
    M = K.matrix[:, :-1]
    scale = np.max(M) if M.size else 0.0
    if scale <= 0:
        return False
    tiny = 1e-14 * scale
    return bool(np.all(M.max(axis=0) > tiny) and np.all(M.max(axis=1) > tiny))


def kernel_spectral_radius(K: KernelMatrix, tol: float = POWER_TOL,
                           max_iter: int = 100_000) -> RadiusResult:
    """Dominant eigenvalue of the kernel by weighted-L^1 power iteration from a constant.

    The zero kernel returns radius 0 with the ``StrictPositivityFailure`` flag
    instead of raising, since that is a legitimate (if degenerate) answer.
    """
    M, w = K.matrix, K.weights
    if np.any(M < 0):
        raise ValueError("kernel matrix has negative entries")
    flags = [] if is_strictly_positive(K) else ["StrictPositivityFailure"]
    v = np.full(M.shape[0], 1.0 / (w.sum()))
    r = 0.0
    for it in range(1, max_iter + 1):
        y = M @ v
        r = float(w @ y)
        if r <= 0.0:
            return RadiusResult(0.0, GridFn(K.grid, v), it, flags or ["StrictPositivityFailure"])
        y /= r
        if float(w @ np.abs(y - v)) <= tol:
            return RadiusResult(r, GridFn(K.grid, y), it, flags)
        v = y
    raise NoConvergence(f"kernel power iteration did not converge in {max_iter} steps",
                        radius=r, iterations=max_iter)


def reproduction_radius(model: SelectionMutationModel, env: Environment, lam: float = 0.0) -> float:
    return kernel_spectral_radius(kernel_assemble(model, env, lam)).radius


def sm_spectral_bound(model: SelectionMutationModel, env: Environment, tol: float = 1e-12,
                      lam_max: float = LAMBDA_MAX) -> float:
    """The lam with r(M_lam) = 1, by bracket doubling from [-1, 1] and a bracketed solve."""
    f = lambda lam: reproduction_radius(model, env, lam) - 1.0
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
        raise NoBracket(f"r(M_lam) - 1 does not change sign on [{lo}, {hi}]",
                        lo=lo, hi=hi, r_lo=flo + 1.0, r_hi=fhi + 1.0, environment=[env.e1, env.e2])
    return brent_root(f, lo, hi, tol)


def sm_eigen_density(model: SelectionMutationModel, env: Environment, lam: float) -> Density2D:
    """u(l, a) = v(l) exp(-int_0^a (mu + lam)) with v the kernel eigenfunction, unit total mass."""
    res = kernel_spectral_radius(kernel_assemble(model, env, lam))
    u = res.eigen.values[:, None] * survival_lattice(model, env, lam)
    d = Density2D(model.grid, u)
    return d.scaled(1.0 / total_mass(d))


def births(model: SelectionMutationModel, u: Density2D, env: Environment) -> np.ndarray:
    """B(u)(l): newborns of maturity l produced by the density ``u`` at environment ``env``.

    Uses the same quadrature as the kernel, so B(S_0 v) equals M_0 v exactly.
    """
    g = u.grid
    if g != model.grid:
        model = model.with_cells(g.n_cells)
    beta, _ = _rates(model, env, g)
    I = _age_integrals(beta, u.values, g.h)
    x = g.nodes
    Lm, Lh = np.meshgrid(x, x, indexing="ij")
    b = model.kernel.sample(Lm.shape, l=Lm, lhat=Lh)
    return b @ (trapezoid_weights(g) * I)


def renewal_residual(model: SelectionMutationModel, u: Density2D, env: Environment) -> float:
    """||u(., 0) - B(u)||_1 over the maturity axis."""
    w = trapezoid_weights(u.grid)
    return float(w @ np.abs(u.values[:, 0] - births(model, u, env)))


def age_residual(model: SelectionMutationModel, u: Density2D, env: Environment) -> float:
    """||u_a + mu u||_1 with differences centred on the age cells."""
    g = u.grid
    if g != model.grid:
        model = model.with_cells(g.n_cells)
    _, mu = _rates(model, env, g)
    v = u.values
    r = np.abs((v[:, 1:] - v[:, :-1]) / g.h + 0.5 * (mu[:, 1:] * v[:, 1:] + mu[:, :-1] * v[:, :-1]))
    return float(trapezoid_weights(g) @ r.sum(axis=1) * g.h)


def solve_selmut(model: SelectionMutationModel, tol: float = 1e-10, n_rays: int = 257,
                 r_max: float = 10.0):
    """Positive steady state of the selection-mutation model via the level-set route."""
    from .fixedpoint import solve_steady_state
    return solve_steady_state(model, "irreducible", tol=tol, n_rays=n_rays, r_max=r_max)
