"""Steady states as fixed points of ray-projection maps on the zero set of the spectral bound.

A steady state is a state u != 0 with ``A_{E(u)} u = 0``.  Writing x = E(u),
this asks for a point x on the zero set of the spectral bound sigma(x) whose
normalised eigenvector phi satisfies E(phi) parallel to x; scaling phi then
gives the state.  In simplex coordinates t = x2/(x1 + x2) the search is for
a crossing of g(t) = t, where g maps a curve point to the coordinate of
E(phi) at that point.

The same machinery serves three model families through small adapters
("routes"): the juvenile-adult and early-human transport models and the
selection-mutation model.  The consumer-resource model only has the scalar
route of :mod:`reproduction`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import selmut
from .errors import (BadOrigin, DegenerateEnvironment, HypothesisViolated, NoConvergence, NoCrossing,
                     NoOuterSignChange, NotParallel, StrictPositivityFailure)
from .levelset import (HALF_PI, LevelCurve, SimplexPoint, bracket_on_ray, point_on_ray,
                       simplex_of_theta, theta_of_simplex, trace_zero_set)
from .models import (ConsumerResourceModel, Density2D, EarlyHumanModel, Environment,
                     JuvenileAdultModel, SelectionMutationModel, environment_cr, environment_of,
                     total_mass, validate_model)
from .numerics import GridFn, brent_root
from .reproduction import net_reproduction
from .spectral import (boundary_residual, eigen_profile, multiplicity_diagnostic, spectral_bound)

logger = logging.getLogger(__name__)

PARALLEL_TOL = 1e-6
MULTIPLICITY_CELLS = 200


@dataclass
class SteadyStateResult:
    environment: Environment
    scale: float
    profile: object = field(repr=False)
    diagnostics: dict = field(default_factory=dict)
    method: str = ""


class CrossingSample(NamedTuple):
    t: np.ndarray
    g: np.ndarray


class _Route:
    """What the fixed-point solvers need to know about one model family."""

    def __init__(self, model, tol: float = 1e-12):
        self.model = model
        self.tol = tol

    def sigma(self, env: Environment) -> float:
        raise NotImplementedError

    def locator(self, env: Environment) -> float:
        """Any function with the sign of sigma; cheaper to evaluate."""
        raise NotImplementedError

    def eigen(self, env: Environment, lam: float = 0.0):
        raise NotImplementedError

    def environment(self, state) -> Environment:
        return environment_of(self.model, state)

    def mass(self, state) -> float:
        raise NotImplementedError

    def preflight(self) -> None:
        """Refuse models whose rates break the standing invariants."""
        violations = validate_model(self.model)
        if violations:
            raise HypothesisViolated("model invariants fail: " + "; ".join(v.detail for v in violations),
                                     violations=[v._asdict() for v in violations])


class _TransportRoute(_Route):
    def sigma(self, env):
        return spectral_bound(self.model, env, self.tol).bound

    def locator(self, env):
        return net_reproduction(self.model, env) - 1.0

    def eigen(self, env, lam=0.0):
        return eigen_profile(self.model, env, lam)

    def mass(self, state):
        return self.model.integrate(state.values)


class _SelMutRoute(_Route):
    def sigma(self, env):
        return selmut.sm_spectral_bound(self.model, env, self.tol)

    def locator(self, env):
        return selmut.reproduction_radius(self.model, env) - 1.0

    def eigen(self, env, lam=0.0):
        return selmut.sm_eigen_density(self.model, env, lam)

    def mass(self, state):
        return total_mass(state)

    def preflight(self):
        super().preflight()
        K = selmut.kernel_assemble(self.model, Environment(0.0, 0.0), 0.0)
        if not selmut.is_strictly_positive(K):
            logger.warning("the newborn kernel at the origin has zero rows or columns; "
                           "irreducibility of the semigroup is not guaranteed")


def route_for(model, tol: float = 1e-12) -> _Route:
    if isinstance(model, (JuvenileAdultModel, EarlyHumanModel)):
        return _TransportRoute(model, tol)
    if isinstance(model, SelectionMutationModel):
        return _SelMutRoute(model, tol)
    if isinstance(model, ConsumerResourceModel):
        raise TypeError("the consumer-resource model has no positive generator family; "
                        "use the scalar route (reproduction.solve_scalar_system)")
    raise TypeError(f"no fixed-point route for {type(model).__name__}")


def _simplex(env: Environment) -> float:
    total = env.e1 + env.e2
    if not total > 0:
        raise DegenerateEnvironment(f"E(phi) = ({env.e1}, {env.e2}) has no direction",
                                    environment=[env.e1, env.e2])
    return env.e2 / total


def map_G(model, curve: LevelCurve, theta: float, route: _Route | None = None) -> SimplexPoint:
    """Simplex coordinate of E(phi), phi the normalised eigenvector at the curve point on ``theta``."""
    route = route or route_for(model)
    phi = route.eigen(curve.point_at(theta), 0.0)
    return SimplexPoint(min(max(_simplex(route.environment(phi)), 0.0), 1.0))


def map_phi(model, curve: LevelCurve, theta: float, route: _Route | None = None) -> Environment:
    """The curve point on the ray through E(phi): the same search in environment coordinates."""
    t = map_G(model, curve, theta, route).t
    return curve.point_at(theta_of_simplex(t))


def sample_crossing(model, curve: LevelCurve, route: _Route | None = None) -> CrossingSample:
    route = route or route_for(model)
    t = np.array([simplex_of_theta(s.theta) for s in curve.samples])
    g = np.array([map_G(model, curve, s.theta, route).t for s in curve.samples])
    return CrossingSample(t, g)


def find_diagonal_crossing(samples: CrossingSample, refine: Callable[[float], float],
                           tol: float = 1e-12, find_all: bool = False):
    """Crossing of g(t) = t from sampled values, refined by a bracketed solve on ``refine``.

    Samples where g(t) = t to within ``tol`` count as crossings; those at t = 0
    or t = 1 are flagged as boundary points.  Without ``find_all`` the first
    interior crossing is returned, or the first boundary one if there is no
    interior crossing.
    """
    t, g = np.asarray(samples.t, dtype=float), np.asarray(samples.g, dtype=float)
    if t.size == 0 or np.any(np.diff(t) <= 0):
        raise ValueError("crossing samples need strictly increasing t")
    d = g - t
    found = []
    for i in range(t.size):
        if abs(d[i]) <= tol:
            found.append(SimplexPoint(float(t[i]), boundary=t[i] <= 0.0 or t[i] >= 1.0))
        elif i + 1 < t.size and abs(d[i + 1]) > tol and (d[i] > 0) != (d[i + 1] > 0):
            root = brent_root(lambda s: refine(s) - s, float(t[i]), float(t[i + 1]), tol)
            found.append(SimplexPoint(root, boundary=root <= 0.0 or root >= 1.0))
    if not found:
        table = [[float(a), float(b)] for a, b in zip(t, g)]
        raise NoCrossing("g(t) - t has no sign change among the samples", samples=table)
    if find_all:
        return found
    interior = [p for p in found if not p.boundary]
    return (interior or found)[0]


def check_hypotheses(route: _Route, r_max: float) -> dict:
    """sigma > 0 at the origin and sigma < 0 at radius r_max on both axes."""
    route.preflight()
    origin = route.sigma(Environment(0.0, 0.0))
    if not origin > 0:
        raise HypothesisViolated(f"spectral bound at the origin is {origin:.6g}; it must be positive",
                                 sigma_origin=origin)
    out = {"sigma_origin": origin}
    for name, env in (("sigma_e1_axis", Environment(r_max, 0.0)), ("sigma_e2_axis", Environment(0.0, r_max))):
        val = route.sigma(env)
        if not val < 0:
            raise HypothesisViolated(f"spectral bound at ({env.e1}, {env.e2}) is {val:.6g}; "
                                     f"it must be negative at radius {r_max}", **{name: val, "r_max": r_max})
        out[name] = val
    return out


def reconstruct_steady_state(model, env_on_curve: Environment, profile,
                             route: _Route | None = None, method: str = "") -> SteadyStateResult:
    """Scale a normalised eigenvector so that its environment is ``env_on_curve``."""
    route = route or route_for(model)
    e = route.environment(profile)
    a = math.atan2(e.e2, e.e1)
    b = math.atan2(env_on_curve.e2, env_on_curve.e1)
    if abs(a - b) > PARALLEL_TOL:
        raise NotParallel(f"E(profile) and the curve point differ in angle by {abs(a - b):.3g}",
                          angle=abs(a - b), environment=[env_on_curve.e1, env_on_curve.e2],
                          profile_environment=[e.e1, e.e2])
    scale = env_on_curve.norm1() / e.norm1()
    state = profile.scaled(scale)
    res = SteadyStateResult(env_on_curve, scale, state, {}, method)
    res.diagnostics = verify_steady_state(model, res)
    return res


def cell_residual(p: np.ndarray, gamma, mu, h: float) -> np.ndarray:
    """(gamma p)_s + mu p on each cell, differenced at the cell midpoint.

    Rates enter through their one-sided limits at the cell ends, so a jump
    of gamma or mu at a node does not leak into the neighbouring cells.
    """
    flux_in = gamma.right[:-1] * p[:-1]
    flux_out = gamma.left[1:] * p[1:]
    loss = 0.5 * (mu.right[:-1] * p[:-1] + mu.left[1:] * p[1:])
    return (flux_out - flux_in) / h + loss


def verify_steady_state(model, result: SteadyStateResult) -> dict:
    """Residuals of the steady-state equations for a stored result; nothing is modified."""
    env = result.environment
    flags = []
    if isinstance(model, SelectionMutationModel):
        u = result.profile
        m = model if u.grid == model.grid else model.with_cells(u.grid.n_cells)
        mass = total_mass(u)
        if np.any(u.values < 0) or not mass > 0:
            flags.append("NotPositive")
        E = environment_of(m, u)
        r0 = selmut.reproduction_radius(m, env)
        diag = {
            "sigma_at_env": selmut.sm_spectral_bound(m, env),
            "env_consistency": abs(E.e1 - env.e1) + abs(E.e2 - env.e2),
            "boundary_residual": selmut.renewal_residual(m, u, env),
            "ode_residual": selmut.age_residual(m, u, env),
            "R_value": r0,
            "h": u.grid.h,
        }
    else:
        p = result.profile
        m = model if p.grid == model.grid else model.with_cells(p.grid.n_cells)
        if p.grid != m.grid:
            raise ValueError("profile grid does not match the model grid")
        rates = m.transport_rates(env)
        h = m.grid.h
        ode = cell_residual(p.values, rates.gamma, rates.mu, h)
        if np.any(p.values < 0) or not m.integrate(p.values) > 0:
            flags.append("NotPositive")
        if isinstance(m, ConsumerResourceModel):
            E = environment_cr(p, env.e2)
        else:
            E = environment_of(m, p)
        diag = {
            "sigma_at_env": spectral_bound(m, env).bound,
            "env_consistency": abs(E.e1 - env.e1) + abs(E.e2 - env.e2),
            "boundary_residual": boundary_residual(m, env, p),
            "ode_residual": float(h * np.sum(np.abs(ode))),
            "R_value": net_reproduction(m, env),
            "h": h,
        }
        if isinstance(m, ConsumerResourceModel):
            fed = m.integrate(m.feeding_rate(env) * p.values)
            diag["resource_residual"] = abs(env.e2 * m.growth(env.e2) - fed)
    diag["flags"] = flags
    return diag


def _route_result(route: _Route, curve: LevelCurve, point: SimplexPoint, method: str) -> SteadyStateResult:
    env = curve.point_at(theta_of_simplex(point.t))
    res = reconstruct_steady_state(route.model, env, route.eigen(env, 0.0), route, method)
    if point.boundary:
        res.diagnostics["flags"].append("BoundaryCrossing")
    return res


def solve_all_steady_states(model, method: str = "irreducible", tol: float = 1e-10,
                            n_rays: int = 257, r_max: float = 10.0,
                            branches=(0,)) -> list:
    """Every steady state found by the diagonal-crossing search on the requested curve branches.

    Branch 0 is the innermost zero on each ray; higher branches are the further
    zeros, for spectral bounds that are not monotone along rays.
    """
    if method not in ("irreducible", "monotone"):
        raise ValueError(f"unknown method {method!r}; expected 'irreducible' or 'monotone'")
    route = route_for(model, min(tol, 1e-12))
    hyp = check_hypotheses(route, r_max)
    out = []
    for branch in branches:
        curve = trace_zero_set(route.sigma, n_rays, r_max, 1e-12, locator=route.locator, branch=branch)
        samples = sample_crossing(model, curve, route)
        refine = lambda t: map_G(model, curve, theta_of_simplex(t), route).t
        for point in find_diagonal_crossing(samples, refine, tol, find_all=True):
            res = _route_result(route, curve, point, method)
            res.diagnostics.update(hyp)
            res.diagnostics["branch"] = branch
            if method == "monotone":
                _attach_multiplicity(model, res)
            out.append(res)
    return out


def _attach_multiplicity(model, res: SteadyStateResult) -> None:
    if isinstance(model, SelectionMutationModel):
        return
    mult = multiplicity_diagnostic(model, res.environment, None, MULTIPLICITY_CELLS)
    res.diagnostics["multiplicity"] = [mult.geometric, mult.algebraic]
    if (mult.geometric, mult.algebraic) != (1, 1):
        logger.warning("rightmost eigenvalue at %s has multiplicity (geometric %d, algebraic %d); "
                       "the single-valued fixed-point search may not apply",
                       res.environment, mult.geometric, mult.algebraic)
        res.diagnostics["flags"].append("MultiplicityNotOne")


def solve_steady_state(model, method: str = "irreducible", tol: float = 1e-10,
                       n_rays: int = 257, r_max: float = 10.0) -> SteadyStateResult:
    """A positive steady state from the level-set fixed-point search.

    ``irreducible`` and ``monotone`` run the same crossing search; ``monotone``
    also reports the multiplicity of the rightmost eigenvalue of the
    discretised generator at the solution and warns when it is not simple.
    """
    if method not in ("irreducible", "monotone"):
        raise ValueError(f"unknown method {method!r}; expected 'irreducible' or 'monotone'")
    route = route_for(model, min(tol, 1e-12))
    hyp = check_hypotheses(route, r_max)
    curve = trace_zero_set(route.sigma, n_rays, r_max, 1e-12, locator=route.locator)
    samples = sample_crossing(model, curve, route)
    refine = lambda t: map_G(model, curve, theta_of_simplex(t), route).t
    point = find_diagonal_crossing(samples, refine, tol)
    res = _route_result(route, curve, point, method)
    res.diagnostics.update(hyp)
    if method == "monotone":
        _attach_multiplicity(model, res)
    return res


def steady_state_from_environment(model, env: Environment, method: str = "scalar") -> SteadyStateResult:
    """Steady state whose environment is a known solution of the scalar equations."""
    if isinstance(model, ConsumerResourceModel):
        phi = eigen_profile(model, env, 0.0)
        scale = env.e1 / model.integrate(phi.values)
        res = SteadyStateResult(env, scale, phi.scaled(scale), {}, method)
        res.diagnostics = verify_steady_state(model, res)
        return res
    route = route_for(model)
    return reconstruct_steady_state(model, env, route.eigen(env, 0.0), route, method)


def solve_state_space(model, init=None, damping: float = 0.5, max_iter: int = 500,
                      tol: float = 1e-10, r_max: float = 10.0) -> SteadyStateResult:
    """Averaged iteration on normalised states: x <- normalise((1 - d) x + d F(eta(x))).

    ``eta`` scales x along its ray until the spectral bound at E(c x) vanishes
    (a scalar solve per iterate) and F returns the normalised eigenvector there.
    """
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    route = route_for(model)
    route.preflight()
    if init is None:
        init = _constant_state(model)
    mass = route.mass(init)
    if not mass > 0 or np.any(init.values < 0):
        raise HypothesisViolated("the initial state must be nonnegative with positive mass", mass=mass)
    x = init.scaled(1.0 / mass)
    env = None
    for it in range(1, max_iter + 1):
        env = _eta(route, x, r_max)
        phi = route.eigen(env, 0.0)
        new = x.scaled(1.0 - damping)
        new = type(x)(x.grid, new.values + damping * phi.values)
        new = new.scaled(1.0 / route.mass(new))
        step = route.mass(type(x)(x.grid, np.abs(new.values - x.values)))
        x = new
        if step <= tol:
            env = _eta(route, x, r_max)
            res = reconstruct_steady_state(model, env, x, route, "state-space")
            res.diagnostics["iterations"] = it
            return res
    raise NoConvergence(f"state-space iteration did not settle in {max_iter} steps",
                        iterations=max_iter, environment=[env.e1, env.e2] if env else None)


def _constant_state(model):
    if isinstance(model, SelectionMutationModel):
        n = model.grid.n_cells + 1
        return Density2D(model.grid, np.ones((n, n)))
    return GridFn(model.grid, np.ones(model.grid.n_cells + 1))


def _eta(route: _Route, x, r_max: float) -> Environment:
    e = route.environment(x)
    if not e.norm1() > 0:
        raise HypothesisViolated("E(x) = 0: the state has no direction in environment space",
                                 environment=[e.e1, e.e2])
    theta = HALF_PI if e.e1 == 0 else math.atan2(e.e2, e.e1)
    try:
        rho = bracket_on_ray(route.locator, theta, r_max, 1e-13)
    except (BadOrigin, NoOuterSignChange) as exc:
        raise HypothesisViolated(f"the spectral bound does not change sign along the ray through E(x): {exc}",
                                 theta=theta) from exc
    return point_on_ray(theta, rho)


class FixedRay(NamedTuple):
    """Eigenvalue, unit-L^1 ray and the residual ||L x - eigenvalue x||_1."""

    eigenvalue: float
    ray: np.ndarray
    iterations: int
    residual: float


def fixed_ray(L, tol: float = 1e-12, max_iter: int = 100_000) -> FixedRay:
    """Invariant ray of a positive matrix by the averaged iteration x <- (x + Lx/|Lx|) / 2.

    Plain normalised power iteration can cycle (e.g. on a permutation matrix);
    averaging keeps the same fixed rays and damps the cycling.  An iterate
    whose image vanishes, or shrinks to rounding level, means the operator
    is not strictly positive on the cone and no positive eigenvalue is found.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError("fixed_ray needs a square matrix")
    if np.any(L < 0):
        raise HypothesisViolated("the operator does not map the nonnegative cone into itself",
                                 min_entry=float(L.min()))
    n = L.shape[0]
    norm = float(np.abs(L).sum(axis=0).max())
    floor = math.sqrt(np.finfo(float).eps) * norm
    x = np.full(n, 1.0 / n)
    for it in range(1, max_iter + 1):
        y = L @ x
        r = float(y.sum())
        if not r > floor:
            raise StrictPositivityFailure(
                "the image of a positive vector vanishes; the operator is not strictly positive",
                iteration=it, iterate=x.tolist(), image_norm=r)
        y /= r
        change = float(np.abs(y - x).sum())
        if change <= tol:
            return FixedRay(r, x, it, r * change)
        x = 0.5 * (x + y)
        x /= x.sum()
    raise NoConvergence(f"fixed-ray iteration did not converge in {max_iter} steps",
                        iterate=x.tolist(), direction_change=change)
