"""Model definitions and environmental operators.

Four model variants are supported.  The three transport models (juvenile-adult,
consumer-resource, early-human) share one interface used by the spectral and
reproduction code::

    model.grid               aligned grid over the structure interval
    model.fertile            (lo, hi) interval of the birth integral
    model.cuts               grid indices of the structural breakpoints
    model.transport_rates(E) sampled (beta, mu, gamma) at environment E

The selection-mutation model lives on a square and is handled by ``selmut``.
"""
from __future__ import annotations

import inspect
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

from .expr import Node, parse_rate_expression, unparse
from .numerics import Grid, GridFn, SampledField, aligned_grid, integrate_pieces, integrate_segment

GAMMA_FLOOR = 1e-8
DEFAULT_CELLS = 400


@dataclass(frozen=True)
class Environment:
    """Interaction variables (J, A), (P, Q) or (S, T)."""

    e1: float
    e2: float

    def __post_init__(self):
        for v in (self.e1, self.e2):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"environment components must be finite and >= 0, got ({self.e1}, {self.e2})")
        object.__setattr__(self, "e1", float(self.e1))
        object.__setattr__(self, "e2", float(self.e2))

    @classmethod
    def clipped(cls, e1: float, e2: float) -> "Environment":
        return cls(max(e1, 0.0), max(e2, 0.0))

    def __iter__(self):
        return iter((self.e1, self.e2))

    def norm1(self) -> float:
        return self.e1 + self.e2

    def scaled(self, c: float) -> "Environment":
        return Environment(c * self.e1, c * self.e2)

    def simplex(self) -> float:
        """Barycentric coordinate t of the ray through this point on x + y = 1."""
        return self.e2 / (self.e1 + self.e2)


class RateField:
    """A rate function given as expression text, a parsed tree, a number or a callable.

    Calling it with keyword bindings evaluates it; unused bindings are ignored.
    Callables receive only the keyword arguments their signature names.
    """

    def __init__(self, source):
        self.source = source
        if isinstance(source, RateField):
            self.source = source.source
            self._fn = source._fn
            self.text = source.text
            self.variables = source.variables
            return
        if isinstance(source, (int, float)):
            source = str(source)
        if isinstance(source, str):
            source = parse_rate_expression(source)
        if isinstance(source, Node):
            self.text = unparse(source)
            self._fn = source.evaluate
            self.variables = source.variables()
            return
        if not callable(source):
            raise TypeError(f"cannot build a rate field from {source!r}")
        self.text = getattr(source, "__name__", "<callable>")
        params = inspect.signature(source).parameters
        if any(p.kind == p.VAR_KEYWORD for p in params.values()):
            self._fn = lambda env: source(**env)
        else:
            names = list(params)
            self._fn = lambda env: source(**{k: env[k] for k in names})
        self.variables = set(params)

    def __call__(self, **bindings):
        return self._fn(bindings)

    def sample(self, shape, **bindings) -> np.ndarray:
        out = np.asarray(self(**bindings), dtype=float)
        return np.array(np.broadcast_to(out, shape), dtype=float)

    def __repr__(self):
        return f"RateField({self.text!r})"


def rate(source) -> RateField:
    return source if isinstance(source, RateField) else RateField(source)


def sample_field(fld: RateField, grid: Grid, var: str, breakpoints=(), **bindings) -> SampledField:
    """Sample ``fld`` on the grid nodes with one-sided limits at breakpoints.

    Limits are approximated by evaluating a tiny distance either side of the
    node; they replace the node value only when the field actually jumps.
    """
    nodes = grid.nodes
    n = nodes.size
    if not breakpoints:
        values = fld.sample((n,), **{var: nodes}, **bindings)
        return SampledField(values, values, values)
    delta = 1e-9 * (grid.upper - grid.lower)
    bp = np.asarray(breakpoints, dtype=float)
    pts = np.concatenate((nodes, bp - delta, bp + delta))
    allv = fld.sample(pts.shape, **{var: pts}, **bindings)
    values = allv[:n]
    left, right = values.copy(), values.copy()
    nb = bp.size
    for j, x in enumerate(breakpoints):
        k = grid.index_of(x)
        at = values[k]
        for v, arr in ((allv[n + j], left), (allv[n + nb + j], right)):
            if abs(v - at) > 1e-6 * (1.0 + abs(at)):
                arr[k] = v
    return SampledField(values, left, right)


class TransportRates(NamedTuple):
    beta: SampledField
    mu: SampledField
    gamma: SampledField


class Violation(NamedTuple):
    kind: str
    detail: str


class _TransportBase:
    """Shared grid bookkeeping for the three transport models."""

    var = "s"

    @property
    def upper(self) -> float:
        raise NotImplementedError

    @property
    def breakpoints(self) -> tuple:
        return ()

    @cached_property
    def grid(self) -> Grid:
        return aligned_grid(0.0, self.upper, self.n_cells, self.breakpoints)

    @cached_property
    def cuts(self) -> tuple:
        return tuple(self.grid.index_of(b) for b in self.breakpoints)

    @cached_property
    def fertile_idx(self) -> tuple:
        lo, hi = self.fertile
        return self.grid.index_of(lo), self.grid.index_of(hi)

    def bindings(self, env: Environment) -> dict:
        return {"E1": env.e1, "E2": env.e2}

    @cached_property
    def _static_fields(self) -> dict:
        return {}

    def sample(self, fld: RateField, env: Environment) -> SampledField:
        """Sample a rate at ``env``; fields that ignore the environment are sampled once."""
        static = fld.variables <= {self.var}
        if static and id(fld) in self._static_fields:
            return self._static_fields[id(fld)]
        out = sample_field(fld, self.grid, self.var, self.breakpoints, **self.bindings(env))
        if static:
            self._static_fields[id(fld)] = out
        return out

    def integrate(self, values, lo_idx: int = 0, hi_idx: int | None = None) -> float:
        """Integral of node values (or a SampledField) split at breakpoints."""
        hi_idx = self.grid.n_cells if hi_idx is None else hi_idx
        return integrate_pieces(values, self.grid.h, lo_idx, hi_idx, self.cuts)

    def with_cells(self, n_cells: int):
        from dataclasses import replace
        return replace(self, n_cells=n_cells)


@dataclass(frozen=True)
class JuvenileAdultModel(_TransportBase):
    """Size-structured population with maturation at size ``l`` and maximal size ``m``.

    Rates are functions of ``s`` and the environment ``(E1, E2) = (J, A)``.
    """

    l: float
    m: float
    beta: RateField
    mu: RateField
    gamma: RateField
    n_cells: int = DEFAULT_CELLS

    kind = "juvenile-adult"

    def __post_init__(self):
        if not 0 < self.l < self.m < math.inf:
            raise ValueError(f"need 0 < l < m < inf, got l={self.l}, m={self.m}")
        for name in ("beta", "mu", "gamma"):
            object.__setattr__(self, name, rate(getattr(self, name)))

    @property
    def upper(self):
        return self.m

    @property
    def breakpoints(self):
        return (self.l,)

    @property
    def fertile(self):
        return (self.l, self.m)

    def bindings(self, env):
        return {"E1": env.e1, "E2": env.e2, "J": env.e1, "A": env.e2}

    def transport_rates(self, env: Environment) -> TransportRates:
        return TransportRates(self.sample(self.beta, env), self.sample(self.mu, env),
                              self.sample(self.gamma, env))


@dataclass(frozen=True)
class ConsumerResourceModel(_TransportBase):
    """Size-structured consumer feeding on an unstructured resource.

    Consumer rates and the feeding rate are functions of ``s`` and
    ``(E1, E2) = (P, Q)``; ``resource_growth`` is a function of ``Q``.
    """

    m: float
    beta: RateField
    mu: RateField
    gamma: RateField
    feeding: RateField
    resource_growth: RateField
    n_cells: int = DEFAULT_CELLS

    kind = "consumer-resource"

    def __post_init__(self):
        if not 0 < self.m < math.inf:
            raise ValueError(f"need 0 < m < inf, got m={self.m}")
        for name in ("beta", "mu", "gamma", "feeding", "resource_growth"):
            object.__setattr__(self, name, rate(getattr(self, name)))

    @property
    def upper(self):
        return self.m

    @property
    def fertile(self):
        return (0.0, self.m)

    def bindings(self, env):
        return {"E1": env.e1, "E2": env.e2, "P": env.e1, "Q": env.e2}

    def transport_rates(self, env: Environment) -> TransportRates:
        return TransportRates(self.sample(self.beta, env), self.sample(self.mu, env),
                              self.sample(self.gamma, env))

    def feeding_rate(self, env: Environment) -> SampledField:
        return self.sample(self.feeding, env)

    def growth(self, Q: float) -> float:
        return float(self.resource_growth.sample((), Q=Q, E2=Q))


@dataclass(frozen=True)
class EarlyHumanModel(_TransportBase):
    """Age-structured model with juvenile, adult and senescent stages.

    Mortality at age ``a`` is ``f_nat(a) + eta(a)*T + mu_sen(a)*S`` where the
    environment is ``(E1, E2) = (S, T)``; fertility ``beta(a)`` lives on
    ``[a_j, a_r]``.
    """

    a_j: float
    a_r: float
    a_max: float
    beta: RateField
    f_nat: RateField
    eta: RateField
    mu_sen: RateField
    n_cells: int = DEFAULT_CELLS

    kind = "early-human"
    var = "a"

    def __post_init__(self):
        if not 0 < self.a_j < self.a_r < self.a_max < math.inf:
            raise ValueError(f"need 0 < a_j < a_r < a_max, got {self.a_j}, {self.a_r}, {self.a_max}")
        for name in ("beta", "f_nat", "eta", "mu_sen"):
            object.__setattr__(self, name, rate(getattr(self, name)))

    @property
    def upper(self):
        return self.a_max

    @property
    def breakpoints(self):
        return (self.a_j, self.a_r)

    @property
    def fertile(self):
        return (self.a_j, self.a_r)

    def bindings(self, env):
        return {"E1": env.e1, "E2": env.e2, "S": env.e1, "T": env.e2}

    @cached_property
    def _age_maps(self):
        g, bp = self.grid, self.breakpoints
        return tuple(sample_field(f, g, "a", bp) for f in (self.beta, self.f_nat, self.eta, self.mu_sen))

    def transport_rates(self, env: Environment) -> TransportRates:
        beta, f_nat, eta, mu_sen = self._age_maps
        mu = f_nat + eta * env.e2 + mu_sen * env.e1
        return TransportRates(beta, mu, self._unit_gamma)

    @cached_property
    def _unit_gamma(self):
        return SampledField.continuous(np.ones(self.grid.n_cells + 1))


@dataclass(frozen=True)
class SelectionMutationModel:
    """Age and age-at-maturity structured population with mutation at birth.

    ``kernel`` is b(l, lhat); ``beta`` and ``mu`` are functions of
    ``(E1, E2) = (P, Q)``, ``lhat`` and ``a``.  Both axes use the same grid.
    """

    a_m: float
    kernel: RateField
    beta: RateField
    mu: RateField
    n_cells: int = 64

    kind = "selection-mutation"

    def __post_init__(self):
        if not 0 < self.a_m < math.inf:
            raise ValueError(f"need 0 < a_m < inf, got {self.a_m}")
        for name in ("kernel", "beta", "mu"):
            object.__setattr__(self, name, rate(getattr(self, name)))

    @cached_property
    def grid(self) -> Grid:
        return Grid(0.0, self.a_m, self.n_cells)

    def bindings(self, env):
        return {"E1": env.e1, "E2": env.e2, "P": env.e1, "Q": env.e2}

    def with_cells(self, n_cells: int):
        from dataclasses import replace
        return replace(self, n_cells=n_cells)


@dataclass(frozen=True)
class Density2D:
    """Nonnegative values on the square grid, indexed ``values[i_l, i_a]``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        n = self.grid.n_cells + 1
        if vals.shape != (n, n):
            raise ValueError(f"expected shape {(n, n)}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("density has non-finite values")
        object.__setattr__(self, "values", vals)

    def scaled(self, c: float) -> "Density2D":
        return Density2D(self.grid, c * self.values)


def _trapz_weights(n_cells: int, h: float) -> np.ndarray:
    w = np.full(n_cells + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def total_mass(u: Density2D) -> float:
    w = _trapz_weights(u.grid.n_cells, u.grid.h)
    return float(w @ u.values @ w)


def environment_ja(p: GridFn, model: JuvenileAdultModel) -> Environment:
    k = p.grid.index_of(model.l)
    n = p.grid.n_cells
    return Environment.clipped(integrate_segment(p.values, p.grid.h, 0, k),
                               integrate_segment(p.values, p.grid.h, k, n))


def environment_eh(p: GridFn, model: EarlyHumanModel) -> Environment:
    g = p.grid
    kj, kr = g.index_of(model.a_j), g.index_of(model.a_r)
    S = integrate_segment(p.values, g.h, kr, g.n_cells)
    T = integrate_pieces(p.values, g.h, 0, g.n_cells, (kj, kr))
    return Environment.clipped(S, T)


def environment_cr(p: GridFn, Q: float) -> Environment:
    return Environment.clipped(integrate_pieces(p.values, p.grid.h, 0, p.grid.n_cells), Q)


def environment_sm(u: Density2D, model: SelectionMutationModel | None = None) -> Environment:
    """(P, Q) = mass with a < l and mass with a > l, by tensor trapezoid."""
    g = u.grid
    n, h = g.n_cells, g.h
    vals = u.values
    # running trapezoid along a, per row
    cum = np.concatenate((np.zeros((n + 1, 1)),
                          np.cumsum(0.5 * h * (vals[:, 1:] + vals[:, :-1]), axis=1)), axis=1)
    rows = np.arange(n + 1)
    below = cum[rows, rows]
    above = cum[:, -1] - below
    w = _trapz_weights(n, h)
    return Environment.clipped(float(w @ below), float(w @ above))


def environment_of(model, state) -> Environment:
    """Environmental operator for any model that has one on its own state."""
    if isinstance(model, JuvenileAdultModel):
        return environment_ja(state, model)
    if isinstance(model, EarlyHumanModel):
        return environment_eh(state, model)
    if isinstance(model, SelectionMutationModel):
        return environment_sm(state, model)
    raise TypeError(f"{type(model).__name__} has no environmental operator on profiles alone")


_ENV_LATTICE = [Environment(a, b) for a in (0.0, 0.5, 1.0, 2.0, 5.0) for b in (0.0, 0.5, 1.0, 2.0, 5.0)]


def validate_model(model, environments=None, n_samples: int = 101) -> list:
    """Check model invariants on a lattice of (structure point, environment) samples.

    Returns a list of :class:`Violation`; an empty list means no problem was found.
    """
    envs = list(environments) if environments is not None else _ENV_LATTICE
    out: list = []
    seen: set = set()

    def flag(kind, detail):
        if kind not in seen:
            seen.add(kind)
            out.append(Violation(kind, detail))

    if isinstance(model, SelectionMutationModel):
        return _validate_sm(model, envs, flag, out)

    xs = np.linspace(0.0, model.upper, n_samples)
    var = model.var
    for env in envs:
        b = model.bindings(env)
        if isinstance(model, EarlyHumanModel):
            roles = {"beta": model.beta, "f_nat": model.f_nat, "eta": model.eta, "mu_sen": model.mu_sen}
        else:
            roles = {"beta": model.beta, "mu": model.mu, "gamma": model.gamma}
            if isinstance(model, ConsumerResourceModel):
                roles["feeding"] = model.feeding
        vals = {}
        for name, fld in roles.items():
            v = fld.sample(xs.shape, **{var: xs}, **b)
            vals[name] = v
            if not np.all(np.isfinite(v)):
                flag("NonFiniteRate", f"{name} is not finite at E=({env.e1}, {env.e2})")
            elif np.any(v < 0):
                i = int(np.argmin(v))
                flag("NegativeRate", f"{name}({var}={xs[i]:g}, E=({env.e1}, {env.e2})) = {v[i]:g} < 0")
        if "gamma" in vals and np.min(vals["gamma"]) <= GAMMA_FLOOR:
            i = int(np.argmin(vals["gamma"]))
            flag("GammaNotBoundedAway", f"gamma({var}={xs[i]:g}) = {vals['gamma'][i]:g}")
        lo, hi = model.fertile
        outside = (xs < lo - 1e-12) | (xs > hi + 1e-12)
        if np.any(vals["beta"][outside] != 0):
            flag("BetaOutsideFertileInterval", f"beta is nonzero outside [{lo}, {hi}]")
        if isinstance(model, JuvenileAdultModel):
            eps = 0.05 * (model.m - model.l)
            tail = np.linspace(model.m - eps, model.m, 21)
            bt = model.beta.sample(tail.shape, s=tail, **b)
            if not np.any(bt > 0):
                flag("BetaTailZero", f"beta vanishes on [{model.m - eps:g}, {model.m:g}] "
                                     f"at E=({env.e1}, {env.e2}); the semigroup is not irreducible")
    return out


def _validate_sm(model: SelectionMutationModel, envs, flag, out):
    fine = Grid(0.0, model.a_m, 2000)
    ls = fine.nodes
    from .numerics import simpson_weights
    w = simpson_weights(fine.n_cells, fine.h)
    for lhat in np.linspace(0.0, model.a_m, 21):
        col = model.kernel.sample(ls.shape, l=ls, lhat=lhat)
        if np.any(col < 0):
            flag("NegativeRate", f"kernel b(l, lhat={lhat:g}) has negative values")
        mass = float(w @ col)
        if abs(mass - 1.0) > 1e-8:
            flag("KernelNotDensity", f"integral of b(l, lhat={lhat:g}) over l is {mass:.12g}, not 1")
    grid = Grid(0.0, model.a_m, 40)
    L, A = np.meshgrid(grid.nodes, grid.nodes, indexing="ij")
    for env in envs:
        b = model.bindings(env)
        for name, fld in (("beta", model.beta), ("mu", model.mu)):
            v = fld.sample(L.shape, lhat=L, a=A, **b)
            if np.any(v < 0):
                flag("NegativeRate", f"{name} negative at E=({env.e1}, {env.e2})")
    return out
