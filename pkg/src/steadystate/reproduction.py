"""Net reproduction numbers and the scalar steady-state route.

Positive steady states of the juvenile-adult and consumer-resource models are
in one-to-one correspondence with positive environment pairs solving two
scalar equations: ``R(E) = 1`` and a ratio (juvenile-adult) or resource
balance (consumer-resource) condition.  Both conditions are written in
cross-multiplied form so they stay finite on the axes.

The stable-size weight ``exp(-int (mu + gamma_s)/gamma)`` is evaluated as
``gamma(0)/gamma(s) * exp(-int mu/gamma)``, which is the same function and
does not need a derivative of gamma.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisViolated, NoOuterSignChange
from .levelset import LevelCurve, trace_zero_set
from .models import ConsumerResourceModel, Environment, JuvenileAdultModel
from .numerics import brent_root
from .spectral import CharacteristicFn, characteristic_value

logger = logging.getLogger(__name__)


def net_reproduction(model, env: Environment) -> float:
    return characteristic_value(model, env, 0.0)


def net_reproduction_ja(model: JuvenileAdultModel, env: Environment) -> float:
    return net_reproduction(model, env)


def net_reproduction_cr(model: ConsumerResourceModel, env: Environment) -> float:
    return net_reproduction(model, env)


def stable_weight(model, env: Environment):
    """gamma(0)/gamma(s) * exp(-int_0^s mu/gamma), as a SampledField."""
    K = CharacteristicFn(model, env)
    gamma = K.rates.gamma
    return gamma.values[0] / gamma * K.survival(0.0)


def ja_ratio_residual(model: JuvenileAdultModel, env: Environment) -> float:
    """J * int_l^m w - A * int_0^l w."""
    w = stable_weight(model, env)
    k = model.fertile_idx[0]
    N = model.integrate(w, 0, k)
    D = model.integrate(w, k, model.grid.n_cells)
    return env.e1 * D - env.e2 * N


def cr_balance_residual(model: ConsumerResourceModel, env: Environment) -> float:
    """P * int F w - Q f(Q) * int w."""
    w = stable_weight(model, env)
    N = model.integrate(w)
    D = model.integrate(model.feeding_rate(env) * w)
    return env.e1 * D - env.e2 * model.growth(env.e2) * N


@dataclass
class ScalarSolution:
    environment: Environment
    R_residual: float
    balance_residual: float
    flags: list = field(default_factory=list)


@dataclass
class ScalarSystemResult:
    solutions: list
    curve: LevelCurve = field(repr=False)
    boundary_roots: list = field(default_factory=list)


def _residual_fn(model):
    if isinstance(model, JuvenileAdultModel):
        return ja_ratio_residual
    if isinstance(model, ConsumerResourceModel):
        return cr_balance_residual
    raise TypeError(f"the scalar route covers juvenile-adult and consumer-resource models, "
                    f"not {type(model).__name__}")


def solve_scalar_system(model, tol: float = 1e-10, n_rays: int = 257,
                        r_max: float = 10.0) -> ScalarSystemResult:
    """All positive solutions of R(E) = 1 plus the ratio/balance condition.

    Traces R = 1 on a fan of rays, locates every sign change of the second
    residual between neighbouring samples and refines it in the ray angle.
    Consumer-resource level sets may leave the search box (R need not depend
    on Q); rays that do are dropped and reported on the curve as truncated.
    """
    residual = _residual_fn(model)
    R0 = net_reproduction(model, Environment(0.0, 0.0))
    if not R0 > 1.0:
        raise HypothesisViolated(f"R(0,0) = {R0:.6g} <= 1: no positive steady state is implied",
                                 R_origin=R0)
    level = lambda E: net_reproduction(model, E) - 1.0
    truncate = isinstance(model, ConsumerResourceModel)
    try:
        curve = trace_zero_set(level, n_rays, r_max, tol, allow_truncation=truncate)
    except NoOuterSignChange as exc:
        raise HypothesisViolated(f"R >= 1 at radius {r_max} on the ray theta={exc.details.get('theta')}",
                                 **exc.details) from exc
    if len(curve.samples) < 2:
        raise HypothesisViolated(f"the level set R = 1 does not cross the box of radius {r_max}",
                                 r_max=r_max)

    step = 0.5 * math.pi / (n_rays - 1)
    samples = curve.samples
    values = [residual(model, s.point) for s in samples]
    g = lambda theta: residual(model, curve.point_at(theta))
    thetas = []
    for i, (s, v) in enumerate(zip(samples, values)):
        if v == 0.0:
            thetas.append(s.theta)
        if i + 1 < len(samples):
            nxt, vn = samples[i + 1], values[i + 1]
            adjacent = nxt.theta - s.theta < 1.5 * step
            if adjacent and v != 0.0 and vn != 0.0 and (v > 0) != (vn > 0):
                thetas.append(brent_root(g, s.theta, nxt.theta, 1e-14))

    solutions, boundary = [], []
    scale_tol = 1e-12 * r_max
    for theta in thetas:
        E = curve.point_at(theta)
        if E.e1 <= scale_tol or E.e2 <= scale_tol:
            boundary.append(E)
            continue
        flags = []
        if isinstance(model, ConsumerResourceModel) and model.growth(E.e2) < 0:
            flags.append("NegativeResourceGrowth")
            logger.warning("solution %s has f(Q) < 0", E)
        solutions.append(ScalarSolution(E, abs(level(E)), abs(residual(model, E)), flags))
    return ScalarSystemResult(solutions, curve, boundary)
