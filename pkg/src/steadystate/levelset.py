"""Tracing the zero set of a sign-changing function on the positive quadrant.

The zero set is sampled on a fan of rays from the origin.  On each ray the
function is scanned outward from the origin and the first sign-change cell is
refined, so the sample is the innermost zero on that ray.  When the function
decreases along every ray the innermost zero is the only one and the traced
curve is a homeomorphic image of the simplex x + y = 1.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import BadOrigin, NoBracket, NoOuterSignChange
from .models import Environment
from .numerics import brent_root

logger = logging.getLogger(__name__)

HALF_PI = 0.5 * math.pi
SCAN_STEPS = 64
DEFAULT_RAYS = 257


def direction(theta: float) -> tuple:
    if theta == 0.0:
        return 1.0, 0.0
    if theta == HALF_PI:
        return 0.0, 1.0
    return math.cos(theta), math.sin(theta)


def point_on_ray(theta: float, rho: float) -> Environment:
    c, s = direction(theta)
    return Environment.clipped(rho * c, rho * s)


def theta_of_simplex(t: float) -> float:
    """Angle of the ray through (1 - t, t)."""
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return HALF_PI
    return math.atan2(t, 1.0 - t)


def simplex_of_theta(theta: float) -> float:
    c, s = direction(theta)
    return s / (c + s)


@dataclass(frozen=True)
class Ray:
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= HALF_PI:
            raise ValueError(f"ray angle {self.theta} outside [0, pi/2]")

    @property
    def direction(self) -> tuple:
        return direction(self.theta)


@dataclass(frozen=True)
class SimplexPoint:
    """The point (1 - t, t) of the unit simplex."""

    t: float
    boundary: bool = False

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"simplex coordinate {self.t} outside [0, 1]")

    @property
    def point(self) -> tuple:
        return 1.0 - self.t, self.t


class CurveSample(NamedTuple):
    theta: float
    rho: float
    point: Environment
    sigma_residual: float


@dataclass
class LevelCurve:
    """Angle-ordered samples of a zero set, plus what is needed to refine it."""

    samples: list
    r_max: float
    tol: float
    locator: Optional[Callable] = field(default=None, repr=False)
    sigma: Optional[Callable] = field(default=None, repr=False)
    branch: int = 0
    truncated: list = field(default_factory=list)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([s.theta for s in self.samples])

    @property
    def rhos(self) -> np.ndarray:
        return np.array([s.rho for s in self.samples])

    def point_at(self, theta: float) -> Environment:
        """Curve point on the ray at ``theta``: solved exactly when possible."""
        for s in self.samples:
            if s.theta == theta:
                return s.point
        if self.locator is None:
            return project_to_curve(point_on_ray(theta, 1.0), self)
        rho = bracket_on_ray(self.locator, theta, self.r_max, self.tol,
                             all_roots=self.branch > 0)
        if self.branch > 0:
            rho = rho[self.branch]
        return point_on_ray(theta, rho)

    def rows(self):
        for s in self.samples:
            yield s.theta, s.rho, s.point.e1, s.point.e2, s.sigma_residual


def bracket_on_ray(sigma: Callable[[Environment], float], theta: float, r_max: float,
                   tol: float = 1e-12, all_roots: bool = False, steps: int = SCAN_STEPS):
    """Radius of the innermost zero of ``sigma`` on the ray at ``theta``.

    Scans outward in steps of ``r_max / steps`` and refines the first cell with
    a sign change by Brent's bracketed method.  With ``all_roots`` every sign-change cell found by the scan
    is refined and the list of radii is returned.
    """
    f = lambda rho: sigma(point_on_ray(theta, rho))
    f0 = f(0.0)
    if not f0 > 0:
        raise BadOrigin(f"sigma at the origin is {f0}, must be positive", theta=theta, value=f0)
    fmax = f(r_max)
    if fmax >= 0 and not all_roots:
        raise NoOuterSignChange(f"sigma is {fmax} >= 0 at radius {r_max} on the ray theta={theta}",
                                theta=theta, r_max=r_max, value=fmax)
    roots = []
    step = r_max / steps
    prev_r, prev_f = 0.0, f0
    for k in range(1, steps + 1):
        r = r_max if k == steps else k * step
        fr = fmax if k == steps else f(r)
        if (prev_f > 0) != (fr > 0):
            flat = abs(prev_f) < tol and abs(fr) < tol
            if not flat and abs(fr) < tol and r < r_max:
                # sigma vanishes at the cell end; zero on the next cell too means a plateau
                flat = abs(f(min(r + step, r_max))) < tol
            if flat:
                logger.warning("sigma is flat near zero on [%g, %g] along theta=%g; "
                               "the zero is not isolated", prev_r, r, theta)
            try:
                root = brent_root(f, prev_r, r, tol)
            except NoBracket:
                root = prev_r if prev_f == 0 else r
            if not all_roots:
                return root
            roots.append(root)
        prev_r, prev_f = r, fr
    if not roots:
        raise NoOuterSignChange(f"no sign change of sigma on the ray theta={theta}",
                                theta=theta, r_max=r_max, value=fmax)
    return roots


def trace_zero_set(sigma: Callable[[Environment], float], n_rays: int = DEFAULT_RAYS,
                   r_max: float = 10.0, tol: float = 1e-12, *,
                   locator: Optional[Callable[[Environment], float]] = None,
                   branch: int = 0, allow_truncation: bool = False) -> LevelCurve:
    """Sample the zero set of ``sigma`` on ``n_rays`` rays spanning the quadrant.

    ``locator`` may be any function with the same sign as ``sigma`` everywhere
    (hence the same zero set); it is used for scanning and root refinement while
    ``sigma`` itself is only evaluated at the final samples.  With
    ``allow_truncation`` rays without an outer sign change inside ``r_max`` are
    skipped and listed in ``truncated`` instead of raising.
    """
    if n_rays < 2:
        raise ValueError("need at least two rays")
    find = locator or sigma
    samples, truncated = [], []
    for i in range(n_rays):
        theta = HALF_PI if i == n_rays - 1 else i * HALF_PI / (n_rays - 1)
        try:
            rho = bracket_on_ray(find, theta, r_max, tol, all_roots=branch > 0)
        except NoOuterSignChange as exc:
            if not allow_truncation:
                exc.details["theta"] = theta
                raise
            truncated.append(theta)
            continue
        if branch > 0:
            if len(rho) <= branch:
                raise NoOuterSignChange(f"ray theta={theta} has only {len(rho)} zeros, branch {branch} requested",
                                        theta=theta)
            rho = rho[branch]
        pt = point_on_ray(theta, rho)
        samples.append(CurveSample(theta, rho, pt, float(sigma(pt))))
    if truncated:
        logger.warning("%d of %d rays leave the box of radius %g without a sign change",
                       len(truncated), n_rays, r_max)
    return LevelCurve(samples, r_max, tol, locator=find, sigma=sigma, branch=branch,
                      truncated=truncated)


def count_zeros(sigma: Callable[[Environment], float], theta: float, r_max: float,
                tol: float = 1e-12) -> int:
    return len(bracket_on_ray(sigma, theta, r_max, tol, all_roots=True))


def project_to_curve(point: Environment, curve: LevelCurve) -> Environment:
    """Curve point on the ray through ``point``, interpolating rho linearly in theta."""
    if point.e1 == 0 and point.e2 == 0:
        raise ValueError("cannot project the origin along a ray")
    theta = HALF_PI if point.e1 == 0 else math.atan2(point.e2, point.e1)
    thetas, rhos = curve.thetas, curve.rhos
    hit = np.nonzero(thetas == theta)[0]
    rho = float(rhos[hit[0]]) if hit.size else float(np.interp(theta, thetas, rhos))
    return point_on_ray(theta, rho)
