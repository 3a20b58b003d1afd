"""Command line interface: ``steadystate <command> --config FILE ...``.

Exit status is 0 on success, 1 when a mathematical hypothesis or solver
condition fails (a JSON report is printed on stdout), and 2 for usage and
configuration errors.  Data files contain no timestamps, so identical inputs
give byte-identical outputs.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import selmut
from .config import KINDS, Config, config_from_dict, load_config
from .errors import ConfigError, DomainError, NoCrossing, SolverError, VerificationFailed
from .fixedpoint import (SteadyStateResult, fixed_ray, route_for, solve_state_space,
                         solve_steady_state, steady_state_from_environment, verify_steady_state)
from .levelset import trace_zero_set
from .models import (ConsumerResourceModel, Density2D, Environment, JuvenileAdultModel,
                     SelectionMutationModel, total_mass)
from .numerics import Grid, GridFn
from .reproduction import net_reproduction, solve_scalar_system
from .spectral import (matrix_spectral_bound, resolvent_apply, resolvent_distance,
                       resolvent_identity_residual, spectral_bound)

logger = logging.getLogger("steadystate")

RESIDUAL_TOL = 1e-6
ODE_FACTOR = 10.0
METHODS = ("irreducible", "monotone", "scalar", "state-space")


def _plain(obj):
    """JSON-ready copy: numpy scalars and arrays become Python floats and lists."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, Environment):
        return [obj.e1, obj.e2]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _dump(doc, fh) -> None:
    json.dump(_plain(doc), fh, indent=2, sort_keys=True, allow_nan=True)
    fh.write("\n")


def _emit(doc, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            _dump(doc, fh)
    else:
        _dump(doc, sys.stdout)


def _model(cfg: Config, args):
    return cfg.build_model(getattr(args, "cells", None))


def _solver(cfg: Config, args, key: str, flag: str | None = None):
    val = getattr(args, flag or key, None)
    return val if val is not None else cfg.solver.get(key)


# profiles -----------------------------------------------------------------

def write_profile(path: Path, profile) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        x = profile.grid.nodes
        if isinstance(profile, Density2D):
            w.writerow(["l", "a", "value"])
            for i, li in enumerate(x):
                for j, aj in enumerate(x):
                    w.writerow([repr(float(li)), repr(float(aj)), repr(float(profile.values[i, j]))])
        else:
            w.writerow(["s", "value"])
            for xi, v in zip(x, profile.values):
                w.writerow([repr(float(xi)), repr(float(v))])


def read_profile(path: Path, grid: Grid):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    vals = np.array([float(r[-1]) for r in body])
    n = grid.n_cells + 1
    if header == ["l", "a", "value"]:
        if vals.size != n * n:
            raise ConfigError(f"{path}: expected {n * n} density rows, found {vals.size}")
        return Density2D(grid, vals.reshape(n, n))
    if header != ["s", "value"]:
        raise ConfigError(f"{path}: unrecognised profile header {header}")
    if vals.size != n:
        raise ConfigError(f"{path}: expected {n} profile rows, found {vals.size}")
    return GridFn(grid, vals)


# commands -----------------------------------------------------------------

def cmd_spectral_bound(args) -> int:
    cfg = load_config(args.config)
    model = _model(cfg, args)
    env = Environment(args.e1, args.e2)
    if isinstance(model, SelectionMutationModel):
        doc = {"bound": selmut.sm_spectral_bound(model, env), "method": "kernel-radius"}
    elif args.matrix:
        res = matrix_spectral_bound(model, env, model.grid.n_cells)
        doc = res._asdict()
    else:
        doc = spectral_bound(model, env, _solver(cfg, args, "tol") or 1e-12)._asdict()
    doc["environment"] = env
    _emit(doc, args.out)
    return 0


def cmd_net_reproduction(args) -> int:
    cfg = load_config(args.config)
    model = _model(cfg, args)
    env = Environment(args.e1, args.e2)
    if isinstance(model, SelectionMutationModel):
        value = selmut.reproduction_radius(model, env)
    else:
        value = net_reproduction(model, env)
    _emit({"R": value, "environment": env}, args.out)
    return 0


def _sigma_pair(model):
    """(sigma, locator, truncation allowed) used to trace the zero set for a model."""
    if isinstance(model, ConsumerResourceModel):
        f = lambda E: net_reproduction(model, E) - 1.0
        return f, None, True
    route = route_for(model)
    return route.sigma, route.locator, False


def cmd_trace_levelset(args) -> int:
    cfg = load_config(args.config)
    model = _model(cfg, args)
    rays = args.rays or cfg.solver["n_rays"]
    r_max = args.r_max or cfg.solver["r_max"]
    sigma, locator, trunc = _sigma_pair(model)
    curve = trace_zero_set(sigma, rays, r_max, 1e-12, locator=locator, allow_truncation=trunc)
    fh = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "rho", "e1", "e2", "sigma_residual"])
        for row in curve.rows():
            w.writerow([repr(float(v)) for v in row])
    finally:
        if args.out:
            fh.close()
    if curve.truncated:
        logger.warning("%d rays had no zero inside radius %g", len(curve.truncated), r_max)
    return 0


def _solve(model, cfg: Config, args, method: str) -> list:
    tol = _solver(cfg, args, "tol")
    rays = _solver(cfg, args, "n_rays", "rays")
    r_max = _solver(cfg, args, "r_max")
    if method == "scalar":
        if not isinstance(model, (JuvenileAdultModel, ConsumerResourceModel)):
            raise ConfigError("the scalar route covers juvenile-adult and consumer-resource models")
        res = solve_scalar_system(model, tol, rays, r_max)
        if not res.solutions:
            raise NoCrossing("the balance condition has no sign change along R = 1",
                             boundary_roots=[[e.e1, e.e2] for e in res.boundary_roots])
        out = []
        for sol in res.solutions:
            r = steady_state_from_environment(model, sol.environment, "scalar")
            r.diagnostics["flags"].extend(sol.flags)
            out.append(r)
        return out
    if isinstance(model, ConsumerResourceModel):
        raise ConfigError(f"method {method!r} does not apply to the consumer-resource model; use scalar")
    if method == "state-space":
        return [solve_state_space(model, None, cfg.solver["damping"], cfg.solver["max_iter"], tol, r_max)]
    return [solve_steady_state(model, method, tol, rays, r_max)]


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if args.model is not None and KINDS.get(args.model.strip().lower()) != cfg.kind:
        raise ConfigError(f"--model {args.model} does not match the configured kind {cfg.kind}")
    model = _model(cfg, args)
    default = "scalar" if isinstance(model, ConsumerResourceModel) else "irreducible"
    method = args.method or cfg.solver.get("method") or default
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    results = _solve(model, cfg, args, method)
    first = results[0]
    out = Path(args.out)
    profile_path = Path(args.profile) if args.profile else out.parent / "profile.csv"
    write_profile(profile_path, first.profile)
    g = first.profile.grid
    doc = {
        "model": cfg.kind,
        "method": method,
        "environment": first.environment,
        "scale": first.scale,
        "diagnostics": first.diagnostics,
        "config_echo": cfg.echo(),
        "profile_file": profile_path.name if profile_path.parent == out.parent else str(profile_path),
        "grid": {"lower": g.lower, "upper": g.upper, "n_cells": g.n_cells},
        "solutions": [{"environment": r.environment, "scale": r.scale} for r in results],
    }
    _emit(doc, str(out))
    return 0


def check_diagnostics(diag: dict, mass: float = 1.0) -> list:
    """Names of the residuals that exceed their tolerances."""
    bad = []
    for key in ("env_consistency", "sigma_at_env"):
        if not abs(diag[key]) <= RESIDUAL_TOL:
            bad.append(key)
    if not abs(diag["R_value"] - 1.0) <= RESIDUAL_TOL:
        bad.append("R_value")
    if not diag["boundary_residual"] <= RESIDUAL_TOL * (1.0 + mass):
        bad.append("boundary_residual")
    if not diag["ode_residual"] <= ODE_FACTOR * diag["h"]:
        bad.append("ode_residual")
    if "resource_residual" in diag and not diag["resource_residual"] <= RESIDUAL_TOL:
        bad.append("resource_residual")
    if "NotPositive" in diag.get("flags", []):
        bad.append("NotPositive")
    return bad


def cmd_verify(args) -> int:
    path = Path(args.result)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read result {path}: {exc}") from None
    cfg = load_config(args.config) if args.config else config_from_dict(doc["config_echo"])
    model = cfg.build_model(doc["grid"]["n_cells"])
    grid = model.grid
    profile = read_profile(path.parent / doc["profile_file"], grid)
    env = Environment(*doc["environment"])
    res = SteadyStateResult(env, doc["scale"], profile, {}, doc.get("method", ""))
    diag = verify_steady_state(model, res)
    if isinstance(profile, Density2D):
        mass = total_mass(Density2D(grid, np.abs(profile.values)))
    else:
        mass = float(model.integrate(np.abs(profile.values)))
    bad = check_diagnostics(diag, mass)
    if bad:
        if args.out:
            _emit({"passed": False, "failed": bad, "diagnostics": diag}, args.out)
        # the failure report on stdout carries the diagnostics, so stdout stays a single document
        raise VerificationFailed(f"residuals above tolerance: {', '.join(bad)}", passed=False,
                                 failed=bad, diagnostics=diag)
    _emit({"passed": True, "failed": bad, "diagnostics": diag}, args.out)
    return 0


def cmd_resolvent_check(args) -> int:
    cfg = load_config(args.config)
    model = _model(cfg, args)
    if isinstance(model, (SelectionMutationModel, ConsumerResourceModel)):
        raise ConfigError("resolvent-check applies to the juvenile-adult and early-human models")
    env = Environment(args.e1, args.e2)
    f = GridFn(model.grid, np.ones(model.grid.n_cells + 1))
    r = resolvent_apply(model, env, args.lam, f)
    doc = {
        "environment": env, "lam": args.lam, "h": model.grid.h,
        "resolvent_mass_of_one": model.integrate(r.values),
        "identity_residual": resolvent_identity_residual(model, env, args.lam, f),
    }
    if args.against is not None:
        other = Environment(*args.against)
        doc["against"] = other
        doc["distance"] = resolvent_distance(model, env, other, args.lam, args.probes)
    _emit(doc, args.out)
    return 0


def cmd_fixed_ray(args) -> int:
    text = Path(args.matrix_file).read_text(encoding="utf-8") if args.matrix_file else args.matrix
    if text is None:
        raise ConfigError("fixed-ray needs --matrix or --matrix-file")
    try:
        L = np.array(json.loads(text), dtype=float)
    except (ValueError, TypeError):
        try:
            L = np.loadtxt(text.splitlines(), ndmin=2)
        except ValueError as exc:
            raise ConfigError(f"cannot read the matrix: {exc}") from None
    res = fixed_ray(L, args.tol)
    _emit({"eigenvalue": res.eigenvalue, "ray": res.ray, "iterations": res.iterations,
           "residual": res.residual}, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="steadystate", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, env=False):
        sp.add_argument("--config", required=True, help="model configuration file")
        sp.add_argument("--cells", type=int, help="override [solver] n_cells")
        sp.add_argument("--out", help="output path (stdout when omitted)")
        if env:
            sp.add_argument("--e1", type=float, default=0.0)
            sp.add_argument("--e2", type=float, default=0.0)

    sp = sub.add_parser("spectral-bound", help="spectral bound at one environment")
    common(sp, env=True)
    sp.add_argument("--matrix", action="store_true", help="use the upwind matrix instead of K(lam) = 1")
    sp.add_argument("--tol", type=float)
    sp.set_defaults(func=cmd_spectral_bound)

    sp = sub.add_parser("net-reproduction", help="net reproduction number at one environment")
    common(sp, env=True)
    sp.set_defaults(func=cmd_net_reproduction)

    sp = sub.add_parser("trace-levelset", help="sample the zero set of the spectral bound as CSV")
    common(sp)
    sp.add_argument("--rays", type=int)
    sp.add_argument("--r-max", type=float)
    sp.set_defaults(func=cmd_trace_levelset)

    sp = sub.add_parser("solve", help="compute a positive steady state")
    sp.add_argument("--config", required=True)
    sp.add_argument("--model", help="expected model kind; must agree with the configuration")
    sp.add_argument("--method", choices=METHODS)
    sp.add_argument("--out", default="result.json")
    sp.add_argument("--profile", help="profile CSV path (default: profile.csv next to --out)")
    sp.add_argument("--cells", type=int)
    sp.add_argument("--rays", type=int)
    sp.add_argument("--r-max", type=float)
    sp.add_argument("--tol", type=float)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="recompute the residuals of a stored solution")
    sp.add_argument("--result", required=True)
    sp.add_argument("--config", help="use this configuration instead of the echoed one")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("resolvent-check", help="explicit resolvent diagnostics")
    common(sp, env=True)
    sp.add_argument("--lam", type=float, required=True)
    sp.add_argument("--against", type=float, nargs=2, metavar=("E1", "E2"),
                    help="second environment for the resolvent distance")
    sp.add_argument("--probes", type=int, default=16)
    sp.set_defaults(func=cmd_resolvent_check)

    sp = sub.add_parser("fixed-ray", help="invariant ray of a nonnegative matrix")
    sp.add_argument("--matrix", help="JSON nested list, e.g. '[[1,2],[3,4]]'")
    sp.add_argument("--matrix-file")
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fixed_ray)
    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SolverError as exc:
        _dump(exc.report(), sys.stdout)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, DomainError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())
