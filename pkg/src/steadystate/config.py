"""Configuration documents: an INI file with ``[model]``, ``[rates]`` and ``[solver]``.

Example::

    [model]
    kind = juvenile-adult
    l = 1
    m = 2

    [rates]
    beta = 3*indicator(1, 2, s)/(1 + E1 + E2)
    mu = 0
    gamma = 1

    [solver]
    method = irreducible
    n_cells = 2000

Rates are expressions in the language of :mod:`expr`.  Transport models use
``s`` (``a`` for the early-human model) and ``E1, E2`` or the model's own names
(J, A / P, Q / S, T).  Selection-mutation rates use ``lhat`` (also ``l``) and
``a``; its kernel uses ``l`` and ``lhat``.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import ConfigError, ParseError
from .expr import parse_rate_expression
from .models import (ConsumerResourceModel, EarlyHumanModel, JuvenileAdultModel,
                     SelectionMutationModel)

KINDS = {
    "juvenile-adult": "juvenile-adult", "ja": "juvenile-adult",
    "consumer-resource": "consumer-resource", "cr": "consumer-resource",
    "early-human": "early-human", "eh": "early-human",
    "selection-mutation": "selection-mutation", "sm": "selection-mutation", "selmut": "selection-mutation",
}

SPEC = {
    "juvenile-adult": (JuvenileAdultModel, ("l", "m"), ("beta", "mu", "gamma")),
    "consumer-resource": (ConsumerResourceModel, ("m",), ("beta", "mu", "gamma", "feeding", "resource_growth")),
    "early-human": (EarlyHumanModel, ("a_j", "a_r", "a_max"), ("beta", "f_nat", "eta", "mu_sen")),
    "selection-mutation": (SelectionMutationModel, ("a_m",), ("kernel", "beta", "mu")),
}

SOLVER_DEFAULTS = {
    "method": None, "n_cells": None, "n_rays": 257, "r_max": 10.0, "tol": 1e-10,
    "damping": 0.5, "max_iter": 500,
}
_SOLVER_TYPES = {"method": str, "n_cells": int, "n_rays": int, "r_max": float, "tol": float,
                 "damping": float, "max_iter": int}


@dataclass
class Config:
    kind: str
    constants: dict
    rates: dict
    solver: dict = field(default_factory=dict)

    def build_model(self, n_cells: int | None = None):
        cls, _, _ = SPEC[self.kind]
        kwargs = dict(self.constants)
        kwargs.update(self.rates)
        cells = n_cells or self.solver.get("n_cells")
        if cells:
            kwargs["n_cells"] = int(cells)
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"invalid {self.kind} model: {exc}") from exc

    def echo(self) -> dict:
        return {"model": {"kind": self.kind, **self.constants}, "rates": dict(self.rates),
                "solver": {k: v for k, v in self.solver.items() if v is not None}}


def _number(section: str, key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {text!r} is not a number") from None


def config_from_dict(doc: dict) -> Config:
    """Build a Config from section -> key -> value mappings (e.g. a JSON echo)."""
    model = {k: v for k, v in (doc.get("model") or {}).items()}
    if "kind" not in model:
        raise ConfigError("[model] needs a 'kind' entry")
    kind = KINDS.get(str(model.pop("kind")).strip().lower())
    if kind is None:
        raise ConfigError(f"unknown model kind; expected one of {', '.join(sorted(set(KINDS)))}")
    _, const_names, rate_names = SPEC[kind]
    constants = {}
    for name in const_names:
        if name not in model:
            raise ConfigError(f"[model] is missing the constant {name!r} for a {kind} model")
        constants[name] = _number("model", name, str(model.pop(name)))
    if model:
        raise ConfigError(f"[model] has unknown keys: {', '.join(sorted(model))}")
    rates_in = dict(doc.get("rates") or {})
    rates = {}
    for name in rate_names:
        if name not in rates_in:
            raise ConfigError(f"[rates] is missing {name!r} for a {kind} model")
        text = str(rates_in.pop(name))
        try:
            parse_rate_expression(text)
        except ParseError as exc:
            raise ParseError(f"[rates] {name}: {exc.reason}", exc.position, exc.expected) from None
        rates[name] = text
    if rates_in:
        raise ConfigError(f"[rates] has unknown keys: {', '.join(sorted(rates_in))}")
    solver = dict(SOLVER_DEFAULTS)
    for key, value in (doc.get("solver") or {}).items():
        if key not in _SOLVER_TYPES:
            raise ConfigError(f"[solver] has unknown key {key!r}")
        try:
            solver[key] = _SOLVER_TYPES[key](value)
        except ValueError:
            raise ConfigError(f"[solver] {key} = {value!r} has the wrong type") from None
    return Config(kind, constants, rates, solver)


def parse_config(text: str) -> Config:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    return config_from_dict({s: dict(cp.items(s)) for s in cp.sections()})


def load_config(path) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
