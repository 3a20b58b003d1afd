"""Shared models, CLI helpers and the per-criterion acceptance report."""
from __future__ import annotations

import json
from pathlib import Path

import pytest

from steadystate import (ConsumerResourceModel, EarlyHumanModel, JuvenileAdultModel,
                         SelectionMutationModel)
from steadystate.cli import run_command

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

JA_BETA = "3*indicator(1, 2, s)/(1 + E1 + E2)"


def ja_const(n_cells: int = 2000, beta: str = JA_BETA) -> JuvenileAdultModel:
    return JuvenileAdultModel(l=1.0, m=2.0, beta=beta, mu="0", gamma="1", n_cells=n_cells)


def cr_const(n_cells: int = 400) -> ConsumerResourceModel:
    return ConsumerResourceModel(m=1.0, beta="3/(1 + E1)", mu="0", gamma="1", feeding="1",
                                 resource_growth="3 - Q", n_cells=n_cells)


def eh_const(n_cells: int = 2000) -> EarlyHumanModel:
    return EarlyHumanModel(a_j=1.0, a_r=2.0, a_max=3.0, beta="3*indicator(1, 2, a)", f_nat="0",
                           eta="1", mu_sen="indicator(0, 1, a)", n_cells=n_cells)


def sm_unif(n_cells: int = 64, beta: str = "3/(1 + E1 + E2)", kernel: str = "0.5") -> SelectionMutationModel:
    return SelectionMutationModel(a_m=2.0, kernel=kernel, beta=beta, mu="0", n_cells=n_cells)


@pytest.fixture(scope="session")
def ja():
    return ja_const()


@pytest.fixture(scope="session")
def ja_linear():
    """Juvenile-adult rates without the density factor: beta = 3 on [1, 2]."""
    return ja_const(beta="3*indicator(1, 2, s)")


@pytest.fixture(scope="session")
def cr():
    return cr_const()


@pytest.fixture(scope="session")
def eh():
    return eh_const()


@pytest.fixture(scope="session")
def sm():
    return sm_unif()


class CliRuns:
    """Runs ``solve`` once per (config, method) and keeps the output files."""

    def __init__(self, base: Path):
        self.base = base
        self._cache: dict = {}

    def solve(self, config: str, method: str):
        key = (config, method)
        if key not in self._cache:
            out = self.base / f"{Path(config).stem}-{method}" / "result.json"
            out.parent.mkdir(parents=True, exist_ok=True)
            code = run_command(["solve", "--config", str(CONFIGS / config), "--method", method,
                                "--out", str(out)])
            doc = json.loads(out.read_text()) if out.exists() else None
            self._cache[key] = (code, out, doc)
        return self._cache[key]


@pytest.fixture(scope="session")
def cli_runs(tmp_path_factory):
    return CliRuns(tmp_path_factory.mktemp("cli"))


# Acceptance bookkeeping: tests marked ``criterion(n, "title")`` roll up into
# one PASS/FAIL line per criterion at the end of the session.

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number = mark.args[0]
    title = mark.args[1] if len(mark.args) > 1 else ""
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "failed": []})
    if rep.failed or (rep.when == "call" and rep.skipped):
        entry["ok"] = False
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] else "FAIL"
        line = f"criterion {number:2d}  {status}  {entry['title']}"
        if entry["failed"]:
            line += f"  (failed: {', '.join(entry['failed'])})"
        terminalreporter.write_line(line)
