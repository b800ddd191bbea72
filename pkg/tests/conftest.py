"""Shared fixtures: frozen reference data and full-size ensemble runs.

The full-size runs reproduce the published operating points at the default
2000 trajectories and are shared session-wide by the acceptance tests; unit
tests never pull them, so a `-m "not acceptance"` run stays fast.
"""

import json
import pathlib
import time

import pytest

from liebpp.cli import _run_simulation, resolve_scenario
from liebpp.presets import preset_scenario

DATA_DIR = pathlib.Path(__file__).parent / "data"

ACCEPTANCE_REPORT = []

# Wall-clock seconds of each full-size ensemble run, keyed by preset name.
FIXTURE_WALL = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_REPORT:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_REPORT


@pytest.fixture(scope="session")
def frozen():
    with open(DATA_DIR / "frozen.json", encoding="utf-8") as fh:
        return json.load(fh)


def _full_run(preset_name):
    scenario = resolve_scenario(preset_scenario(preset_name))
    start = time.perf_counter()
    acc, spectrum = _run_simulation(scenario)
    FIXTURE_WALL[preset_name] = time.perf_counter() - start
    return scenario, acc, spectrum


@pytest.fixture(scope="session")
def fig3_run():
    return _full_run("fig3")


@pytest.fixture(scope="session")
def fig3_lowdrive_run():
    return _full_run("fig3-lowdrive")


@pytest.fixture(scope="session")
def fig4_run():
    return _full_run("fig4")


@pytest.fixture(scope="session")
def fig6_run():
    return _full_run("fig6")


@pytest.fixture(scope="session")
def fig8_run():
    return _full_run("fig8")


@pytest.fixture(scope="session")
def fig9_flat_run():
    return _full_run("fig9-flat")


@pytest.fixture(scope="session")
def fig9_dispersive_run():
    return _full_run("fig9-dispersive")


@pytest.fixture(scope="session")
def fig10_run():
    return _full_run("fig10")
