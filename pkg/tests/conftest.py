"""Shared fixtures: expensive runs are computed once per session."""

from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

from burgers_vlasov.driver import run
from burgers_vlasov.scenarios import preset

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def coupled_traj():
    return run(preset("coupled_bump"))


@pytest.fixture(scope="session")
def shock_traj():
    return run(preset("riemann_pure_fluid"))


@pytest.fixture(scope="session")
def expansion_traj():
    return run(preset("expansion_pure_fluid"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
