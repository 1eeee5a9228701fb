import math

import pytest

from dampho import dynamics
from dampho.model import FIGURE_PARAMS, ActionAngleState, PhaseState

ACCEPTANCE_LINES = []

TEN_PERIODS = (0.0, 20 * math.pi)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def figure_xv():
    return dynamics.integrate_xv(PhaseState(1.0, 0.0), FIGURE_PARAMS, TEN_PERIODS)


@pytest.fixture(scope="session")
def figure_aa():
    return dynamics.integrate_action_angle(ActionAngleState(0.0, 0.5), FIGURE_PARAMS,
                                           TEN_PERIODS)
