import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sparse_compartments.simulate import SIR_X0, SIS_X0, integrate, make_sir, make_sis

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def sir_model():
    return make_sir(0.2, 0.1)


@pytest.fixture(scope="session")
def sir_traj(sir_model):
    return integrate(sir_model, SIR_X0, 100.0, 0.05, 1e-3, 1e-6)


@pytest.fixture(scope="session")
def sis_model():
    return make_sis()


@pytest.fixture(scope="session")
def sis_traj(sis_model):
    return integrate(sis_model, SIS_X0, 100.0, 0.05, 1e-3, 1e-6)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
