import numpy as np
import pytest

from superdir import ENDFIRE, ArrayGeometry, isotropic_coupling, make_sphere_grid

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def grid():
    return make_sphere_grid()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def linear_isotropic(m, spacing_wl):
    return isotropic_coupling(ArrayGeometry.linear(m, spacing_wl), ENDFIRE)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
