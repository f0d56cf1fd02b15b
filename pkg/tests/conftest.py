import math

import numpy as np
import pytest

from rimscatter.core import DishConfig, build_geometry

# filled by test_acceptance; echoed after the run so the lines survive output capture
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def geometry():
    return build_geometry(DishConfig())


@pytest.fixture(scope="session")
def quiescent_ones(geometry):
    return np.ones(geometry.n_elements, dtype=complex)


def deg(x):
    return math.radians(x)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
