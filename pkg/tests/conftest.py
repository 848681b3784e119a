import math

import numpy as np
import pytest

from steady_vortex.domain import Disc, GreenOperator, build_domain

# lines printed in the terminal summary by the acceptance module
ACCEPTANCE_LINES: list[str] = []

# critical radius of the counter-rotating pair in the unit disc: a^4 + 4a^2 - 1 = 0
PAIR_RADIUS = math.sqrt(math.sqrt(5.0) - 2.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def disc128():
    return build_domain(Disc((0.0, 0.0), 1.0), 128)


@pytest.fixture(scope="session")
def fd128(disc128):
    return GreenOperator(disc128)


@pytest.fixture(scope="session")
def exact128(disc128):
    return GreenOperator(disc128, "analytic-disc")


@pytest.fixture(scope="session")
def disc256():
    return build_domain(Disc((0.0, 0.0), 1.0), 256)


@pytest.fixture(scope="session")
def fd256(disc256):
    return GreenOperator(disc256)


def random_disc_points(rng, n, rmax=0.8):
    ang = rng.uniform(0, 2 * np.pi, n)
    rad = rmax * np.sqrt(rng.uniform(0, 1, n))
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
