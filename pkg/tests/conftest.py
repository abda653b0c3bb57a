import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from geobouquet import Polytope

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def triangle_polytope():
    """Equilateral triangle with unit inradius centred at the origin."""
    angles = [math.pi / 2 + 2 * math.pi * k / 3 for k in range(3)]
    normals = [[math.cos(a), math.sin(a)] for a in angles]
    return Polytope(normals, [1.0, 1.0, 1.0])


def fagnano_points(P):
    """Midpoints of the triangle's edges, i.e. the feet of the inradius."""
    return [P.normals[j] * P.offsets[j] for j in range(3)]


@pytest.fixture
def unit_square():
    return Polytope.box([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def triangle():
    return triangle_polytope()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ---------------------------------------------------------------
# test_acceptance records one line per criterion here; the lines are printed at the
# end of the run so they show up without -s.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
