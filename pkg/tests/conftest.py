import math

import numpy as np
import pytest

from herglotz_enclosure.forward import solve
from herglotz_enclosure.geometry import CrackSet, PolygonalObstacle

SQUARE = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
L_CRACK = [[[-0.6, 0.4], [-0.6, -0.4], [0.5, -0.4]]]


@pytest.fixture(scope="session")
def square():
    return PolygonalObstacle([SQUARE], R=2.0)


@pytest.fixture(scope="session")
def square_solution(square):
    return solve(square, 1.0, (1.0, 0.0))


@pytest.fixture(scope="session")
def l_crack():
    return CrackSet(L_CRACK, R=2.0)


@pytest.fixture(scope="session")
def l_crack_solutions(l_crack):
    return {d: solve(l_crack, 1.0, d) for d in ((1.0, 0.0), (0.0, 1.0))}


def unit(theta):
    return (math.cos(theta), math.sin(theta))
