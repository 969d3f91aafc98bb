import numpy as np
import pytest

from isoflow.bodies import BodySpec, make_body
from isoflow.grid import build_grid

REFERENCE = {1: 256, 2: (64, 128)}
COARSE = {1: 128, 2: (32, 64)}


@pytest.fixture(scope="session")
def circle():
    return build_grid(1, REFERENCE[1])


@pytest.fixture(scope="session")
def sphere():
    return build_grid(2, REFERENCE[2])


@pytest.fixture(scope="session", params=[1, 2], ids=["S1", "S2"])
def grid(request, circle, sphere):
    return circle if request.param == 1 else sphere


def mild_ellipsoid_spec(n, a=1.15):
    if n == 2:
        M = np.diag([a * a, 1.0, 1.0 / (a * a)])
    else:
        M = np.diag([a * a, 1.0 / (a * a)])
    return BodySpec(n=n, kind="ellipsoid", M=tuple(map(tuple, M)))


def mild_ellipsoid(grid, a=1.15):
    return make_body(mild_ellipsoid_spec(grid.n, a), grid)


def direction(n):
    v = np.array([0.3, -0.5, 0.81][: n + 1])
    return v / np.linalg.norm(v)
