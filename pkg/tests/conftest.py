import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import vesselwss as vw

settings.register_profile(
    "suite",
    max_examples=40,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

Y_ANGLE_DEG = 50.0
Y_SPLIT = np.array([0.0, 0.0, 15.0])


def yjunction_seeds():
    half = np.deg2rad(Y_ANGLE_DEG) / 2.0
    d_a = np.array([np.sin(half), 0.0, np.cos(half)])
    d_b = np.array([-np.sin(half), 0.0, np.cos(half)])
    source = (0.0, 0.0, 1.0)
    return source, [tuple(Y_SPLIT + 10.0 * d_a), tuple(Y_SPLIT + 10.0 * d_b)]


@pytest.fixture(scope="session")
def cylinder():
    return vw.make_cylinder_mesh(3.0, 40.0, 64, 128)


@pytest.fixture(scope="session")
def cylinder_centerline(cylinder):
    return vw.extract_centerline(cylinder, (0, 0, 0), (0, 0, 40), spacing=0.5)


@pytest.fixture(scope="session")
def yjunction():
    return vw.make_y_junction_mesh(3.0, 2.2, 2.2, Y_ANGLE_DEG, pitch=0.4)


@pytest.fixture(scope="session")
def yjunction_centerline(yjunction):
    source, targets = yjunction_seeds()
    return vw.extract_centerline(yjunction, source, targets, spacing=0.5)
