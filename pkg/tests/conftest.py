import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from abp_lab.geometry import Disk, Rectangle, build_domain

# numerical properties: no wall-clock deadline (first calls compile kernels)
settings.register_profile(
    "numerics",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("numerics")


@pytest.fixture(scope="session")
def disk64():
    return build_domain(Disk(), 1 / 64)


@pytest.fixture(scope="session")
def square32():
    return build_domain(Rectangle(), 1 / 32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
