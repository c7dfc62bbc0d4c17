import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dgns.grid import GridSpec, random_field

settings.register_profile(
    "dgns", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("dgns")


@pytest.fixture(scope="session")
def grid16():
    return GridSpec(16)


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(32)


@pytest.fixture(scope="session")
def rough16(grid16):
    """Random field whose speed crosses several truncation levels."""
    return random_field(grid16, seed=7, energy=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
