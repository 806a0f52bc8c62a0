import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

from pointdn.grid import build_grid  # noqa: E402


@pytest.fixture(scope="session")
def g41():
    return build_grid(41)


@pytest.fixture(scope="session")
def g81():
    return build_grid(81)


@pytest.fixture(scope="session")
def g161():
    return build_grid(161)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
