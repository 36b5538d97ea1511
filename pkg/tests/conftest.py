import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from weakbound import kernels

settings.register_profile(
    "weakbound",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("weakbound")


@pytest.fixture(scope="session", autouse=True)
def _compile_kernels():
    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
