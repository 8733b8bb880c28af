import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# jit compilation of the inner loops can eat a whole hypothesis deadline
settings.register_profile(
    "gcb",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("gcb")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
