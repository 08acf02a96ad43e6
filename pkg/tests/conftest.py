import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_sim1():
    from stfnn.simgen import SimConfig, simulate

    return simulate(SimConfig(P=4, Q=6, seed=11))


@pytest.fixture(scope="session")
def small_sim2():
    from stfnn.simgen import SimConfig, simulate

    return simulate(SimConfig(P=4, Q=6, seed=12, scenario="dependency"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
