import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

from fitted_fvm.experiments import test_problem  # noqa: E402
from fitted_fvm.model import MarketModel  # noqa: E402


@pytest.fixture
def tp1():
    return test_problem(1)


@pytest.fixture
def tp1_model():
    return MarketModel(sigma=0.3, r=0.1, d=0.04, p_m=400.0)
