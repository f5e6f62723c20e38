import random

import pytest

from tlsaudit.orchestrator import ProbePolicy
from tlsaudit.registry import load_registry


@pytest.fixture(scope="session")
def db():
    return load_registry()


@pytest.fixture(scope="session")
def fast_policy():
    return ProbePolicy(timeout_s=3.0, delay_min_s=0.0, delay_max_s=0.0)


@pytest.fixture
def rng():
    return random.Random(0xA11CE)
