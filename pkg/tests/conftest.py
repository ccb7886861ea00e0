from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from superatom import LeakageTables, PhysicalParams, build_model

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def tables() -> LeakageTables:
    return LeakageTables.bundled()


@pytest.fixture(scope="session")
def experimental_model():
    return build_model(PhysicalParams(T=0.25, sigma=4.6))


@pytest.fixture(scope="session")
def optimized_model():
    return build_model(PhysicalParams(T=0.5, sigma=4.3))


def small_tables(n_max: int = 2, seed: int = 1) -> LeakageTables:
    """Random but well-scaled table for fast checks."""
    rng = np.random.default_rng(seed)
    return LeakageTables(
        n_max,
        beta=rng.uniform(-0.8, 0.8, (n_max + 1, n_max)),
        delta_s_raw=np.geomspace(8e-2, 1e-3, n_max),
        gamma_s_raw=np.geomspace(1e-1, 1e-3, n_max),
    )


@pytest.fixture
def small_model():
    return build_model(PhysicalParams(n_max=2, T=0.25, sigma=4.6), small_tables())
