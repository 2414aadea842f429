import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "numerics", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("numerics")


@pytest.fixture(scope="session")
def quadratic_sym():
    from msq2.dispersion import make_symbol2d
    return make_symbol2d({"name": "quadratic"})


@pytest.fixture(scope="session")
def small_ops(quadratic_sym):
    from msq2.grid import Grid2D, Spectral2D
    return Spectral2D(Grid2D(128, 128, 16.0, 16.0), quadratic_sym)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
