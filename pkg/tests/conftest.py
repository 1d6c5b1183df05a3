import numpy as np
import pytest

from radialchaos.eigen import calibrate_inversion
from radialchaos.model import build_model


@pytest.fixture(scope="session")
def h3():
    model = build_model("hyperbolic", 3)
    calibrate_inversion(model)
    return model


@pytest.fixture(scope="session")
def h2():
    model = build_model("hyperbolic", 2)
    calibrate_inversion(model)
    return model


@pytest.fixture(scope="session")
def h3_raw():
    """Uncalibrated H^3 model (never calibrate this one)."""
    return build_model("hyperbolic", 3, grid_size=1024)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
