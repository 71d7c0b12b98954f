import numpy as np
import pytest

from swivelsim.controller import ControlGains
from swivelsim.vehicle import VehicleParams


@pytest.fixture
def params():
    return VehicleParams()


@pytest.fixture
def gains():
    return ControlGains()


@pytest.fixture
def J_nominal(params):
    return params.nominal_inertia


@pytest.fixture
def rng():
    return np.random.default_rng(20240815)
