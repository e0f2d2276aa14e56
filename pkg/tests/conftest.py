import numpy as np
import pytest

from magnetotherm import make_laws, zero_state
from magnetotherm.initial import random_state, smooth_state

from helpers import box


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid8():
    return box(8)


@pytest.fixture
def laws():
    return make_laws({"preset": "default"})


@pytest.fixture
def unit_laws():
    return make_laws({"preset": "unit"})


@pytest.fixture
def eq_state(grid8):
    return zero_state(grid8, 1.3, (0.0, 0.6, 0.8))


@pytest.fixture
def smooth8(grid8):
    return smooth_state(grid8, 0.05)


@pytest.fixture
def random8(grid8):
    return random_state(grid8, 0.05, rng=3)
