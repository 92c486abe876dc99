import numpy as np
import pytest

from viscwave import symbols


@pytest.fixture(scope="session")
def free_symbol():
    return symbols.make_free()


@pytest.fixture(scope="session")
def shear_symbol():
    return symbols.make_shear(0.3)


@pytest.fixture(scope="session")
def two_param_symbol():
    return symbols.make_two_param(0.3, 0.1, 0.7)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
