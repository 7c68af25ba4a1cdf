import pytest

from hmflow.spectral import compute_constants, make_basis
from hmflow.stationary import solve_stationary


@pytest.fixture(scope="session")
def c8():
    return compute_constants(8)


@pytest.fixture(scope="session")
def basis8(c8):
    return make_basis(c8, 32)


@pytest.fixture(scope="session")
def U8(c8):
    return solve_stationary(c8)
