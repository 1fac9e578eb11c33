import numpy as np
import pytest

from bertrand_mfg import Discretization, ModelParams, picard_solve


@pytest.fixture(scope="session")
def default_params():
    return ModelParams()


@pytest.fixture(scope="session")
def default_solution(default_params):
    """Default problem at the default resolution (200 x 400)."""
    return picard_solve(default_params, Discretization())


@pytest.fixture(scope="session")
def coarse_solution(default_params):
    return picard_solve(default_params, Discretization(Nx=50, Nt=100))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
