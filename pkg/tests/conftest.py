import numpy as np
import pytest

from lweid.cve import cve_keypair, cve_keygen
from lweid.fqcore import Params
from lweid.stern import stern_keypair, stern_keygen

TOY_A = [[1, 2], [3, 4], [5, 6], [0, 1]]
TOY_S = [1, 2]
TOY_E = [0, 1, 0, 0]


@pytest.fixture(scope="session")
def toy_params():
    return Params(n=4, m=2, q=7, sigma=1.0, rounds=1)


@pytest.fixture(scope="session")
def toy_stern(toy_params):
    return stern_keypair(TOY_A, TOY_S, TOY_E, toy_params)


@pytest.fixture(scope="session")
def toy_cve(toy_params):
    return cve_keypair(TOY_A, TOY_S, TOY_E, toy_params)


@pytest.fixture(scope="session")
def small_params():
    return Params(n=24, m=12, q=31, sigma=2.0, rounds=4)


@pytest.fixture(scope="session")
def default_params():
    return Params()


@pytest.fixture(scope="session")
def stern_keys(default_params):
    return stern_keygen(default_params, b"fixture-stern")


@pytest.fixture(scope="session")
def cve_keys(default_params):
    return cve_keygen(default_params, b"fixture-cve")


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)
