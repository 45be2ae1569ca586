import pytest

from helpers import two_village_params

from varw import compute_spectral


@pytest.fixture
def default_params():
    return two_village_params()


@pytest.fixture
def default_spectral(default_params):
    return compute_spectral(default_params)
