import pytest

from utils.params import default_ion_trap, noiseless as noiseless_params


@pytest.fixture
def defaults():
    return default_ion_trap()


@pytest.fixture
def noiseless():
    return noiseless_params()
