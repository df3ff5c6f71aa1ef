import numpy as np
import pytest

from proxisense import default_params


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
