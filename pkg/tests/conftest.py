import numpy as np
import pytest

from degfusion.models import ParisModel, TimeGrid
from degfusion.reference import PARIS_NOMINAL, paris_model


@pytest.fixture(scope="session")
def crack_model():
    return paris_model()


@pytest.fixture(scope="session")
def crack_nominal():
    return PARIS_NOMINAL.copy()


@pytest.fixture(scope="session")
def coarse_crack_model():
    # Same physics on a 500-cycle grid; cheap enough for tight loops.
    return ParisModel(TimeGrid.regular(0, 120_500, 500), cap=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
