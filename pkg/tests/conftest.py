import pytest

from smallnoise.gp_cov import CovarianceModel, GridSpec


@pytest.fixture
def bm():
    return CovarianceModel("FractionalBM", 0.5)


@pytest.fixture
def grid_fine():
    return GridSpec(1.0, 2048)
