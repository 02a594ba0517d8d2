import numpy as np
import pytest

from polariton2d.model import ModelParams
from polariton2d.protocol import build_context


@pytest.fixture(scope="session")
def fig3_params():
    return ModelParams(nu_x=1000.0, hopping_scale=5.0, delta=50.0, g=5.0, gamma=0.5)


@pytest.fixture(scope="session")
def fig4_params():
    return ModelParams(nu_x=1000.0, hopping_scale=5.0, delta=-50.0, g=5.0, gamma=0.0)


@pytest.fixture(scope="session")
def ctx_fig3(fig3_params):
    return build_context(fig3_params, n_ions=2, sector=True)


@pytest.fixture(scope="session")
def ctx_fig4(fig4_params):
    return build_context(fig4_params, n_ions=2, sector=True)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260818)
