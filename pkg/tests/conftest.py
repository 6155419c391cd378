import numpy as np
import pytest
from hypothesis import settings

from gcf_lab.constants import FlowParams, derive_constants
from gcf_lab.shrinker import round_profile, solve_shrinker_curve
from gcf_lab.spectrum import eig_L

settings.register_profile("repo", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def consts01():
    return derive_constants(FlowParams(2, 0.1))


@pytest.fixture(scope="session")
def round01():
    return round_profile(0.1, N=128)


@pytest.fixture(scope="session")
def threefold():
    return solve_shrinker_curve(0.1, 3, N=128)


@pytest.fixture(scope="session")
def spec_round(round01):
    return eig_L(round01)


@pytest.fixture(scope="session")
def spec_threefold(threefold):
    return eig_L(threefold)


@pytest.fixture(scope="session")
def zero_seed_round(round01, consts01, spec_round):
    from gcf_lab.linearized import picard_zero_seed

    return picard_zero_seed(round01, consts01, spec_round, 8.0, 0.55)


@pytest.fixture(scope="session")
def zero_seed_threefold(threefold, consts01, spec_threefold):
    from gcf_lab.linearized import picard_zero_seed

    # beta+_3 = 0.4696 caps the first window above 3 sigma - 2 = 0.4
    return picard_zero_seed(threefold, consts01, spec_threefold, 8.0, 0.45, ds=0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
