import pytest

from bvp.models import MultistartConfig
from model.builtins import build_builtin


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run Monte Carlo recovery tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def ou():
    return build_builtin('ou1d', {'alpha': 1.0, 'beta': 0.5, 'gamma': 1.0, 'yhat0': 0.3})


@pytest.fixture
def langevin():
    return build_builtin('langevin')


@pytest.fixture
def heisenberg():
    return build_builtin('heisenberg')


@pytest.fixture
def heisenberg_xz():
    return build_builtin('heisenberg', {'projection': 'xz'})


@pytest.fixture
def small_multistart():
    return MultistartConfig(n_sobol=16, n_normal=16)
