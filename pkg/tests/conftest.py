import sys
import pytest
from pathlib import Path

# Add the project root directory to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from fsa_aoi.utils.models import (
    BipolarConfig,
    CellularConfig,
    ProtocolParams,
    QuadratureSpec,
    SimSpec,
)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="Run the acceptance-scale Monte Carlo tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale Monte Carlo run (enable with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# Common fixtures that can be used across test files
@pytest.fixture
def test_data_dir():
    """Return the path to the test data directory"""
    return project_root / 'tests' / 'data'


@pytest.fixture
def fig4_bipolar():
    """Bipolar network used throughout the bipolar numerical results"""
    return BipolarConfig(lam=1e-2, r=10.0, alpha=3.5, theta=1.0)


@pytest.fixture
def empty_bipolar():
    return BipolarConfig(lam=0.0, r=10.0, alpha=3.5, theta=1.0)


@pytest.fixture
def fsa_protocol():
    return ProtocolParams(eta=0.8, frame_size=3)


@pytest.fixture
def cellular_no_pc():
    """Density ratio 5, constant transmit power"""
    return CellularConfig(lambda_s=5e-3, lambda_d=1e-3, alpha=3.5, theta=1.0, epsilon=0.0)


@pytest.fixture
def cellular_full_inversion():
    return CellularConfig(lambda_s=5e-3, lambda_d=1e-3, alpha=3.5, theta=1.0, epsilon=1.0)


@pytest.fixture
def quad_spec():
    return QuadratureSpec()


@pytest.fixture
def small_sim():
    """A few short realizations, enough for wiring and invariants"""
    return SimSpec(num_realizations=4, slots_per_realization=3000, burn_in_successes=20)
