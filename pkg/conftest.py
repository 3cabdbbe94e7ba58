"""
Gemeinsame pytest-Fixtures
Jeder Test läuft im float64-Modus (exakte Äquivarianz, Gradient-Checks); langsame Läufe nur mit --runslow.
"""
import numpy as np
import pytest

from rangeloop.config import precision
from rangeloop.schemas.profile_schema import get_profile


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run desk-scale learning and full-profile throughput tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance run (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def float64_mode():
    with precision("float64") as dtype:
        yield dtype


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_profile():
    return get_profile("tiny")
