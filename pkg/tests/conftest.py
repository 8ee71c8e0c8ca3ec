import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from plugnorm.nn.unet import UNetConfig, build_unet

settings.register_profile("default", max_examples=25, deadline=None)
settings.register_profile(
    "thorough", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale convergence tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return UNetConfig(base_width=2, depth=4)


@pytest.fixture
def tiny_net(tiny_config):
    return build_unet(tiny_config, seed=0, dtype=np.float64)
