import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kicqed.circuit import load_device

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

TABLE_DEVICES = [f"q{k}" for k in range(1, 10)]


@pytest.fixture(scope="session")
def q7():
    return load_device("q7")


@pytest.fixture(scope="session")
def q6():
    return load_device("q6")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
