import numpy as np
import pytest

from kraichnan import parallel


@pytest.fixture(autouse=True)
def _single_thread():
    parallel.set_threads(1)
    yield
    parallel.set_threads(1)


def within_se(value, target, se, k=3.0):
    return abs(value - target) <= k * se


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
