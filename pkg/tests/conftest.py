import numpy as np
import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_pair(rng, shape, scale=0.5):
    """Student/teacher map pair with entries in (-scale, scale)."""
    fs = rng.uniform(-scale, scale, shape)
    ft = rng.uniform(-scale, scale, shape)
    return fs, ft


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
