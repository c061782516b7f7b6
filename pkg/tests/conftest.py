import numpy as np
import pytest

from tikit import GridFunction


# one line per acceptance criterion, printed after the run so the pass/fail
# verdicts survive pytest's output capturing
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20260824)


def random_grid(rng, width, height, channels=1, scale=1.0):
    n = width * height * channels
    return GridFunction(width, height, channels,
                        scale * rng.standard_normal(n))
