import numpy as np
import pytest

from wass.measures import DiscreteMeasure


def line(points, weights):
    """Measure on the real line."""
    return DiscreteMeasure(np.asarray(points, float)[:, None], np.asarray(weights, float))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
