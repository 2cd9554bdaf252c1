import numpy as np
import pytest

from pberg import build_quadrature, disk


@pytest.fixture(scope="session")
def unit_rule():
    return build_quadrature(disk(1.0), 32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for r in RESULTS:
            terminalreporter.write_line(r.line)
