import warnings
from functools import lru_cache

import pytest

from semilinear_tikhonov.manufactured import build_problem
from semilinear_tikhonov.nonlinearity import NonMonotoneWarning


@lru_cache(maxsize=None)
def cached_problem(name, n_cells, beta=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonMonotoneWarning)
        return build_problem(name, n_cells, beta)


@pytest.fixture(scope="session")
def sin64():
    return cached_problem("section7-sin", 64)


@pytest.fixture(scope="session")
def sin_fine():
    return cached_problem("section7-sin", 1024)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (int(k.split()[0][1:]), k)):
        terminalreporter.write_line(RESULTS[key])
