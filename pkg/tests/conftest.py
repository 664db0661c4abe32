import numpy as np
import pytest

from f3scatter.scenario import Problem, default_scenario

_CRITERIA = {}


@pytest.fixture(scope="session")
def problem():
    p = Problem(default_scenario())
    _ = p.spectral, p.ia
    return p


@pytest.fixture
def report():
    """report(number, passed, detail) records one acceptance line."""
    def _report(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)
        return bool(passed)
    return _report


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
