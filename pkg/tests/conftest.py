import numpy as np
import pytest

from chernmetric import build_gammas

_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def gammas1():
    return build_gammas(1)


@pytest.fixture(scope="session")
def gammas2():
    return build_gammas(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion_report():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def report(number, name, passed, detail):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
