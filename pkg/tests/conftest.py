import numpy as np
import pytest

from kkm.evaluation import synthetic_spsd


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spsd(n, rank=None, seed=0):
    rng = np.random.default_rng(seed)
    r = n if rank is None else rank
    g = rng.standard_normal((n, r))
    return g @ g.T


def power_spsd(n, seed=0):
    return synthetic_spsd(np.arange(1, n + 1, dtype=float) ** -2.0, seed)


ACCEPTANCE_LINES = []


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
