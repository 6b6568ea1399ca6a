import numpy as np
import pytest

CRITERIA = []


def record_criterion(number, passed, detail):
    line = f"[criterion {number}] {'PASS' if passed else 'FAIL'}: {detail}"
    CRITERIA.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
