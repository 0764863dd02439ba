import pytest

from igmfpt.fpt_double import Interval
from igmfpt.gm_core import builtin_integrated_bm, builtin_ou, identity_clock, transform

# lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ibm():
    return builtin_integrated_bm()


@pytest.fixture(scope="session")
def ibm_rep(ibm):
    return transform(ibm)


@pytest.fixture(scope="session")
def ou():
    return builtin_ou(1.0)


@pytest.fixture(scope="session")
def ou_rep(ou):
    return transform(ou)


@pytest.fixture(scope="session")
def bm_rep():
    return identity_clock()


@pytest.fixture
def unit():
    return Interval(-1.0, 1.0)
