import pytest

from helpers import REFERENCE_TARIFF

# filled by test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def tariff():
    return REFERENCE_TARIFF


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
