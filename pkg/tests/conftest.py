"""Shared fixtures: acceptance-criterion reporting.

Each acceptance test reports one line; the lines are echoed in a terminal
summary section so a full run always shows every criterion verdict.
"""

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion_report():
    def report(number, passed, detail):
        line = "[%s] criterion %d: %s" % ("PASS" if passed else "FAIL", number, detail)
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
