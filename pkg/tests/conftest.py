import os

import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(autouse=True)
def _no_user_scenarios(monkeypatch):
    monkeypatch.delenv("HOTUNER_SCENARIOS", raising=False)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
