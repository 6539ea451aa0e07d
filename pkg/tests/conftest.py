from __future__ import annotations

import pytest

from rollfly.core import preset

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def roll():
    return preset("titan_table1_roll")


@pytest.fixture(scope="session")
def fly():
    return preset("titan_table1_fly")


@pytest.fixture
def record_criterion():
    """Collect one PASS/FAIL line per acceptance criterion for the summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
