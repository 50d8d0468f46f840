"""Collects one PASS/FAIL line per acceptance criterion and prints them at the end."""

import pytest

_LINES: list[str] = []


@pytest.fixture
def record():
    def rec(number: int, ok: bool, detail: str, seconds: float, budget: float):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail} [{seconds:.1f}s / budget {budget:.0f}s]"
        _LINES.append(line)
        print(line)
    return rec


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
