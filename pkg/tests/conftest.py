"""Shared test plumbing.

The acceptance suite registers one line per criterion here; the lines are
echoed in a dedicated terminal section at the end of the run so the
verdicts are visible regardless of output capturing.
"""

from __future__ import annotations

_ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    _ACCEPTANCE_LINES[number] = f"criterion {number}: {verdict} — {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[number])
