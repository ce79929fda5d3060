import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record an acceptance verdict: criterion(number, title, passed, detail)."""
    def record(number, title, passed, detail=""):
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[num]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title}: {detail}")
