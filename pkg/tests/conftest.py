import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's outcome and print its verdict line."""

    def record(number, ok: bool, detail: str) -> bool:
        _CRITERIA[str(number)] = (bool(ok), detail)
        print(f"criterion {str(number):>3}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA, key=lambda k: (int(k.rstrip("ab")), k)):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>3}: {'PASS' if ok else 'FAIL'}  {detail}")
