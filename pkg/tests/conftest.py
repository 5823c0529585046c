import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record a one-line pass/fail summary for an acceptance criterion."""

    def report(number: int, passed: bool, detail: str, own: bool | None = None):
        # ``passed`` is the verdict of the whole criterion so far; ``own`` (when the
        # criterion is split over parametrized cases) is what this case asserts
        _ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(_ACCEPTANCE[number])
        assert passed if own is None else own, detail

    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
