import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion, then assert."""

    def _report(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[number])
        assert ok, detail

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
