import pytest

_LINES = []


@pytest.fixture(scope="session")
def criterion_report():
    """Collects one summary line per acceptance criterion, printed at the end of the session."""

    def report(number, ok, detail):
        _LINES.append((number, f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"))
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
