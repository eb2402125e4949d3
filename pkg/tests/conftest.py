import pytest

_REPORT: list[str] = []


@pytest.fixture
def report():
    """Record a one-line PASS/FAIL verdict; lines are echoed in the terminal summary."""

    def emit(number: int, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
        print(line)
        _REPORT.append(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
