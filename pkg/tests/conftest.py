import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance criterion for the terminal summary."""

    def record(number: int, name: str, status: str, detail: str = ""):
        line = f"criterion {number:>2} {name:<28} {status:<7} {detail}".rstrip()
        _LINES[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_LINES):
        terminalreporter.write_line(_LINES[number])
