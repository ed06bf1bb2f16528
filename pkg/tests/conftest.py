import pytest

_LINES = []


@pytest.fixture(scope="session")
def criterion_log():
    """Collects one pass/fail line per acceptance criterion for the terminal summary."""
    def record(result):
        line = result.line()
        _LINES.append(line)
        print(line)
        return result
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
