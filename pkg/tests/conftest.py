import pytest

# filled by tests/test_acceptance.py, one (number, verdict, detail) per criterion
ACCEPTANCE_LINES: list[tuple[int, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"{verdict} criterion {number}: {detail}")


@pytest.fixture
def report():
    return ACCEPTANCE_LINES
