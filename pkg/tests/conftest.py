import pytest

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, passed: bool, detail: str):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} | {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record
