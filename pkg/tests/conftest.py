import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_record():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
