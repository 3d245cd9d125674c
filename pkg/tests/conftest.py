import pytest

_LINES = {}


@pytest.fixture
def criterion_report():
    """Record and print the verdict line of one acceptance criterion."""

    def emit(number: int, checks: dict, detail: str = "") -> bool:
        ok = all(checks.values())
        failed = [name for name, passed in checks.items() if not passed]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  {detail}"
        if failed:
            line += f"  failed checks: {', '.join(failed)}"
        _LINES[number] = line
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
