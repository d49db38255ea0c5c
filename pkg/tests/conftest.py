import pytest

_ACCEPTANCE = {}


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then return the flag for asserting."""

    def record(number: int, name: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number} [{name}]: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
