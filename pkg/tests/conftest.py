import pytest

from hypothesis import settings

settings.register_profile("lab", deadline=None, max_examples=40)
settings.load_profile("lab")

ACCEPTANCE_LINES = {}


def record_acceptance(number, title, ok, detail):
    line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


@pytest.fixture
def accept():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
