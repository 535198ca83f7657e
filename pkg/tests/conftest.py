import pytest

# criterion number -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")


@pytest.fixture
def record_criterion():
    def record(num, title, ok, detail):
        ACCEPTANCE[num] = (title, bool(ok), detail)
        print(f"criterion {num} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
    return record
