import sys

# verdict lines collected by test_acceptance, in criterion order
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num])


def record(num: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'} [{num:2d}] {title}" + (f": {detail}" if detail else "")
    ACCEPTANCE[num] = line
    print(line, file=sys.stderr)
