import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_REPORT = []


def report(n, name, ok, detail):
    _REPORT.append((str(n), name, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for n, name, ok, detail in sorted(_REPORT, key=lambda r: (int(r[0].rstrip("ab")), r[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n:>3}: {name} -- {detail}")
