import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import stock  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not stock.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok, detail in sorted(stock.ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")
