import sys
from pathlib import Path

HERE = Path(__file__).parent
for p in (HERE, HERE / "fixtures"):
    if str(p) not in sys.path:
        sys.path.insert(0, str(p))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
