import sys
from pathlib import Path

# make the shared oracle helpers importable from every test module
sys.path.insert(0, str(Path(__file__).parent))

import _acceptance_log


def pytest_terminal_summary(terminalreporter):
    # replay the acceptance lines outside capture so they always show
    if _acceptance_log.LINES:
        terminalreporter.section("acceptance gate")
        for line in _acceptance_log.LINES:
            terminalreporter.write_line(line)
