import os
import sys

sys.path.insert(0, os.path.dirname(__file__))


def pytest_terminal_summary(terminalreporter):
    """Echo the one-line-per-criterion acceptance report, when it ran."""
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "_REPORT", None)
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
