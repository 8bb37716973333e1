import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# (number, passed, description) tuples appended by the acceptance suite
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, text in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {text}")
