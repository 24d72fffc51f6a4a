import os
import sys

sys.path.insert(0, os.path.dirname(__file__))


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance")
        for key in sorted(acceptance_log.LINES, key=lambda k: (int(k.split()[0].rstrip("ab")), k)):
            terminalreporter.write_line(acceptance_log.LINES[key])
