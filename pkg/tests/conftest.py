import report


def pytest_terminal_summary(terminalreporter):
    if report.LINES:
        terminalreporter.section("acceptance verdicts")
        for line in sorted(report.LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
