import sys


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance lines at the end of the run, one per criterion."""
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(results, key=lambda s: s.split("criterion", 1)[1]):
        terminalreporter.write_line(line)
