"""Shared pytest wiring.

The tests in ``test_acceptance.py`` double as the sign-off checklist, so the
terminal summary repeats one PASS/FAIL line per criterion after the normal
pytest output.  Everything else is ordinary pytest.
"""

_acceptance_results = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].removeprefix("test_")
    if report.when == "call":
        _acceptance_results.append((name, report.passed))
    elif report.failed:
        # A crash in setup or teardown still has to show up as a FAIL line.
        _acceptance_results.append((name, False))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _acceptance_results:
        terminalreporter.write_line(f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'}")
