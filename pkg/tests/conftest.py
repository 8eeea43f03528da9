import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): test backing one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if hasattr(report, "wasxfail"):
            status = f"FAIL (unattainable: {report.wasxfail})"
        elif report.skipped:
            reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
            status = f"SKIP ({reason.removeprefix('Skipped: ')})"
        else:
            status = "PASS" if report.passed else "FAIL"
        note = dict(item.user_properties).get("note")
        if note:
            status += f" -- {note}"
        _ACCEPTANCE[name] = status


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    width = max(len(n) for n in _ACCEPTANCE)
    for name, status in _ACCEPTANCE.items():
        terminalreporter.write_line(f"{name:<{width}}  {status}")
