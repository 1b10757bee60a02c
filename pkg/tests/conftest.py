import re

import pytest

from qlock.network import FrequencyGrid

_acceptance = []


@pytest.fixture(scope="session")
def grid():
    """Default analysis grid: 400 log points, 0.1 to 10 in units of Omega_a_SQL."""
    return FrequencyGrid.default()


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        if hasattr(report, "wasxfail"):
            _acceptance.append((name, "FAIL", f"known, {report.wasxfail}"))
        else:
            _acceptance.append((name, "PASS" if report.passed else "FAIL", ""))
    elif report.when == "setup" and report.failed:
        _acceptance.append((name, "FAIL", "setup error"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    criteria: dict[int, list] = {}
    for name, mark, note in _acceptance:
        m = re.match(r"test_c(\d+)_", name)
        if m:
            criteria.setdefault(int(m.group(1)), []).append((name, mark, note))
    for number in sorted(criteria):
        results = criteria[number]
        failed = [r for r in results if r[1] != "PASS"]
        line = f"criterion {number}: {'FAIL' if failed else 'PASS'} ({len(results) - len(failed)}/{len(results)} checks)"
        terminalreporter.write_line(line)
        for name, mark, note in failed:
            terminalreporter.write_line(f"    {name}" + (f": {note}" if note else ""))
    terminalreporter.write_line("")
    for name, mark, note in _acceptance:
        terminalreporter.write_line(f"[{mark}] {name}")
