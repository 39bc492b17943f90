import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = _CRITERIA.get(report.nodeid)
    if marker is None:
        return
    number, title, _ = marker
    _CRITERIA[report.nodeid] = (number, title, report.outcome == "passed")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _CRITERIA[item.nodeid] = (m.args[0], m.args[1], None)


def pytest_terminal_summary(terminalreporter):
    ran = [v for v in _CRITERIA.values() if v[2] is not None]
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    by_number = {}
    for number, title, ok in ran:
        prev = by_number.get(number, (title, True))
        by_number[number] = (prev[0], prev[1] and ok)
    for number in sorted(by_number):
        title, ok = by_number[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")
