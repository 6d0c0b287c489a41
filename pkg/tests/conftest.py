from hypothesis import settings

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.skipped):
        return
    marker = _ACCEPTANCE.get(report.nodeid)
    if marker is None:
        return
    number, title = marker
    status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    _ACCEPTANCE[report.nodeid] = (number, title, status)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _ACCEPTANCE[item.nodeid] = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    rows = sorted(v for v in _ACCEPTANCE.values() if len(v) == 3)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status in rows:
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}")
