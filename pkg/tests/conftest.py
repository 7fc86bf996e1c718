"""Shared fixtures; prints one line per acceptance criterion at the end of the run."""

import pytest

_RESULTS = {}
_DETAILS = {}


def _criterion(item):
    mark = item.get_closest_marker("acceptance")
    return mark.args[0] if mark and mark.args else None


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    number = _criterion(item)
    if number is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed and not hasattr(report, "wasxfail") else "FAIL"
        if _RESULTS.get(number) != "FAIL":
            _RESULTS[number] = status
        if hasattr(report, "wasxfail"):
            _DETAILS.setdefault(number, []).append(f"known limitation: {report.wasxfail}")
        elif report.failed:
            _DETAILS.setdefault(number, []).append(str(report.longrepr.reprcrash.message)
                                                   if hasattr(report.longrepr, "reprcrash") else "error")


@pytest.fixture
def detail(request):
    """Attach a short note to the summary line of the test's criterion."""
    number = _criterion(request.node)

    def add(text):
        _DETAILS.setdefault(number, []).append(text)

    return add


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        notes = "; ".join(_DETAILS.get(number, []))
        terminalreporter.write_line(f"criterion {number}: {_RESULTS[number]}" + (f"  ({notes})" if notes else ""))
