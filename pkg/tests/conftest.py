import pytest

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number = marker.kwargs["criterion"]
    if report.when == "call" or (report.when == "setup" and report.skipped):
        detail = dict(report.user_properties).get("detail", "")
        status = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        _CRITERIA[number] = (status, detail, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, detail, seconds = _CRITERIA[number]
        extra = f"{detail}, " if detail else ""
        terminalreporter.write_line(f"criterion {number}: {status} ({extra}{seconds:.1f} s)")
