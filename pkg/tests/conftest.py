"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import pytest

CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of the acceptance criterion named by the test's ``criterion`` marker."""
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    yield
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    prev = CRITERIA.get(number, (title, True))
    CRITERIA[number] = (title, prev[1] and ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, ok = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
