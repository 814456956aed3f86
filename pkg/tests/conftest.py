"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

import pytest

_outcomes = {}
_titles = {}
_notes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    _titles[number] = title
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _outcomes.setdefault(number, []).append(not failed)


@pytest.fixture
def criterion_note(request):
    """Attach a detail line to the criterion of the requesting test."""
    number = request.node.get_closest_marker("criterion").args[0]

    def note(text):
        _notes.setdefault(number, []).append(text)

    return note


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        status = "PASS" if all(_outcomes[number]) else "FAIL"
        terminalreporter.write_line(f"{status} criterion {number}: {_titles[number]}")
        for text in _notes.get(number, []):
            terminalreporter.write_line(f"    {text}")
