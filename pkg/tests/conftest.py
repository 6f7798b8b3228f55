"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark.args
    entry = _outcomes.setdefault(number, {"title": title, "parts": []})
    if hasattr(report, "wasxfail"):
        entry["parts"].append(("known-red", item.name, report.wasxfail))
    elif report.skipped:
        entry["parts"].append(("skipped", item.name, ""))
    else:
        entry["parts"].append(("pass" if report.passed else "fail", item.name, ""))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_outcomes):
        entry = _outcomes[number]
        states = {p[0] for p in entry["parts"]}
        if states <= {"pass"}:
            verdict = "PASS"
        elif "skipped" in states and states <= {"pass", "skipped"}:
            verdict = "SKIP"
        else:
            verdict = "FAIL"
        tr.write_line(f"[{verdict}] {number:2d}. {entry['title']}")
        for state, name, why in entry["parts"]:
            if state != "pass":
                tr.write_line(f"         {state}: {name}" + (f" ({why})" if why else ""))
