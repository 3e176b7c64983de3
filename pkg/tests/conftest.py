"""Collects acceptance-criterion outcomes and prints one verdict line each."""

import pytest

_verdicts: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _verdicts.setdefault(number, {"title": title, "ok": True, "ran": False, "notes": []})
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        entry["ran"] = True
        if not rep.passed:
            entry["ok"] = False
    if rep.when == "call":
        entry["notes"].extend(v for k, v in item.user_properties if k == "note")


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        v = _verdicts[number]
        verdict = "PASS" if v["ok"] and v["ran"] else "FAIL"
        notes = f" ({'; '.join(v['notes'])})" if v["notes"] else ""
        terminalreporter.write_line(f"{verdict} criterion {number}: {v['title']}{notes}")
