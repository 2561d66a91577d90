from collections import OrderedDict

import pytest

CRITERIA = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by a test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            n, title = mark.args
            CRITERIA.setdefault(n, {"title": title, "outcomes": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        CRITERIA[mark.args[0]]["outcomes"].append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        c = CRITERIA[n]
        if not c["outcomes"]:
            status = "NOT RUN"
        else:
            status = "PASS" if all(c["outcomes"]) else "FAIL"
        terminalreporter.write_line(f"AC{n} {status:7s} {c['title']}")
