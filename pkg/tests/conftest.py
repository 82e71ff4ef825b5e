"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_OUTCOMES: dict[int, list[tuple[str, str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    soft = any(k == "soft" for k, _ in item.user_properties)
    status = "PASS" if rep.passed else "FAIL"
    if soft and any(k == "soft" and v == "deviates" for k, v in item.user_properties):
        status = "SOFT-FAIL"
    _OUTCOMES.setdefault(mark.args[0], []).append((item.name, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        entries = _OUTCOMES[n]
        statuses = {s for _, s, _ in entries}
        overall = "FAIL" if "FAIL" in statuses else (
            "SOFT-FAIL" if "SOFT-FAIL" in statuses else "PASS")
        details = " | ".join(d for _, _, d in entries if d)
        tr.write_line(f"criterion {n:>2}: {overall:<9} {details}")
