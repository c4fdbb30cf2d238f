"""Acceptance reporting: one PASS/FAIL line per criterion at the end of the run."""
from collections import OrderedDict

import pytest

_RESULTS = OrderedDict()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _RESULTS.setdefault(int(mark.args[0]), []).append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        tests = _RESULTS[n]
        ok = all(p for _, p in tests)
        detail = ", ".join(f"{name} {'ok' if p else 'FAILED'}" for name, p in tests)
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  ({detail})")
