"""Shared fixtures and the per-criterion acceptance summary."""

from __future__ import annotations

import numpy as np
import pytest

_results: dict[int, dict] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    number, title = crit
    entry = _results.setdefault(number, {"title": title, "passed": True, "n": 0})
    entry["n"] += 1
    if not report.passed:
        entry["passed"] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        e = _results[number]
        status = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(
            f"criterion {number:2d} {status}  {e['title']} ({e['n']} test(s))")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
