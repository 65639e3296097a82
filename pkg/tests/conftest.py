import re

import numpy as np
import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_outcomes: dict[int, list[bool]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if match is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(int(match.group(1)), []).append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        status = "PASS" if all(_outcomes[number]) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}")
