import re

import pytest

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_c(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[m.group(1)] = (m.group(2).replace("_", " "), report.outcome.upper())


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE, key=int):
        title, outcome = _ACCEPTANCE[num]
        verdict = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"criterion {int(num):2d} [{verdict}] {title}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240531)
