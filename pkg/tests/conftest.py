import math
import warnings

import numpy as np
import pytest

from sturmpoly import Problem
from sturmpoly.spectrum import spectral_data

PI = math.pi


def zero_p0():
    return Problem.build(0.0, (1.0,), (0.0,))


def zero_p1():
    # r1 = lam, r2 = 0: double eigenvalue at 0
    return Problem.build(0.0, (0.0, 1.0), (0.0,))


def smooth_p1():
    return Problem.build(lambda x: 0.1 * np.cos(2 * x), (0.5, 1.0), (0.3,))


@pytest.fixture(autouse=True)
def _quiet_common_root():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


@pytest.fixture(scope="session")
def data_zero_p0():
    return spectral_data(zero_p0(), 12)


@pytest.fixture(scope="session")
def data_zero_p1():
    return spectral_data(zero_p1(), 12)


@pytest.fixture(scope="session")
def data_smooth_p1():
    return spectral_data(smooth_p1(), 12)


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or "::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        props = dict(report.user_properties)
        _ACCEPTANCE[report.nodeid] = (report.outcome, props.get("title", ""), props.get("detail", ""),
                                      report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_ACCEPTANCE, key=lambda s: int(s.split("test_criterion_")[1].split("_")[0])):
        outcome, title, detail, dur = _ACCEPTANCE[nodeid]
        n = int(nodeid.split("test_criterion_")[1].split("_")[0])
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {mark}  {title} [{dur:.1f} s] {detail}")
