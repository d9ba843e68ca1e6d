import numpy as np
import pytest

from helpers import ACCEPTANCE, DELTA_WING_ICS, wing_run


@pytest.fixture(scope="session")
def wing_reference():
    return wing_run(DELTA_WING_ICS[0])[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
