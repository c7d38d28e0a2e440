import numpy as np
import pytest

from subpoisson.dynamics import SolverSettings
from subpoisson.params import dressed_params, hz

# tolerance and horizon needed to resolve the slow approach to the plateau
PRECISE = SolverSettings(plateau_tol=1e-7, max_horizon_factor=2000.0)

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def make_baseline_params():
    return dressed_params(
        omega_p=hz(400e3), omega_c=hz(2e6), delta_s=hz(300e6), delta=hz(20e3), n_target=8
    )


@pytest.fixture(scope="session")
def baseline_params():
    return make_baseline_params()


@pytest.fixture(scope="session")
def precise():
    return PRECISE


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
