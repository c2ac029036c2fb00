import numpy as np
import pytest

from lsci.core import FunctionSet, Grid


@pytest.fixture
def grid64():
    return Grid.interval(64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian_set(grid, n, seed=0, scale=1.0):
    """Smooth-ish Gaussian functions: random walks scaled to unit size."""
    r = np.random.default_rng(seed)
    v = np.cumsum(r.standard_normal((n, grid.size)), axis=1) / np.sqrt(grid.size)
    return FunctionSet(grid, scale * v)


# Acceptance verdicts, filled by test_acceptance.py and printed after the run.
ACCEPTANCE = {}
CRITERIA = {
    "C1": "marginal coverage grid, projection x depth",
    "C2": "marginal coverage grid, localizer x bandwidth",
    "C3": "adaptivity (dCW)",
    "C4": "risk control",
    "C5": "sampler soundness",
    "C6": "oracle equivalences",
    "C7": "coverage-gap bound limits",
    "C8": "conformal nestedness",
    "C9": "determinism",
}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key, title in CRITERIA.items():
        if key in ACCEPTANCE:
            ok, detail = ACCEPTANCE[key]
            terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        else:
            terminalreporter.write_line(f"{key} NOT RUN  {title}")
