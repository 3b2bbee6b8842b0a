import numpy as np
import pytest

from fracinv.harness import CASES
from fracinv.problem import Excitation, ProblemSetup, SpaceGrid

PI = np.pi


def example_a(m=200, alpha=0.5):
    """Zero potential with two-mode data; the trace is a single Mittag-Leffler term."""
    return ProblemSetup.from_functions(
        SpaceGrid(m), q=0.0, alpha=alpha, g=Excitation(),
        f=lambda x: PI ** 2 / 8 * (np.cos(PI * x / 2) + 9 * np.cos(3 * PI * x / 2)),
        u0=lambda x: 0.5 * np.cos(PI * x / 2) + 1.5 * np.cos(3 * PI * x / 2))


def example_b(m=200, alpha=0.5):
    """Constant potential 2 pi^2 with one-mode data; same trace as ``example_a``."""
    return ProblemSetup.from_functions(
        SpaceGrid(m), q=2 * PI ** 2, alpha=alpha, g=Excitation(),
        f=lambda x: 9 * PI ** 2 / 4 * np.cos(PI * x / 2),
        u0=lambda x: 2 * np.cos(PI * x / 2))


@pytest.fixture
def case_i():
    return CASES["i"]


@pytest.fixture
def case_ii():
    return CASES["ii"]


@pytest.fixture(scope="session")
def pipeline():
    """Every (case, order) cell of the default configuration, with stage timings.

    Shared by the inversion and acceptance tests; this is the slow part of
    the suite (tens of minutes on one core).
    """
    from fracinv.harness import RunConfig, run_cell

    cfg = RunConfig()
    cells = {(case, alpha): run_cell(case, alpha, cfg, with_u0=True)
             for case in ("i", "ii") for alpha in cfg.alphas}
    return cfg, cells


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion; the verdicts are listed after the run."""
    def record(number, title, ok, detail):
        ACCEPTANCE[number] = (bool(ok), title, detail)
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}"
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}")
