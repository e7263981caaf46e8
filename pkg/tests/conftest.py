import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from agrape.model import three_qubit_problem, two_qubit_problem  # noqa: E402
from agrape.optimizers import run_nominal  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Collects one pass/fail line per acceptance criterion for the terminal summary."""

    def record(label, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] {label}" + (f" -- {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def two_qubit():
    return two_qubit_problem()


@pytest.fixture(scope="session")
def three_qubit():
    return three_qubit_problem()


@pytest.fixture(scope="session")
def nominal_two_qubit(two_qubit):
    """GRAPE-converged control at eps = 0 (L < 1e-10)."""
    result = run_nominal(two_qubit, seed=7)
    assert result.trace[0].j_min < 1e-10
    return result.pulse


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
