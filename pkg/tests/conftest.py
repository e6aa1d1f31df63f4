import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from curveflow import load_config  # noqa: E402
from curveflow.config import build_problem  # noqa: E402
from curveflow.solver import SolverConfig, run  # noqa: E402

import oracles  # noqa: E402

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def example_config():
    return load_config("threefold_example")


@pytest.fixture(scope="session")
def example_problem(example_config):
    problem, _ = build_problem(example_config)
    return problem


@pytest.fixture(scope="session")
def golden_run(example_problem):
    """The reference experiment: n = 512, dt = 1e-4, etd2 to t = 4, states kept at the table times."""
    snapshots = []
    config = SolverConfig(dt=1e-4, t_end=4.0, scheme="etd2", snapshot_times=oracles.TABLE_TIMES)
    state, diags = run(example_problem, config, sink=snapshots.append)
    return state, diags, snapshots


@pytest.fixture(scope="session")
def golden_run_half_dt(example_problem):
    config = SolverConfig(dt=5e-5, t_end=4.0, scheme="etd2")
    return run(example_problem, config)


@pytest.fixture(scope="session")
def long_run(example_problem):
    """The literal example to t = 20 (dt = 1e-3: the limit is set by the energies, not the step)."""
    return run(example_problem, SolverConfig(dt=1e-3, t_end=20.0, energy_drift_abort=math.inf))
