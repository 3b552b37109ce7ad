from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from pdavd.diagnostics import sample_table
from pdavd.dynamics import SolverParams
from pdavd.integrator import integrate
from pdavd.oracle import find_saddle
from pdavd.problem import LinearMap, ProblemInstance, QuadraticObjective, random_qp

ORACLES = json.loads((Path(__file__).parent / "oracles" / "derived_values.json").read_text())

# random QP used by the rate experiments: n=20, m=5, A entries uniform on [-0.15, 0.15]
RANDOM_QP_SEED = 0
RANDOM_QP_SCALE = 0.15


def make_qp2():
    return ProblemInstance(QuadraticObjective(np.eye(2)), LinearMap([[1.0, 1.0]]), [1.0])


def make_one_d():
    return ProblemInstance(QuadraticObjective([[1.0]]), LinearMap([[1.0]]), [1.0])


def make_degenerate():
    return ProblemInstance(QuadraticObjective(np.eye(2)), LinearMap([[1.0, 1.0], [1.0, 1.0]]), [1.0, 1.0])


@dataclass
class Run:
    problem: ProblemInstance
    params: SolverParams
    saddle: object
    traj: object
    table: dict
    seconds: float = 0.0


def run(p, params, schedule=None):
    import time

    s = find_saddle(p)
    t0 = time.perf_counter()
    tr = integrate(p, params, schedule)
    sec = time.perf_counter() - t0
    return Run(p, params, s, tr, sample_table(p, params, tr, s), sec)


@pytest.fixture
def oracles():
    return ORACLES


@pytest.fixture
def qp2():
    return make_qp2()


@pytest.fixture(scope="session")
def qp2_run():
    """QP2 with strict parameters on [1, 1e4] (shared, about 12 s)."""
    return run(make_qp2(), SolverParams())


@pytest.fixture(scope="session")
def qp2_short():
    """QP2 on [1, 100] with 120 samples."""
    return run(make_qp2(), SolverParams(t_end=100.0, samples=120))


@pytest.fixture(scope="session")
def random_qp_run():
    """Seeded random QP on [1, 1e4]; 201 log samples so that t = 100 is a sample."""
    p = random_qp(RANDOM_QP_SEED, 20, 5, RANDOM_QP_SCALE)
    return run(p, SolverParams(samples=201))


# -- acceptance summary ------------------------------------------------------

ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
