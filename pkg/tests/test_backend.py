from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import make_qp2
from pdavd.dynamics import SolverParams
from pdavd.errors import ParameterError
from pdavd.integrator import backend_name, integrate
from pdavd.problem import random_qp

SNIPPET = """
import numpy as np
from pdavd.integrator import backend_name, integrate
from pdavd.dynamics import SolverParams
from pdavd.problem import LinearMap, ProblemInstance, QuadraticObjective
p = ProblemInstance(QuadraticObjective(np.eye(2)), LinearMap([[1.0, 1.0]]), [1.0])
tr = integrate(p, SolverParams(t_end=20.0, samples=5))
print(backend_name(), tr.stats["backend"], repr(float(tr.x[-1, 0])))
"""


def _child(env_extra):
    env = {**os.environ, **env_extra}
    out = subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True, text=True, check=True)
    return out.stdout.split()


def test_environment_variable_selects_pure_python():
    name, used, value = _child({"PDAVD_PURE_PYTHON": "1"})
    assert name == "python" and used == "python"
    ref = integrate(make_qp2(), SolverParams(t_end=20.0, samples=5), backend="python")
    assert float(value) == float(ref.x[-1, 0])


@pytest.mark.skipif(backend_name() != "compiled", reason="compiled extension not built")
def test_default_selection_prefers_compiled():
    name, used, _ = _child({"PDAVD_PURE_PYTHON": ""})
    assert name == "compiled" and used == "compiled"


@pytest.mark.skipif(backend_name() != "compiled", reason="compiled extension not built")
@pytest.mark.parametrize("seed", [0, 1])
def test_kernels_agree_on_random_qp(seed):
    p = random_qp(seed, 6, 2, 0.5)
    params = SolverParams(t_end=40.0, samples=30, x0=np.linspace(-1, 1, 6), lamdot0=[0.5, -0.5])
    a = integrate(p, params, backend="python")
    b = integrate(p, params, backend="compiled")
    assert a.stats["naccept"] == b.stats["naccept"] and a.stats["nreject"] == b.stats["nreject"]
    for name in ("x", "lam", "xdot", "lamdot"):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name), rtol=0, atol=1e-12)


def test_forcing_missing_compiled_backend_is_an_error():
    if backend_name() == "compiled":
        pytest.skip("compiled extension is available")
    with pytest.raises(ParameterError):
        integrate(make_qp2(), SolverParams(t_end=5.0), backend="compiled")
