from __future__ import annotations

import numpy as np
import pytest

from conftest import make_one_d, make_qp2
from pdavd.diagnostics import sample_table
from pdavd.dynamics import SolverParams, nesterov_lambda_closed_form, second_derivatives
from pdavd.errors import IntegrationError, ParameterError
from pdavd.integrator import integrate, sample_schedule
from pdavd.oracle import find_saddle
from pdavd.problem import CallableObjective, LinearMap, ProblemInstance, QuadraticObjective


def _final(tr):
    return np.concatenate([tr.x[-1], tr.lam[-1], tr.xdot[-1], tr.lamdot[-1]])


# -- schedules ---------------------------------------------------------------


def test_schedule_examples():
    np.testing.assert_allclose(sample_schedule(1, 100, 3), [1, 10, 100], rtol=1e-15)
    np.testing.assert_array_equal(sample_schedule(1, 2, 2, "linear"), [1.0, 2.0])
    ts = sample_schedule(2, 2e6, 7)
    np.testing.assert_allclose(ts[1:] / ts[:-1], 10.0, rtol=1e-12)
    assert ts[0] == 2.0 and ts[-1] == 2e6


@pytest.mark.parametrize("args", [(1, 100, 1), (0, 10, 5), (5, 5, 5), (1, 10, 2.5), (1, 10, 5, "cubic")])
def test_schedule_rejects(args):
    with pytest.raises(ParameterError):
        sample_schedule(*args)


def test_schedule_must_be_inside_horizon(qp2):
    with pytest.raises(ParameterError):
        integrate(qp2, SolverParams(t_end=10.0), [1.0, 20.0])
    with pytest.raises(ParameterError):
        integrate(qp2, SolverParams(t_end=10.0), [1.0, 3.0, 2.0])
    with pytest.raises(ParameterError):
        integrate(qp2, SolverParams(alpha=2.0, t_end=10.0))


# -- trajectories ------------------------------------------------------------


def test_start_at_saddle_stays_put(qp2):
    s = find_saddle(qp2)
    params = SolverParams(x0=s.x_star, lam0=s.lambda_star, t_end=1e3, samples=30)
    tr = integrate(qp2, params)
    np.testing.assert_allclose(tr.x, np.broadcast_to(s.x_star, tr.x.shape), atol=params.atol)
    np.testing.assert_allclose(tr.lam, np.broadcast_to(s.lambda_star, tr.lam.shape), atol=params.atol)
    assert np.abs(tr.xdot).max() <= params.atol


def test_nesterov_multiplier_matches_closed_form():
    p = ProblemInstance(QuadraticObjective([[1.0]]), LinearMap([[0.0]]), [0.0])
    params = SolverParams(alpha=3.0, theta=0.5, x0=[1.0], lam0=[0.0], lamdot0=[1.0])
    tr = integrate(p, params)
    ref = nesterov_lambda_closed_form(params, tr.times)
    np.testing.assert_allclose(tr.lam[1:], ref[1:], rtol=1e-6)


def test_qp2_energy_nonincreasing(qp2_run):
    E = qp2_run.table["E"]
    assert np.all(np.diff(E) <= 1e-8 * E[0])
    assert qp2_run.traj.mode == "strict"


def test_integration_is_deterministic():
    p = make_qp2()
    params = SolverParams(t_end=50.0, samples=25, x0=[0.3, -1.0], lamdot0=[0.5])
    a, b = integrate(p, params), integrate(p, params)
    for name in ("x", "lam", "xdot", "lamdot", "xddot", "lamddot"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.stats["naccept"] == b.stats["naccept"]


def test_stored_second_derivatives_match_the_field(qp2_short):
    r = qp2_short
    for k in (0, 40, len(r.traj) - 1):
        ddx, ddl = second_derivatives(r.problem, r.params, r.traj.state(k))
        np.testing.assert_array_equal(r.traj.xddot[k], ddx)
        np.testing.assert_array_equal(r.traj.lamddot[k], ddl)


def test_sample_count_and_stats(qp2_short):
    tr = qp2_short.traj
    assert len(tr) == 120
    assert tr.times[0] == 1.0 and tr.times[-1] == 100.0
    assert tr.stats["naccept"] > 0 and tr.stats["backend"] in ("compiled", "python")


@pytest.mark.parametrize("T", [10.0, 20.0])
@pytest.mark.parametrize("tol", [1e-8, 1e-10])
def test_halving_tolerance_moves_terminal_state_little(T, tol):
    # self-convergence is only observable while the global error is dominated
    # by the local tolerance; beyond T ~ 20 on QP2 the accumulated phase error
    # of the oscillation grows with the step count
    p = make_qp2()
    a = integrate(p, SolverParams(t_end=T, atol=tol, rtol=tol, samples=10))
    b = integrate(p, SolverParams(t_end=T, atol=tol / 2, rtol=tol / 2, samples=10))
    assert np.abs(_final(a) - _final(b)).max() < 10 * tol


def test_loose_and_tight_runs_agree_to_three_digits():
    p = make_qp2()
    s = find_saddle(p)
    base = SolverParams(t_end=20.0, samples=40)
    loose = sample_table(p, base, integrate(p, base.with_(atol=1e-8, rtol=1e-8)), s)
    tight = sample_table(p, base, integrate(p, base.with_(atol=1e-11, rtol=1e-11)), s)
    for key, v in tight.items():
        v = np.asarray(v, dtype=float)
        if key == "t" or v.ndim != 1:
            continue
        w = np.asarray(loose[key], dtype=float)
        floor = 1e-9 * (1.0 + np.abs(v).max())
        rel = np.abs(w - v) / np.maximum(np.abs(v), floor)
        assert rel.max() < 5e-4, key


def test_callable_objective_uses_generic_stepper():
    p = ProblemInstance(
        CallableObjective(2, lambda x: 0.5 * x @ x, lambda x: x.copy(), 1.0), LinearMap([[1.0, 1.0]]), [1.0]
    )
    params = SolverParams(t_end=30.0, samples=15)
    tr = integrate(p, params)
    assert tr.stats["backend"] == "python"
    ref = integrate(make_qp2(), params, backend="python")
    np.testing.assert_allclose(tr.x, ref.x, atol=1e-12)


def test_backends_agree():
    from pdavd.integrator import backend_name

    if backend_name() != "compiled":
        pytest.skip("compiled extension not built")
    p = make_one_d()
    params = SolverParams(t_end=50.0, samples=20, x0=[2.0])
    a = integrate(p, params, backend="python")
    b = integrate(p, params, backend="compiled")
    np.testing.assert_allclose(a.x, b.x, atol=1e-13)
    assert a.stats["naccept"] == b.stats["naccept"]


# -- failures ----------------------------------------------------------------


def test_step_cap_raises_integration_error(qp2):
    with pytest.raises(IntegrationError) as exc:
        integrate(qp2, SolverParams(t_end=100.0), max_steps=50)
    assert "step limit" in str(exc.value)


def test_nonfinite_gradient_raises_integration_error():
    def grad(x):
        return x if x[0] < 2.0 else np.full_like(x, np.nan)

    p = ProblemInstance(CallableObjective(1, lambda x: 0.5 * x @ x, grad, 1.0), LinearMap([[1.0]]), [1.0])
    with pytest.raises(IntegrationError):
        integrate(p, SolverParams(t_end=20.0, x0=[5.0]))
