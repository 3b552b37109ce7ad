from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdavd.dynamics import (
    SolverParams,
    SystemState,
    first_order_rhs,
    initial_state,
    lipschitz_bound_LF,
    nesterov_lambda_closed_form,
    satisfied_mode,
    second_derivatives,
    validate_params,
    vector_field,
)
from pdavd.errors import DimensionError, ParameterError
from pdavd.oracle import find_saddle
from pdavd.problem import LinearMap, ProblemInstance, QuadraticObjective


def test_validate_strict_example():
    d = validate_params(SolverParams(alpha=4, theta=0.45, beta=1), "strict")
    assert d.xi == pytest.approx(0.35)
    assert d.sigma == pytest.approx(0.1 / 0.45)
    assert d.mode == "strict"


def test_validate_boundary_is_standard_only():
    p = SolverParams(alpha=3, theta=0.5)
    d = validate_params(p, "standard")
    assert d.xi == 0.0 and d.sigma == 0.0
    with pytest.raises(ParameterError, match="alpha > 3"):
        validate_params(p, "strict")
    assert satisfied_mode(p) == "standard"


def test_validate_names_every_violation():
    with pytest.raises(ParameterError) as exc:
        validate_params(SolverParams(alpha=2.0, theta=0.6, beta=-1.0))
    msg = str(exc.value)
    assert "alpha >= 3" in msg and "theta <= 1/2" in msg and "beta >= 0" in msg


@pytest.mark.parametrize(
    "kw",
    [dict(theta=0.2), dict(t0=0.0), dict(t_end=0.5), dict(atol=0.0), dict(alpha=float("nan"))],
)
def test_validate_rejects(kw):
    with pytest.raises(ParameterError):
        validate_params(SolverParams(**kw))
    assert satisfied_mode(SolverParams(**kw)) is None


def test_validate_unknown_mode():
    with pytest.raises(ParameterError):
        validate_params(SolverParams(), "loose")


@settings(max_examples=200, deadline=None)
@given(st.floats(3.0, 50.0), st.floats(0.01, 0.5))
def test_xi_nonnegative_whenever_valid(alpha, theta):
    try:
        d = validate_params(SolverParams(alpha=alpha, theta=theta))
    except ParameterError:
        assert theta < 1.0 / (alpha - 1.0) - 1e-12
        return
    assert d.xi >= 0.0 and d.sigma >= 0.0


def test_initial_state_defaults_and_dimension_check(qp2):
    s = initial_state(qp2, SolverParams())
    assert s.t == 1.0 and s.x.shape == (2,) and s.lamdot.shape == (1,)
    assert not s.to_vector().any()
    with pytest.raises(DimensionError):
        initial_state(qp2, SolverParams(x0=[1.0, 2.0, 3.0]))


def test_state_vector_roundtrip():
    s = SystemState(2.0, np.array([1.0, 2.0]), np.array([3.0]), np.array([4.0, 5.0]), np.array([6.0]))
    back = SystemState.from_vector(2.0, s.to_vector(), 2, 1)
    np.testing.assert_array_equal(back.to_vector(), s.to_vector())
    with pytest.raises(DimensionError):
        SystemState.from_vector(2.0, np.zeros(5), 2, 1)


def test_vector_field_at_zero_state(qp2, oracles):
    s = initial_state(qp2, SolverParams())
    u, nu, ddx, ddl = vector_field(qp2, SolverParams(), s)
    assert not u.any() and not nu.any()
    np.testing.assert_allclose(ddx, oracles["qp2"]["xddot_start"], atol=1e-15)
    np.testing.assert_allclose(ddl, oracles["qp2"]["lamddot_start"], atol=1e-15)


def test_vector_field_hand_computed(qp2):
    # x=(1,0), lam=1, xdot=(0,1), lamdot=2 at t=2 with alpha=4, beta=1, theta=0.45
    s = SystemState(2.0, np.array([1.0, 0.0]), np.array([1.0]), np.array([0.0, 1.0]), np.array([2.0]))
    ddx, ddl = second_derivatives(qp2, SolverParams(), s)
    w = 1.0 + 0.45 * 2.0 * 2.0 + 0.0  # lam + theta t lamdot + beta (Ax - b), Ax - b = 0
    np.testing.assert_allclose(ddx, [-1.0 - w, -2.0 - w])
    np.testing.assert_allclose(ddl, [-4.0 + 0.0 + 0.45 * 2.0 * 1.0])


def test_saddle_with_zero_velocity_is_equilibrium(qp2):
    sp = find_saddle(qp2)
    for t in (1.0, 7.0, 1e3):
        s = SystemState(t, sp.x_star, sp.lambda_star, np.zeros(2), np.zeros(1))
        for part in vector_field(qp2, SolverParams(), s):
            np.testing.assert_allclose(part, 0.0, atol=1e-15)


def test_vector_field_rejects_nonpositive_time(qp2):
    s = SystemState(0.0, np.zeros(2), np.zeros(1), np.zeros(2), np.zeros(1))
    with pytest.raises(ParameterError):
        vector_field(qp2, SolverParams(), s)


def test_first_order_rhs_matches_vector_field(qp2):
    rng = np.random.default_rng(0)
    fun = first_order_rhs(qp2, SolverParams())
    for _ in range(10):
        v = rng.standard_normal(6)
        s = SystemState.from_vector(3.0, v, 2, 1)
        np.testing.assert_allclose(fun(3.0, v), np.concatenate(vector_field(qp2, SolverParams(), s)))


def test_lipschitz_bound_frozen(qp2, oracles):
    val = lipschitz_bound_LF(qp2, SolverParams(), 1.0, 10.0, 1.0)
    assert val == pytest.approx(oracles["qp2"]["L_F_t1_1_t2_10_d1"], rel=1e-12)
    with pytest.raises(ParameterError):
        lipschitz_bound_LF(qp2, SolverParams(), 10.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        lipschitz_bound_LF(qp2, SolverParams(), 1.0, 10.0, 0.0)


def test_lipschitz_bound_dominates_sampled_ratios(qp2):
    """Difference quotients of the time-dependent field inside the box stay below the bound."""
    params = SolverParams()
    t1, t2, delta = 1.0, 10.0, 1.0
    L = lipschitz_bound_LF(qp2, params, t1, t2, delta)
    fun = first_order_rhs(qp2, params)
    rng = np.random.default_rng(1)

    def point():
        v = rng.standard_normal(6)
        v *= rng.uniform(0, delta) / np.linalg.norm(v[:3]) if np.linalg.norm(v[:3]) else 1.0
        v[3:] = np.clip(v[3:], -delta, delta) / np.sqrt(3)
        return rng.uniform(t1, t2), v

    worst = 0.0
    for _ in range(2000):
        (ta, a), (tb, b) = point(), point()
        num = np.linalg.norm(fun(ta, a) - fun(tb, b))
        den = np.sqrt((ta - tb) ** 2 + np.sum((a - b) ** 2))
        worst = max(worst, num / den)
    assert worst <= L


def test_nesterov_closed_form_against_frozen_ode(oracles):
    o = oracles["nesterov_alpha3"]
    params = SolverParams(alpha=3.0, theta=0.5, lam0=[0.0], lamdot0=[1.0])
    lam = nesterov_lambda_closed_form(params, o["times"])
    np.testing.assert_allclose(lam[:, 0], o["lambda_formula"], rtol=1e-14)
    np.testing.assert_allclose(lam[:, 0], o["lambda_ode"], rtol=1e-10)
    scalar = nesterov_lambda_closed_form(params, 2.0)
    assert scalar.shape == (1,) and scalar[0] == pytest.approx(0.375)


def test_nesterov_closed_form_solves_the_dual_equation():
    params = SolverParams(alpha=4.5, t0=2.0, lam0=[1.0, -1.0], lamdot0=[0.3, 2.0])
    t = np.array([2.0, 3.0, 50.0])
    h = 1e-4
    lam = nesterov_lambda_closed_form(params, t)
    np.testing.assert_allclose(lam[0], [1.0, -1.0])
    d1 = (nesterov_lambda_closed_form(params, t + h) - nesterov_lambda_closed_form(params, t - h)) / (2 * h)
    d2 = (nesterov_lambda_closed_form(params, t + h) - 2 * lam + nesterov_lambda_closed_form(params, t - h)) / h**2
    np.testing.assert_allclose(d1[0], [0.3, 2.0], rtol=1e-7)
    np.testing.assert_allclose(d2 + 4.5 / t[:, None] * d1, 0.0, atol=1e-5)


def test_nesterov_closed_form_rejects_alpha_one():
    with pytest.raises(ParameterError):
        nesterov_lambda_closed_form(SolverParams(alpha=1.0), 2.0, [0.0], [1.0])


def test_zero_constraint_decouples_multiplier():
    p = ProblemInstance(QuadraticObjective([[1.0]]), LinearMap([[0.0]]), [0.0])
    s = SystemState(5.0, np.array([2.0]), np.array([3.0]), np.array([1.0]), np.array([0.5]))
    ddx, ddl = second_derivatives(p, SolverParams(alpha=3.0), s)
    assert ddx[0] == pytest.approx(-3.0 / 5.0 - 2.0)
    assert ddl[0] == pytest.approx(-3.0 / 5.0 * 0.5)
