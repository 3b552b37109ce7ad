from __future__ import annotations

import copy

import numpy as np
import pytest

from conftest import make_qp2, run
from pdavd.diagnostics import (
    AnchorPoint,
    constants,
    convergence_check,
    cumulative_integrals,
    energy,
    gap,
    kkt_residuals,
    lyapunov_report,
    quadrature_selftest,
    random_anchor_checks,
    sample_table,
    spline_sample,
    w_phi,
    worst_case_dual,
)
from pdavd.dynamics import SolverParams, SystemState, initial_state
from pdavd.errors import ParameterError
from pdavd.integrator import integrate
from pdavd.oracle import SaddlePoint, find_saddle
from pdavd.problem import LinearMap, ProblemInstance, QuadraticObjective, augmented_lagrangian


def _state(t, x, lam, u, nu):
    return SystemState(t, np.asarray(x, float), np.asarray(lam, float), np.asarray(u, float), np.asarray(nu, float))


# -- pointwise quantities ----------------------------------------------------


def test_qp2_constants_match_frozen_values(qp2, oracles):
    o = oracles["qp2"]
    s = find_saddle(qp2)
    C = constants(qp2, SolverParams(), initial_state(qp2, SolverParams()), s)
    for key in ("E0", "xi", "sigma", "C_Lag", "C_v", "C_ite", "C_sup_bound", "C_bnd", "velocity_constant", "C_gra", "C_fea"):
        assert getattr(C, key) == pytest.approx(o[key], rel=1e-12), key
    assert C.norm_A == pytest.approx(np.sqrt(2.0))
    assert gap(qp2, SolverParams(), initial_state(qp2, SolverParams()), s) == pytest.approx(o["gap_start"])


def test_constants_at_the_saddle(qp2):
    s = find_saddle(qp2)
    params = SolverParams(x0=s.x_star, lam0=s.lambda_star)
    C = constants(qp2, params, initial_state(qp2, params), s)
    assert C.E0 == 0.0 and C.C_Lag == 0.0
    assert C.C_bnd == pytest.approx(1.0 + C.xi + 0.45 * 3.0, rel=1e-14)
    assert C.velocity_constant == 0.0


def test_c_bnd_increases_with_initial_energy(qp2):
    s = find_saddle(qp2)
    prev = -np.inf
    for x1 in (0.5, 1.0, 2.0, 4.0):
        params = SolverParams(x0=[x1, 0.5])
        C = constants(qp2, params, initial_state(qp2, params), s)
        assert C.C_bnd > prev
        prev = C.C_bnd


def test_velocity_constant_infinite_on_the_boundary(qp2):
    params = SolverParams(alpha=3.0, theta=0.5)
    C = constants(qp2, params, initial_state(qp2, params), find_saddle(qp2))
    assert C.xi == 0.0 and C.velocity_constant == np.inf


def test_energy_with_explicit_anchor(qp2, oracles):
    s = find_saddle(qp2)
    st = initial_state(qp2, SolverParams())
    assert energy(qp2, SolverParams(), st, s) == pytest.approx(oracles["qp2"]["E0"], rel=1e-14)
    assert energy(qp2, SolverParams(), st, (s.x_star, s.lambda_star)) == pytest.approx(oracles["qp2"]["E0"], rel=1e-14)
    assert not AnchorPoint.of(qp2, [0.0, 0.0], [0.0]).feasible
    assert AnchorPoint.of(qp2, [1.0, 0.0], [0.0]).feasible


def test_gap_identity_and_zero_at_saddle():
    p = make_qp2()
    s = find_saddle(p)
    rng = np.random.default_rng(4)
    for _ in range(50):
        x, lam = rng.standard_normal(2) * 3, rng.standard_normal(1) * 3
        st = _state(2.0, x, lam, [0, 0], [0])
        ref = augmented_lagrangian(p, x, s.lambda_star, 1.0) - augmented_lagrangian(p, s.x_star, lam, 1.0)
        assert gap(p, SolverParams(), st, s) == pytest.approx(ref, rel=1e-12, abs=1e-14)
        assert gap(p, SolverParams(), st, s) >= -1e-14
    at = _state(5.0, s.x_star, s.lambda_star, [0, 0], [0])
    assert gap(p, SolverParams(), at, s) == 0.0
    assert energy(p, SolverParams(), at, s) == 0.0
    assert all(v == 0.0 for v in kkt_residuals(p, at, s))


def test_worst_case_dual():
    p = ProblemInstance(QuadraticObjective(np.eye(2)), LinearMap(np.eye(2)), [0.0, 0.0])
    s0 = SaddlePoint(np.zeros(2), np.zeros(2), 0.0, 0.0)
    np.testing.assert_allclose(worst_case_dual(p, _state(1, [0.6, 0.8], [0, 0], [0, 0], [0, 0]), s0), [0.6, 0.8])
    np.testing.assert_array_equal(worst_case_dual(p, _state(1, [0, 0], [0, 0], [0, 0], [0, 0]), s0), [0.0, 0.0])
    s1 = SaddlePoint(np.zeros(2), np.array([2.0, -1.0]), 0.0, 0.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        mu = worst_case_dual(p, _state(1, rng.standard_normal(2), [0, 0], [0, 0], [0, 0]), s1)
        assert np.linalg.norm(mu - s1.lambda_star) == pytest.approx(1.0)


def test_kkt_triangle_inequality(qp2_short):
    t = qp2_short.table
    assert np.all(t["r_x"] <= t["kkt_split_grad"] + t["kkt_split_alam"] + 1e-14)


# -- closed-form derivatives -------------------------------------------------


def test_closed_form_derivatives_converge_at_second_order():
    """Centered differences of W and phi' approach the closed forms with order ~2."""
    p = make_qp2()
    params = SolverParams(t_end=5.0, x0=[1.5, -0.5], lamdot0=[0.4])
    s = find_saddle(p)
    tc = 3.0
    hs = (0.1, 0.05, 0.025)
    sched = sorted({tc} | {tc + sgn * h for h in hs for sgn in (-1, 1)})
    tr = integrate(p, params, sched)
    vals = {t: w_phi(p, params, tr.state(k), s) for k, t in enumerate(tr.times)}
    c = vals[tc]
    errW, errP = [], []
    for h in hs:
        a, b = vals[tc - h], vals[tc + h]
        errW.append(abs((b.W - a.W) / (2 * h) - c.dW))
        errP.append(abs((b.dphi - a.dphi) / (2 * h) - c.ddphi))
    for err in (errW, errP):
        orders = np.log2(np.array(err[:-1]) / np.array(err[1:]))
        assert np.all(orders >= 1.9), orders


def test_w_phi_agrees_with_table(qp2_short):
    r = qp2_short
    for k in (0, 60, 119):
        wp = w_phi(r.problem, r.params, r.traj.state(k), r.saddle)
        assert wp.W == pytest.approx(r.table["W"][k], rel=1e-12, abs=1e-15)
        assert wp.dW == pytest.approx(r.table["dW"][k], rel=1e-12, abs=1e-15)
        assert wp.ddphi == pytest.approx(r.table["ddphi"][k], rel=1e-12, abs=1e-15)


def test_energy_derivative_matches_finite_differences():
    p = make_qp2()
    params = SolverParams(t_end=5.0, x0=[1.5, -0.5])
    s = find_saddle(p)
    tc, h = 2.0, 1e-3
    tr = integrate(p, params, [tc - h, tc, tc + h])
    tab = sample_table(p, params, tr, s)
    fd = (tab["E"][2] - tab["E"][0]) / (2 * h)
    assert fd == pytest.approx(tab["dE"][1], rel=1e-5)


# -- Lyapunov report ---------------------------------------------------------


def test_saddle_start_passes_with_zero_margins(qp2):
    s = find_saddle(qp2)
    r = run(qp2, SolverParams(x0=s.x_star, lam0=s.lambda_star, t_end=100.0, samples=30))
    rep = lyapunov_report(qp2, r.params, r.traj, s, r.table, random_anchors=3)
    assert rep.passed, [c.as_dict() for c in rep.checks if not c.passed]
    for name in ("energy_monotone", "velocity_bound", "bounded"):
        assert abs(rep[name].worst_margin) <= 1e-12


def test_short_qp2_run_passes_everything(qp2_short):
    r = qp2_short
    rep = lyapunov_report(r.problem, r.params, r.traj, r.saddle, r.table, random_anchors=10)
    assert rep.mode == "strict"
    assert rep.passed, [c.as_dict() for c in rep.checks if not c.passed]
    assert {c.status for c in rep.checks} == {"pass"}


def test_velocity_fault_is_caught_at_the_corrupted_sample(qp2_short):
    r = qp2_short
    k = int(np.argmax(r.traj.times * r.table["velnorm"]))
    bad = copy.deepcopy(r.traj)
    bad.xdot[k] *= 10.0
    bad.lamdot[k] *= 10.0
    C = constants(r.problem, r.params, bad.state(0), r.saddle)
    assert bad.times[k] * np.linalg.norm(np.r_[bad.xdot[k], bad.lamdot[k]]) > C.velocity_constant
    rep = lyapunov_report(r.problem, r.params, bad, r.saddle)
    assert rep["velocity_bound"].failures == [k]
    # the energy jumps up at the corrupted sample
    assert rep["energy_monotone"].failures == [k - 1]
    assert not rep.passed


def test_standard_mode_skips_strict_checks(qp2):
    r = run(qp2, SolverParams(alpha=3.0, theta=0.5, t_end=50.0, samples=40))
    rep = lyapunov_report(qp2, r.params, r.traj, r.saddle, r.table)
    assert rep.mode == "standard"
    for name in ("velocity_bound", "est_pre", "est_inq", "bounded"):
        assert rep[name].status == "skip"
    assert rep["energy_monotone"].status == "pass"


def test_zero_lipschitz_skips_second_order_checks():
    p = ProblemInstance(QuadraticObjective([[0.0]]), LinearMap([[1.0]]), [1.0])
    r = run(p, SolverParams(t_end=50.0, samples=40))
    rep = lyapunov_report(p, r.params, r.traj, r.saddle, r.table)
    assert rep["est_pre"].status == "skip" and "Lipschitz" in rep["est_pre"].note
    assert rep["velocity_bound"].status == "pass"


def test_random_anchor_bound(qp2_short):
    r = qp2_short
    (c,) = random_anchor_checks(r.problem, r.params, r.traj, r.saddle, count=10, seed=3)
    assert c.name == "random_anchor_bound" and c.status == "pass"


# -- integrals ---------------------------------------------------------------


def test_integrals_plateau_and_respect_bounds(qp2_run):
    r = qp2_run
    rep = cumulative_integrals(r.problem, r.params, r.traj, r.saddle, r.table)
    assert set(rep.required) == {"feasibility", "lagrangian_gap", "velocity", "gradient", "dual_image"}
    assert rep.passed
    for name in rep.required:
        assert rep.tail_fraction[name] < 0.05
    value, bound = rep.bounds["feasibility"]
    assert value <= bound * (1 + 1e-6)


def test_integrals_vanish_at_saddle(qp2):
    s = find_saddle(qp2)
    r = run(qp2, SolverParams(x0=s.x_star, lam0=s.lambda_star, t_end=100.0, samples=20))
    rep = cumulative_integrals(qp2, r.params, r.traj, s, r.table)
    assert all(abs(v) <= 1e-20 for v in rep.totals.values())
    assert rep.passed


def test_integrals_need_three_samples(qp2):
    tr = integrate(qp2, SolverParams(t_end=10.0, samples=2))
    with pytest.raises(ParameterError):
        cumulative_integrals(qp2, SolverParams(t_end=10.0), tr, find_saddle(qp2))


def test_boundary_parameters_only_require_feasibility_integral(qp2):
    r = run(qp2, SolverParams(alpha=3.0, theta=0.5, t_end=100.0, samples=40))
    rep = cumulative_integrals(qp2, r.params, r.traj, r.saddle, r.table)
    assert rep.required == ("feasibility",)
    assert "velocity" not in rep.bounds and "lagrangian_gap" not in rep.bounds


# -- convergence surrogate ---------------------------------------------------


def test_convergence_check_on_qp2(qp2_run):
    checks = convergence_check(qp2_run.traj, qp2_run.table)
    assert [c.name for c in checks] == ["phi_limit", "trajectory_limit"]
    assert all(c.passed for c in checks), [c.note for c in checks]


def test_convergence_check_flags_short_horizon(qp2_short):
    checks = convergence_check(qp2_short.traj, qp2_short.table)
    assert not all(c.passed for c in checks)


# -- quadrature --------------------------------------------------------------


def test_quadrature_zero_function():
    rep = quadrature_selftest(2.0, 1.0, lambda s: 0.0, 10.0)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.passed


def test_quadrature_constant_function(oracles):
    o = oracles["quadrature"]
    rep = quadrature_selftest(2.0, 1.0, lambda s: 1.0, 10.0)
    assert rep.lhs == pytest.approx(o["h1_alpha2_lhs"], rel=1e-10)
    assert rep.rhs == pytest.approx(o["h1_alpha2_rhs"], rel=1e-12)
    assert rep.passed and rep.margin > 0


def test_quadrature_sides_meet_for_integrable_h_on_long_ranges():
    h = lambda s: s**-3.0  # noqa: E731
    rep = quadrature_selftest(3.0, 1.0, h, 1e4, points=[10.0, 100.0, 1000.0])
    assert rep.passed
    assert rep.margin / rep.rhs < 0.01


@pytest.mark.parametrize("seed", [0, 1])
def test_quadrature_on_spline_samples(seed):
    h, knots = spline_sample(seed, 1.0, 10.0)
    assert min(h(s) for s in np.linspace(1.0, 10.0, 200)) >= 0.0
    rep = quadrature_selftest(4.0, 1.0, h, 10.0, points=knots)
    assert rep.passed and rep.margin >= 0


@pytest.mark.parametrize("alpha,delta,r", [(1.0, 1.0, 10.0), (0.5, 1.0, 10.0), (2.0, 0.0, 10.0), (2.0, 5.0, 1.0)])
def test_quadrature_rejects_bad_inputs(alpha, delta, r):
    with pytest.raises(ParameterError):
        quadrature_selftest(alpha, delta, lambda s: 1.0, r)
