"""Lyapunov quantities, bound constants and per-sample inequality checks.

Everything here is evaluated from sampled states; time derivatives of the
diagnostic scalars come from the ODE right-hand side (the stored second
derivatives), never from finite differences, so inequality checks do not
inherit discretization noise from the sample grid.

Notation: ``(x*, lam*)`` is a saddle point from :mod:`pdavd.oracle`,
``r = Ax - b``, ``vel = (xdot, lamdot)``, ``dz = (x - x*, lam - lam*)``,
``xi = theta*alpha - theta - 1``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate as spi
from scipy.interpolate import PchipInterpolator

from .dynamics import SolverParams, SystemState, satisfied_mode, second_derivatives, validate_params
from .errors import DimensionError, ParameterError
from .oracle import SaddlePoint
from .problem import ProblemInstance, augmented_lagrangian

__all__ = [
    "AnchorPoint",
    "ConstantsReport",
    "CheckResult",
    "LyapunovReport",
    "IntegralReport",
    "QuadratureReport",
    "energy",
    "gap",
    "w_phi",
    "worst_case_dual",
    "constants",
    "sample_table",
    "lyapunov_report",
    "random_anchor_checks",
    "cumulative_integrals",
    "kkt_residuals",
    "quadrature_selftest",
    "spline_sample",
    "convergence_check",
    "SAMPLE_COLUMNS",
]

REL_SLACK = 1e-8
REL_SLACK_2ND = 1e-6


@dataclass(frozen=True)
class AnchorPoint:
    """Reference pair ``(z, mu)`` for the energy; ``z`` should be feasible."""

    z: np.ndarray
    mu: np.ndarray
    feasible: bool = True

    @classmethod
    def of(cls, p: ProblemInstance, z, mu) -> "AnchorPoint":
        z = p.check_x(z)
        mu = p.check_lam(mu)
        scale = 1.0 + float(np.linalg.norm(p.b))
        return cls(z, mu, bool(np.linalg.norm(p.residual(z)) <= 1e-10 * scale))

    @classmethod
    def from_saddle(cls, s: SaddlePoint) -> "AnchorPoint":
        return cls(np.asarray(s.x_star), np.asarray(s.lambda_star), True)


def _xi(params):
    return params.theta * params.alpha - params.theta - 1.0


def _anchor(p, anchor):
    if isinstance(anchor, SaddlePoint):
        return AnchorPoint.from_saddle(anchor)
    if isinstance(anchor, AnchorPoint):
        return anchor
    z, mu = anchor
    return AnchorPoint.of(p, z, mu)


def energy(p: ProblemInstance, params: SolverParams, state: SystemState, anchor) -> float:
    """Energy ``theta^2 t^2 G + |v|^2/2 + (xi/2)|(x, lam) - (z, mu)|^2``.

    Parameters
    ----------
    p : ProblemInstance
    params : SolverParams
    state : SystemState
    anchor : AnchorPoint, SaddlePoint or (z, mu)

    Notes
    -----
    ``G = L_beta(x, mu) - L_beta(z, lam)`` and
    ``v = (x, lam) - (z, mu) + theta t (xdot, lamdot)``.
    """
    a = _anchor(p, anchor)
    th, t = params.theta, state.t
    G = augmented_lagrangian(p, state.x, a.mu, params.beta) - augmented_lagrangian(p, a.z, state.lam, params.beta)
    dz = np.concatenate([p.check_x(state.x) - a.z, p.check_lam(state.lam) - a.mu])
    vel = np.concatenate([p.check_x(state.xdot), p.check_lam(state.lamdot)])
    v = dz + th * t * vel
    return float(th**2 * t**2 * G + 0.5 * v @ v + 0.5 * _xi(params) * dz @ dz)


def gap(p: ProblemInstance, params: SolverParams, state: SystemState, saddle: SaddlePoint) -> float:
    """``f(x) - f* + <lam*, Ax - b> + (beta/2)|Ax - b|^2`` (nonnegative)."""
    x = p.check_x(state.x)
    r = p.residual(x)
    return float(p.f(x) - saddle.f_star + saddle.lambda_star @ r + 0.5 * params.beta * r @ r)


@dataclass(frozen=True)
class WPhi:
    W: float
    phi: float
    dphi: float
    ddphi: float
    dW: float


def w_phi(p: ProblemInstance, params: SolverParams, state: SystemState, saddle: SaddlePoint, accel=None) -> WPhi:
    """``W``, ``phi`` and their derivatives at one state.

    ``W = L_beta(x, lam*) - L_beta(x*, lam) + |vel|^2/2`` and
    ``phi = |dz|^2/2``.  ``phi'`` and ``phi''`` use the chain rule with the
    second derivatives from the ODE (or ``accel`` if supplied);
    ``W' = -(alpha/t)|vel|^2 - <lam - lam*, A xdot> + <Ax - b, lamdot>``.
    """
    if accel is None:
        accel = second_derivatives(p, params, state)
    x, lam = p.check_x(state.x), p.check_lam(state.lam)
    u, nu = p.check_x(state.xdot), p.check_lam(state.lamdot)
    ddx, ddl = accel
    dx, dl = x - saddle.x_star, lam - saddle.lambda_star
    r = p.residual(x)
    vel2 = u @ u + nu @ nu
    G = p.f(x) - saddle.f_star + saddle.lambda_star @ r + 0.5 * params.beta * r @ r
    W = G + 0.5 * vel2
    phi = 0.5 * (dx @ dx + dl @ dl)
    dphi = dx @ u + dl @ nu
    ddphi = dx @ ddx + dl @ ddl + vel2
    dW = -(params.alpha / state.t) * vel2 - dl @ (p.A @ u) + r @ nu
    return WPhi(float(W), float(phi), float(dphi), float(ddphi), float(dW))


def worst_case_dual(p: ProblemInstance, state: SystemState, saddle: SaddlePoint) -> np.ndarray:
    """``lam* + (Ax - b)/|Ax - b|``, or ``lam*`` at feasible ``x``."""
    r = p.residual(state.x)
    nr = np.linalg.norm(r)
    if nr == 0.0:
        return np.array(saddle.lambda_star, dtype=float)
    return saddle.lambda_star + r / nr


def kkt_residuals(p: ProblemInstance, state: SystemState, saddle: SaddlePoint):
    """``(|grad f(x) + A^T lam|, |Ax - b|, |A^T(lam - lam*)|, |grad f(x) - grad f(x*)|)``."""
    x, lam = p.check_x(state.x), p.check_lam(state.lam)
    g = p.grad_f(x)
    return (
        float(np.linalg.norm(g + p.constraint.adjoint(lam))),
        float(np.linalg.norm(p.residual(x))),
        float(np.linalg.norm(p.constraint.adjoint(lam - saddle.lambda_star))),
        float(np.linalg.norm(g - p.grad_f(saddle.x_star))),
    )


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantsReport:
    """Bound constants evaluated at the initial state.

    ``C_sup_bound`` is the upper bound ``theta^2 t0^2 C_Lag + C_v + xi C_ite``
    on the supremum of the initial energy over anchors ``(x*, mu)`` with
    ``|mu - lam*| <= 1``, not the supremum itself.
    """

    xi: float
    sigma: float
    E0: float
    C_Lag: float
    C_v: float
    C_ite: float
    C_sup_bound: float
    C_bnd: float
    velocity_constant: float
    lambda_star_norm: float
    norm_A: float
    lipschitz: float
    C_gra: float
    C_fea: float

    def as_dict(self):
        return asdict(self)


def constants(p: ProblemInstance, params: SolverParams, state0: SystemState, saddle: SaddlePoint) -> ConstantsReport:
    """Evaluate the constants entering the rate bounds.

    Notes
    -----
    ``C_Lag = |f(x0) - f*| + (1 + |lam*|)|Ax0 - b| + (beta/2)|Ax0 - b|^2``,
    ``C_v = |dz0 + theta t0 vel0|^2 + 1``, ``C_ite = |dz0|^2 + 1``,
    ``C_bnd = C_sup_bound + 2 E0 + theta(alpha - 1)``.  The velocity constant
    ``(1/theta)(1/sqrt(xi) + 1) sqrt(2 E0)`` is infinite when ``xi = 0``.
    ``C_gra = [2 - 1/(2 l)]_+`` is ``nan`` when ``l = 0``.
    """
    th, a, b = params.theta, params.alpha, params.beta
    xi = _xi(params)
    xi = 0.0 if abs(xi) < 1e-12 else xi
    sigma = (1.0 - 2.0 * th) / th
    t0 = state0.t
    x0 = p.check_x(state0.x)
    r0 = p.residual(x0)
    nr0 = float(np.linalg.norm(r0))
    lsn = float(np.linalg.norm(saddle.lambda_star))
    dz = np.concatenate([x0 - saddle.x_star, p.check_lam(state0.lam) - saddle.lambda_star])
    vel = np.concatenate([p.check_x(state0.xdot), p.check_lam(state0.lamdot)])
    C_Lag = abs(p.f(x0) - saddle.f_star) + (1.0 + lsn) * nr0 + 0.5 * b * nr0**2
    w = dz + th * t0 * vel
    C_v = float(w @ w) + 1.0
    C_ite = float(dz @ dz) + 1.0
    C_sup = th**2 * t0**2 * C_Lag + C_v + xi * C_ite
    E0 = energy(p, params, state0, saddle)
    C_bnd = C_sup + 2.0 * E0 + th * (a - 1.0)
    vel_c = (1.0 / th) * (1.0 / np.sqrt(xi) + 1.0) * np.sqrt(2.0 * E0) if xi > 0 else float("inf")
    ell = p.lipschitz
    nA = p.norm_A
    C_gra = max(2.0 - 1.0 / (2.0 * ell), 0.0) if ell > 0 else float("nan")
    C_fea = max(2.0 * b**2 * nA**2 + 1.0 - b / 2.0, 0.0)
    return ConstantsReport(
        float(xi), float(sigma), float(E0), float(C_Lag), float(C_v), float(C_ite), float(C_sup), float(C_bnd),
        float(vel_c), lsn, float(nA), float(ell), float(C_gra), float(C_fea),
    )


# ---------------------------------------------------------------------------
# per-sample table
# ---------------------------------------------------------------------------

SAMPLE_COLUMNS = (
    "E", "gap", "feas", "fgap", "velnorm", "W", "phi", "r_x", "r_lambda", "kkt_split_grad", "kkt_split_alam",
)


def sample_table(p: ProblemInstance, params: SolverParams, traj, saddle: SaddlePoint) -> dict:
    """Diagnostic scalars at every sample of ``traj``.

    Returns a dict of 1-d arrays keyed by name.  Besides :data:`SAMPLE_COLUMNS`
    it holds ``lag_gap`` (``Lambda(x, lam*) - Lambda(x*, lam)``), ``dphi``,
    ``ddphi``, ``dW``, ``dE`` (analytic energy derivative), ``dE_bound``
    (its upper bound from the decrease inequality), ``dist2``
    (``|dz|^2``), ``vnorm`` (``|v|``), ``est_pre`` and ``est_pre_scale``,
    ``est_inq_lhs``, ``est_inq_rhs`` and ``est_inq_scale``.
    """
    th, a, b = params.theta, params.alpha, params.beta
    xi = _xi(params)
    ell = p.lipschitz
    nA = p.norm_A
    C_gra = max(2.0 - 1.0 / (2.0 * ell), 0.0) if ell > 0 else np.nan
    C_fea = max(2.0 * b**2 * nA**2 + 1.0 - b / 2.0, 0.0)
    A = p.A
    xs, ls = saddle.x_star, saddle.lambda_star
    gstar = p.grad_f(xs)
    N = len(traj)
    keys = SAMPLE_COLUMNS + (
        "lag_gap", "dphi", "ddphi", "dW", "dE", "dE_bound", "dist2", "vnorm",
        "est_pre", "est_pre_scale", "est_inq_lhs", "est_inq_rhs", "est_inq_scale",
    )
    out = {k: np.empty(N) for k in keys}
    for k in range(N):
        t = float(traj.times[k])
        x, lam, u, nu = traj.x[k], traj.lam[k], traj.xdot[k], traj.lamdot[k]
        ddx, ddl = traj.xddot[k], traj.lamddot[k]
        r = A @ x - p.b
        g = p.grad_f(x)
        fg = p.f(x) - saddle.f_star
        lag = fg + ls @ r
        G = lag + 0.5 * b * r @ r
        dx, dl = x - xs, lam - ls
        dist2 = dx @ dx + dl @ dl
        vel2 = u @ u + nu @ nu
        v2 = (dx + th * t * u) @ (dx + th * t * u) + (dl + th * t * nu) @ (dl + th * t * nu)
        E = th**2 * t**2 * G + 0.5 * v2 + 0.5 * xi * dist2
        W = G + 0.5 * vel2
        phi = 0.5 * dist2
        dphi = dx @ u + dl @ nu
        acc_dz = dx @ ddx + dl @ ddl
        ddphi = acc_dz + vel2
        Au = A @ u
        dW = -(a / t) * vel2 - dl @ Au + r @ nu
        # energy derivative via the chain rule; d/dt G = <grad f + A^T lam* + beta A^T r, xdot>
        dG = (g + A.T @ (ls + b * r)) @ u
        dv_dot = (1.0 + th) * (dphi + th * t * vel2) + th * t * (acc_dz + th * t * (u @ ddx + nu @ ddl))
        dE = 2.0 * th**2 * t * G + th**2 * t**2 * dG + dv_dot + xi * dphi
        dE_bound = (2.0 * th - 1.0) * th * t * G - 0.5 * b * th * t * (r @ r) - xi * th * t * vel2
        gd = g - gstar
        gd2 = gd @ gd
        Atdl = A.T @ dl
        alam2 = Atdl @ Atdl
        # est:pre  phi'' + (a/t) phi' + th t W' + |grad f - grad f*|^2/(2l) + (b/2)|r|^2 <= 0
        pre_terms = (ddphi, (a / t) * dphi, th * t * dW, gd2 / (2.0 * ell) if ell > 0 else np.nan, 0.5 * b * (r @ r))
        est_pre = sum(pre_terms)
        # est:inq
        dvel2 = 2.0 * (u @ ddx + nu @ ddl)
        d_talam = alam2 + 2.0 * t * (Atdl @ (A.T @ nu))
        inq_terms_l = (
            ddphi, (a / t) * dphi, th * t * dW, (a / t) * dvel2, th * d_talam, 2.0 * (ddx + (a / t) * u) @ Atdl,
        )
        inq_terms_r = ((th - 1.0) * alam2, C_gra * gd2, C_fea * (r @ r))
        out["E"][k] = E
        out["gap"][k] = G
        out["feas"][k] = np.sqrt(r @ r)
        out["fgap"][k] = fg
        out["velnorm"][k] = np.sqrt(vel2)
        out["W"][k] = W
        out["phi"][k] = phi
        out["r_x"][k] = np.linalg.norm(g + A.T @ lam)
        out["r_lambda"][k] = out["feas"][k]
        out["kkt_split_grad"][k] = np.sqrt(gd2)
        out["kkt_split_alam"][k] = np.sqrt(alam2)
        out["lag_gap"][k] = lag
        out["dphi"][k] = dphi
        out["ddphi"][k] = ddphi
        out["dW"][k] = dW
        out["dE"][k] = dE
        out["dE_bound"][k] = dE_bound
        out["dist2"][k] = dist2
        out["vnorm"][k] = np.sqrt(v2)
        out["est_pre"][k] = est_pre
        out["est_pre_scale"][k] = 1.0 + sum(abs(v) for v in pre_terms)
        out["est_inq_lhs"][k] = sum(inq_terms_l)
        out["est_inq_rhs"][k] = sum(inq_terms_r)
        out["est_inq_scale"][k] = 1.0 + sum(abs(v) for v in inq_terms_l) + sum(abs(v) for v in inq_terms_r)
    return out


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    """Outcome of one inequality checked at every sample.

    ``worst_margin`` is ``min_k (rhs_k - lhs_k)`` before slack; the check
    passes when ``lhs_k <= rhs_k + slack_k`` for all ``k``.
    """

    name: str
    claim: str
    status: str
    worst_margin: float = float("nan")
    worst_index: int = -1
    failures: list = field(default_factory=list)
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def as_dict(self):
        return {
            "name": self.name,
            "claim": self.claim,
            "status": self.status,
            "worst_margin": self.worst_margin,
            "worst_index": self.worst_index,
            "n_failures": len(self.failures),
            "note": self.note,
        }


def _check(name, claim, lhs, rhs, slack, note=""):
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float) * np.ones_like(lhs)
    slack = np.asarray(slack, dtype=float) * np.ones_like(lhs)
    margin = rhs - lhs
    with np.errstate(invalid="ignore"):
        bad = ~(lhs <= rhs + slack)
    finite_margin = np.where(np.isnan(margin), -np.inf, margin)
    i = int(np.argmin(finite_margin)) if margin.size else -1
    return CheckResult(
        name, claim, "fail" if np.any(bad) else "pass",
        float(margin[i]) if i >= 0 else float("nan"), i, [int(j) for j in np.flatnonzero(bad)], note,
    )


def _skip(name, claim, note):
    return CheckResult(name, claim, "skip", note=note)


@dataclass
class LyapunovReport:
    """All per-sample checks of one trajectory plus the constants used."""

    checks: list
    constants: ConstantsReport
    mode: str | None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {
            "mode": self.mode,
            "passed": self.passed,
            "constants": self.constants.as_dict(),
            "checks": [c.as_dict() for c in self.checks],
        }


def lyapunov_report(
    p: ProblemInstance, params: SolverParams, traj, saddle: SaddlePoint, table: dict | None = None, random_anchors: int = 0, seed: int = 0,
) -> LyapunovReport:
    """Check every sampled bound along ``traj``.

    Checks (name: inequality)

    - ``energy_monotone``: ``E(t_{k+1}) <= E(t_k)``, slack ``1e-8 E(t0)``
    - ``energy_rate``: analytic ``E'`` below the decrease bound
      ``(2 theta - 1) theta t G - (beta theta t/2)|r|^2 - xi theta t |vel|^2``
    - ``velocity_bound`` (strict): ``t |vel| <= (1/theta)(1/sqrt(xi) + 1) sqrt(2 E0)``
    - ``gap_rate``: ``Lambda(x, lam*) - Lambda(x*, lam) + |r| <= C_bnd/(theta^2 t^2)``
    - ``objective_rate``: ``-|lam*| C_bnd/(theta^2 t^2) <= f - f* <= (1 + |lam*|) C_bnd/(theta^2 t^2)``
    - ``est_pre`` (strict, ``l > 0``): ``phi'' + (alpha/t) phi' + theta t W'
      + |grad f - grad f*|^2/(2l) + (beta/2)|r|^2 <= 0``
    - ``est_inq`` (strict, ``l > 0``): the combined inequality with the
      ``[.]_+`` constants ``C_gra`` and ``C_fea``
    - ``bounded`` (strict): ``|dz|^2 <= 2 E0/xi``

    First-order checks carry slack ``1e-8 (1 + magnitude)``; checks that
    involve second derivatives carry ``1e-6 (1 + sum of |terms|)``.

    Parameters
    ----------
    random_anchors : int
        If positive, also run :func:`random_anchor_checks` with this many
        anchors.
    """
    validate_params(params, "standard")
    mode = satisfied_mode(params)
    strict = mode == "strict"
    if table is None:
        table = sample_table(p, params, traj, saddle)
    C = constants(p, params, traj.state(0), saddle)
    t = traj.times
    th = params.theta
    checks = []

    E = table["E"]
    E0 = C.E0
    sl = REL_SLACK * (E0 if E0 > 0 else 1.0)
    checks.append(_check("energy_monotone", "energy anchored at the saddle is nonincreasing", E[1:], E[:-1], sl))
    checks.append(
        _check(
            "energy_rate", "energy derivative is below the decrease bound", table["dE"], table["dE_bound"],
            REL_SLACK_2ND * (1.0 + np.abs(table["dE"]) + np.abs(table["dE_bound"])),
        )
    )
    if strict:
        lhs = t * table["velnorm"]
        checks.append(
            _check("velocity_bound", "t |vel| bounded by the velocity constant", lhs, C.velocity_constant,
                   REL_SLACK * (1.0 + C.velocity_constant))
        )
    else:
        checks.append(_skip("velocity_bound", "t |vel| bounded by the velocity constant", "needs strict parameters"))

    bound = C.C_bnd / (th**2 * t**2)
    lhs = table["lag_gap"] + table["feas"]
    checks.append(_check("gap_rate", "Lagrangian gap plus feasibility <= C_bnd/(theta t)^2", lhs, bound,
                         REL_SLACK * (1.0 + np.maximum(np.abs(lhs), bound))))
    fg = table["fgap"]
    up = (1.0 + C.lambda_star_norm) * bound
    lo = C.lambda_star_norm * bound
    c_up = _check("objective_rate_upper", "", fg, up, REL_SLACK * (1.0 + np.maximum(np.abs(fg), up)))
    c_lo = _check("objective_rate_lower", "", -fg, lo, REL_SLACK * (1.0 + np.maximum(np.abs(fg), lo)))
    both = c_up if c_up.worst_margin <= c_lo.worst_margin else c_lo
    checks.append(
        CheckResult(
            "objective_rate", "objective gap within the two-sided C_bnd/(theta t)^2 envelope",
            "fail" if (c_up.status == "fail" or c_lo.status == "fail") else "pass",
            both.worst_margin, both.worst_index, sorted(set(c_up.failures) | set(c_lo.failures)),
        )
    )

    if strict and p.lipschitz > 0:
        checks.append(_check("est_pre", "phi'' + (alpha/t)phi' + theta t W' + gradient and feasibility terms <= 0",
                             table["est_pre"], 0.0, REL_SLACK_2ND * table["est_pre_scale"]))
        checks.append(_check("est_inq", "combined second-order inequality for phi and W",
                             table["est_inq_lhs"], table["est_inq_rhs"], REL_SLACK_2ND * table["est_inq_scale"]))
    else:
        why = "needs strict parameters" if not strict else "needs a positive gradient Lipschitz constant"
        checks.append(_skip("est_pre", "phi'' + (alpha/t)phi' + theta t W' + gradient and feasibility terms <= 0", why))
        checks.append(_skip("est_inq", "combined second-order inequality for phi and W", why))

    if strict:
        rb = 2.0 * E0 / C.xi
        checks.append(_check("bounded", "|(x, lam) - (x*, lam*)|^2 <= 2 E0 / xi", table["dist2"], rb,
                             REL_SLACK * (1.0 + rb)))
    else:
        checks.append(_skip("bounded", "|(x, lam) - (x*, lam*)|^2 <= 2 E0 / xi", "needs strict parameters"))

    if random_anchors > 0:
        checks.extend(random_anchor_checks(p, params, traj, saddle, random_anchors, seed, C))
    return LyapunovReport(checks, C, mode)


def random_anchor_checks(p, params, traj, saddle, count=10, seed=0, C=None):
    """Energy estimate for anchors ``(x*, mu)`` with ``mu`` drawn uniformly from ``B(lam*; 1)``.

    Each anchored energy must stay below
    ``2 E0 + theta(alpha - 1) + theta^2 t^2 <mu - lam*, Ax - b>`` where ``E0``
    is the saddle-anchored initial energy.  Monotonicity is not checked for
    these anchors: with ``mu != lam*`` the gap term can be negative, and the
    decrease inequality then gives no sign.
    """
    if C is None:
        C = constants(p, params, traj.state(0), saddle)
    rng = np.random.default_rng(seed)
    th, a = params.theta, params.alpha
    m = p.m
    fails = []
    margin = np.inf
    r = traj.x @ p.A.T - p.b
    for _ in range(count):
        d = rng.standard_normal(m)
        nd = np.linalg.norm(d)
        d = d / nd * rng.uniform() ** (1.0 / max(m, 1)) if nd > 0 else d
        anc = AnchorPoint(saddle.x_star, saddle.lambda_star + d, True)
        E = np.array([energy(p, params, s, anc) for s in traj.states()])
        bound = 2.0 * C.E0 + th * (a - 1.0) + th**2 * traj.times**2 * (r @ d)
        cb = _check("", "", E, bound, REL_SLACK * (1.0 + np.abs(bound)))
        margin = min(margin, cb.worst_margin)
        fails += cb.failures
    return [
        CheckResult("random_anchor_bound", f"energy estimate for {count} anchors mu in B(lam*, 1)",
                    "fail" if fails else "pass", float(margin), -1, sorted(set(fails))),
    ]


# ---------------------------------------------------------------------------
# integrals
# ---------------------------------------------------------------------------


@dataclass
class IntegralReport:
    """Cumulative trapezoid integrals of the five integrable quantities.

    ``tail_fraction[name]`` is the share of the total accumulated over the
    last decade of the time span; ``bounds[name]`` holds ``(scaled value,
    bound)`` for integrals with an explicit bound.  Only the integrals in
    ``required`` (those known to be finite for the parameters used) must
    plateau; the others are reported for information.
    """

    times: np.ndarray
    cumulative: dict
    totals: dict
    tail_fraction: dict
    bounds: dict
    passed: bool
    tail_threshold: float = 0.05
    required: tuple = ()

    def as_dict(self):
        return {
            "required": list(self.required),
            "totals": self.totals,
            "tail_fraction": self.tail_fraction,
            "bounds": {k: {"value": v[0], "bound": v[1], "ok": v[0] <= v[1] * (1 + 1e-6)} for k, v in self.bounds.items()},
            "tail_threshold": self.tail_threshold,
            "passed": self.passed,
        }


INTEGRANDS = ("feasibility", "lagrangian_gap", "velocity", "gradient", "dual_image")


def cumulative_integrals(p, params, traj, saddle, table=None, tail_threshold=0.05) -> IntegralReport:
    """Trapezoid integrals of ``t|r|^2``, ``t(Lagrangian gap)``, ``t|vel|^2``,
    ``t|grad f - grad f*|^2`` and ``t|A^T(lam - lam*)|^2``.

    Explicit bounds: ``beta int t|r|^2 <= 2 E0/theta`` (``beta > 0``),
    ``(1 - 2 theta) int t gap <= E0/theta`` and ``xi int t|vel|^2 <= E0/theta``.

    Finiteness is known for the feasibility integral when ``beta > 0``, the
    gap integral when ``theta < 1/2``, the velocity integral when ``xi > 0``
    and the gradient and dual-image integrals under the strict assumption
    with ``l > 0``; only these must show a plateau.
    """
    if len(traj) < 3:
        raise ParameterError("need at least 3 samples")
    if table is None:
        table = sample_table(p, params, traj, saddle)
    t = traj.times
    E0 = float(table["E"][0])
    th = params.theta
    xi = _xi(params)
    vals = {
        "feasibility": t * table["feas"] ** 2,
        "lagrangian_gap": t * table["lag_gap"],
        "velocity": t * table["velnorm"] ** 2,
        "gradient": t * table["kkt_split_grad"] ** 2,
        "dual_image": t * table["kkt_split_alam"] ** 2,
    }
    cum = {k: spi.cumulative_trapezoid(v, t, initial=0.0) for k, v in vals.items()}
    totals = {k: float(c[-1]) for k, c in cum.items()}
    t_cut = t[-1] / 10.0
    i_cut = int(np.searchsorted(t, t_cut * (1 - 1e-12)))
    tails = {}
    for k, c in cum.items():
        tot = c[-1]
        tails[k] = float((tot - c[i_cut]) / tot) if tot > 0 else 0.0
    bounds = {}
    if params.beta > 0:
        bounds["feasibility"] = (params.beta * totals["feasibility"], 2.0 * E0 / th)
    if 1.0 - 2.0 * th > 0:
        bounds["lagrangian_gap"] = ((1.0 - 2.0 * th) * totals["lagrangian_gap"], E0 / th)
    if xi > 0:
        bounds["velocity"] = (xi * totals["velocity"], E0 / th)
    strict = satisfied_mode(params) == "strict" and p.lipschitz > 0
    flags = {
        "feasibility": params.beta > 0,
        "lagrangian_gap": 1.0 - 2.0 * th > 0,
        "velocity": xi > 1e-12,
        "gradient": strict,
        "dual_image": strict,
    }
    required = tuple(k for k in INTEGRANDS if flags[k])
    ok = all(tails[k] < tail_threshold for k in required) and all(
        val <= bd * (1.0 + 1e-6) for val, bd in bounds.values()
    )
    return IntegralReport(t, cum, totals, tails, bounds, bool(ok), tail_threshold, required)


# ---------------------------------------------------------------------------
# quadrature property
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureReport:
    """``lhs = int_delta^r t^-alpha int_delta^t s^(alpha-1) h(s) ds dt`` versus
    ``rhs = int_delta^r h / (alpha - 1)``."""

    lhs: float
    rhs: float
    margin: float
    error_estimate: float
    passed: bool


def quadrature_selftest(alpha: float, delta: float, h, r: float, points=None) -> QuadratureReport:
    """Check the weighted double-integral inequality for a nonnegative ``h``.

    Both sides use adaptive Gauss-Kronrod quadrature; the inner integral is
    nested inside the outer one so no closed form enters the check.

    Parameters
    ----------
    alpha : float
        ``alpha > 1``.
    delta, r : float
        ``0 < delta < r``.
    h : callable
        Nonnegative continuous function on ``[delta, r]``.
    points : sequence of float, optional
        Break points (e.g. spline knots) passed to the quadrature.
    """
    if not alpha > 1:
        raise ParameterError("alpha must exceed 1")
    if not (0 < delta < r):
        raise ParameterError("need 0 < delta < r")
    pts = None if points is None else [p for p in points if delta < p < r]
    kw = dict(epsabs=1e-12, epsrel=1e-10, limit=400)

    def quad(f, a, b):
        brk = [p for p in (pts or []) if a < p < b]
        return spi.quad(f, a, b, points=brk or None, **kw)

    def inner(t):
        if t <= delta:
            return 0.0
        return quad(lambda s: s ** (alpha - 1.0) * h(s), delta, t)[0]

    lhs, e1 = quad(lambda t: t ** (-alpha) * inner(t), delta, r)
    H, e2 = quad(h, delta, r)
    rhs = H / (alpha - 1.0)
    err = e1 + e2 / (alpha - 1.0)
    margin = rhs - lhs
    return QuadratureReport(float(lhs), float(rhs), float(margin), float(err), bool(margin >= -err))


def spline_sample(seed: int, delta: float, r: float, knots: int = 9):
    """Seeded nonnegative piecewise-cubic function on ``[delta, r]``.

    Knot values are uniform on ``[0, 1)``; monotone cubic (PCHIP) interpolation
    keeps the function between neighbouring knot values, hence nonnegative.

    Returns
    -------
    (callable, ndarray)
        The function and its knots.
    """
    rng = np.random.default_rng(seed)
    xk = np.linspace(delta, r, knots)
    yk = rng.uniform(0.0, 1.0, knots)
    f = PchipInterpolator(xk, yk, extrapolate=False)
    return (lambda s: float(max(f(s), 0.0))), xk


def convergence_check(traj, table: dict, rel: float = 1e-4) -> list:
    """Finite-horizon surrogate for convergence of the trajectory.

    Over the last sampled decade, the oscillation (max - min) of ``phi`` and
    of ``|(x, lam)(t) - (x, lam)(t_end)|`` must not exceed
    ``rel (1 + initial value)``.
    """
    t = traj.times
    last = t >= t[-1] / 10.0 * (1 - 1e-12)
    phi = table["phi"]
    z = np.hstack([traj.x, traj.lam])
    dist = np.linalg.norm(z - z[-1], axis=1)
    out = []
    for name, claim, series in (
        ("phi_limit", "phi settles over the last decade", phi),
        ("trajectory_limit", "(x, lam) settles over the last decade", dist),
    ):
        osc = float(np.max(series[last]) - np.min(series[last]))
        tol = rel * (1.0 + float(series[0]))
        out.append(CheckResult(name, claim, "pass" if osc <= tol else "fail", tol - osc, -1,
                               [] if osc <= tol else [int(np.argmax(last))], f"oscillation {osc:.3e}, tolerance {tol:.3e}"))
    return out


def _check_dims(p, traj):
    if traj.x.shape[1] != p.n or traj.lam.shape[1] != p.m:
        raise DimensionError("trajectory does not match problem dimensions")
