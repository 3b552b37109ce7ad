"""Primal-dual inertial system with vanishing damping, in first-order form.

With ``y = xdot`` and ``nu = lamdot`` the system reads::

    xdot   = y
    lamdot = nu
    ydot   = -(alpha/t) y - grad f(x) - A^T(lam + theta t nu) - beta A^T(Ax - b)
    nudot  = -(alpha/t) nu + A(x + theta t y) - b

The parameters must satisfy ``alpha >= 3``, ``beta >= 0`` and
``1/2 >= theta >= 1/(alpha - 1)`` ("standard" validation); the trajectory
convergence results additionally need strict inequalities and a gradient
Lipschitz constant ("strict" validation).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, ParameterError
from .problem import ProblemInstance

__all__ = [
    "SolverParams",
    "SystemState",
    "DerivedXi",
    "validate_params",
    "satisfied_mode",
    "initial_state",
    "vector_field",
    "second_derivatives",
    "first_order_rhs",
    "lipschitz_bound_LF",
    "nesterov_lambda_closed_form",
]

# comparisons at the equality edges of the non-strict assumption tolerate
# floating-point representation error of the inputs
_EDGE = 1e-12


@dataclass(frozen=True)
class SolverParams:
    """Damping, extrapolation and penalty coefficients plus run settings.

    Initial positions and velocities default to zero vectors of the problem's
    dimensions when left as ``None``.
    """

    alpha: float = 4.0
    beta: float = 1.0
    theta: float = 0.45
    t0: float = 1.0
    t_end: float = 1e4
    x0: np.ndarray | None = None
    lam0: np.ndarray | None = None
    xdot0: np.ndarray | None = None
    lamdot0: np.ndarray | None = None
    atol: float = 1e-12
    rtol: float = 1e-12
    samples: int = 200
    spacing: str = "log"

    def with_(self, **kw) -> "SolverParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class SystemState:
    """Phase point ``(x, lam, xdot, lamdot)`` at time ``t``."""

    t: float
    x: np.ndarray
    lam: np.ndarray
    xdot: np.ndarray
    lamdot: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.lam, self.xdot, self.lamdot])

    @classmethod
    def from_vector(cls, t, s, n, m) -> "SystemState":
        s = np.asarray(s, dtype=float)
        if s.size != 2 * (n + m):
            raise DimensionError(f"state vector has length {s.size}, expected {2 * (n + m)}")
        return cls(float(t), s[:n], s[n : n + m], s[n + m : 2 * n + m], s[2 * n + m :])


@dataclass(frozen=True)
class DerivedXi:
    """``xi = theta*alpha - theta - 1`` and ``sigma = (1 - 2 theta)/theta``."""

    xi: float
    sigma: float
    mode: str


def _bounds_messages(alpha, beta, theta, strict):
    bad = []
    if strict:
        if not alpha > 3:
            bad.append(f"alpha > 3 violated (alpha={alpha})")
        if not theta < 0.5:
            bad.append(f"theta < 1/2 violated (theta={theta})")
        if alpha > 1 and not theta > 1.0 / (alpha - 1.0):
            bad.append(f"theta > 1/(alpha-1) violated (theta={theta}, 1/(alpha-1)={1.0 / (alpha - 1.0):.6g})")
    else:
        if not alpha >= 3 - _EDGE:
            bad.append(f"alpha >= 3 violated (alpha={alpha})")
        if not theta <= 0.5 + _EDGE:
            bad.append(f"theta <= 1/2 violated (theta={theta})")
        if alpha > 1 and not theta >= 1.0 / (alpha - 1.0) - _EDGE:
            bad.append(f"theta >= 1/(alpha-1) violated (theta={theta}, 1/(alpha-1)={1.0 / (alpha - 1.0):.6g})")
    if not beta >= 0:
        bad.append(f"beta >= 0 violated (beta={beta})")
    return bad


def validate_params(params: SolverParams, mode: str = "standard") -> DerivedXi:
    """Check the parameters against the standard or strict assumption.

    Parameters
    ----------
    params : SolverParams
    mode : {"standard", "strict"}

    Returns
    -------
    DerivedXi

    Raises
    ------
    ParameterError
        Naming every violated bound.

    Examples
    --------
    >>> round(validate_params(SolverParams(alpha=4, theta=0.45, beta=1), "strict").xi, 12)
    0.35
    """
    if mode not in ("standard", "strict"):
        raise ParameterError(f"unknown validation mode {mode!r}")
    a, b, th = float(params.alpha), float(params.beta), float(params.theta)
    bad = []
    if not params.t0 > 0:
        bad.append(f"t0 > 0 violated (t0={params.t0})")
    if not params.t_end > params.t0:
        bad.append(f"t_end > t0 violated (t_end={params.t_end})")
    if not (params.atol > 0 and params.rtol > 0):
        bad.append("tolerances must be positive")
    if not all(np.isfinite([a, b, th])):
        bad.append("alpha, beta, theta must be finite")
    bad += _bounds_messages(a, b, th, mode == "strict")
    if bad:
        raise ParameterError(f"{mode} assumption: " + "; ".join(bad))
    xi = th * a - th - 1.0
    sigma = (1.0 - 2.0 * th) / th
    # clamp representation noise at the equality edge (alpha=3, theta=1/2)
    return DerivedXi(max(xi, 0.0) if xi > -_EDGE else xi, max(sigma, 0.0) if sigma > -_EDGE else sigma, mode)


def satisfied_mode(params: SolverParams) -> str | None:
    """Strongest validation mode the parameters satisfy, or ``None``."""
    for mode in ("strict", "standard"):
        try:
            validate_params(params, mode)
        except ParameterError:
            continue
        return mode
    return None


def initial_state(p: ProblemInstance, params: SolverParams) -> SystemState:
    """Initial phase point, filling unspecified vectors with zeros."""

    def get(v, size, name):
        if v is None:
            return np.zeros(size)
        a = np.asarray(v, dtype=float).reshape(-1)
        if a.size != size:
            raise DimensionError(f"{name} has length {a.size}, expected {size}")
        return a

    return SystemState(
        float(params.t0),
        get(params.x0, p.n, "x0"),
        get(params.lam0, p.m, "lam0"),
        get(params.xdot0, p.n, "xdot0"),
        get(params.lamdot0, p.m, "lamdot0"),
    )


def _accelerations(p, alpha, beta, theta, t, x, lam, u, nu):
    if not t > 0:
        raise ParameterError(f"time must be positive (t={t})")
    A = p.A
    r = A @ x - p.b
    ddx = -(alpha / t) * u - p.grad_f(x) - A.T @ (lam + theta * t * nu + beta * r)
    ddl = -(alpha / t) * nu + r + theta * t * (A @ u)
    return ddx, ddl


def vector_field(p: ProblemInstance, params: SolverParams, state: SystemState):
    """Right-hand side of the first-order system.

    Returns
    -------
    tuple of ndarray
        ``(xdot, lamdot, ydot, nudot)``.

    Raises
    ------
    ParameterError
        If ``state.t <= 0``.
    """
    x = p.check_x(state.x)
    lam = p.check_lam(state.lam)
    u = p.check_x(state.xdot)
    nu = p.check_lam(state.lamdot)
    ddx, ddl = _accelerations(p, params.alpha, params.beta, params.theta, state.t, x, lam, u, nu)
    return u.copy(), nu.copy(), ddx, ddl


def second_derivatives(p: ProblemInstance, params: SolverParams, state: SystemState):
    """``(xddot, lamddot)`` implied by the system at ``state``."""
    return vector_field(p, params, state)[2:]


def first_order_rhs(p: ProblemInstance, params: SolverParams):
    """Flat-vector right-hand side ``fun(t, s)`` for layout ``[x, lam, y, nu]``."""
    n, m = p.n, p.m
    alpha, beta, theta = float(params.alpha), float(params.beta), float(params.theta)

    def fun(t, s):
        x = s[:n]
        lam = s[n : n + m]
        u = s[n + m : 2 * n + m]
        nu = s[2 * n + m :]
        ddx, ddl = _accelerations(p, alpha, beta, theta, t, x, lam, u, nu)
        return np.concatenate([u, nu, ddx, ddl])

    return fun


def lipschitz_bound_LF(p: ProblemInstance, params: SolverParams, t1: float, t2: float, delta: float) -> float:
    """Lipschitz constant of the vector field on ``[t1, t2] x B(0; delta)^4``.

    ``sqrt(2(1 + a/t1 + th t2 |A|)^2 + (b|A|^2 + |A| + l)^2 + |A|^2 + 4 d^2 (a/t1^2 + th |A|)^2)``
    where the norm on the domain is the Euclidean norm of ``(t, x, lam, y, nu)``.
    """
    if not (params.t0 <= t1 < t2):
        raise ParameterError(f"need t0 <= t1 < t2 (got t0={params.t0}, t1={t1}, t2={t2})")
    if not delta > 0:
        raise ParameterError("delta must be positive")
    a, b, th = params.alpha, params.beta, params.theta
    nA = p.norm_A
    ell = p.lipschitz
    return float(
        np.sqrt(
            2.0 * (1.0 + a / t1 + th * t2 * nA) ** 2
            + (b * nA**2 + nA + ell) ** 2
            + nA**2
            + 4.0 * delta**2 * (a / t1**2 + th * nA) ** 2
        )
    )


def nesterov_lambda_closed_form(params: SolverParams, t, lam0=None, lamdot0=None):
    """Multiplier trajectory when ``A = 0`` and ``b = 0``.

    The dual equation reduces to ``lamddot + (alpha/t) lamdot = 0``, whose
    solution is
    ``lam(t) = lamdot0 t0^alpha/(1-alpha) t^(1-alpha) + lam0 - lamdot0 t0/(1-alpha)``.

    Parameters
    ----------
    params : SolverParams
    t : float or array_like
    lam0, lamdot0 : array_like, optional
        Override ``params.lam0`` / ``params.lamdot0``.

    Returns
    -------
    ndarray
        Shape ``(len(t), m)`` for array ``t``, ``(m,)`` for scalar ``t``.
    """
    a = float(params.alpha)
    if a == 1.0:
        raise ParameterError("closed form undefined for alpha = 1")
    lam0 = np.atleast_1d(np.asarray(params.lam0 if lam0 is None else lam0, dtype=float))
    lamdot0 = np.atleast_1d(np.asarray(params.lamdot0 if lamdot0 is None else lamdot0, dtype=float))
    t0 = float(params.t0)
    tt = np.asarray(t, dtype=float)
    # written as t0/(1-a) * ((t/t0)^(1-a) - 1) to avoid overflow of t0^a
    g = t0 / (1.0 - a) * ((tt / t0) ** (1.0 - a) - 1.0)
    if tt.ndim == 0:
        return lam0 + lamdot0 * float(g)
    return lam0[None, :] + g[:, None] * lamdot0[None, :]
