"""Adaptive Dormand-Prince integration of the first-order system.

Quadratic objectives run through the compiled kernel when it is available;
every other objective runs through the pure-Python stepper with the same
controller, so step sequences agree between backends.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from . import _tableau as T
from ._fallback import dopri5
from ._fallback import dopri5_quadratic as _py_quadratic
from .dynamics import (
    SolverParams,
    SystemState,
    first_order_rhs,
    initial_state,
    satisfied_mode,
    second_derivatives,
    validate_params,
)
from .errors import IntegrationError, ParameterError
from .problem import ProblemInstance

__all__ = ["Trajectory", "sample_schedule", "integrate", "backend_name"]


def backend_name() -> str:
    """``"compiled"`` or ``"python"``: the kernel used for quadratic objectives."""
    return _backend.NAME


def sample_schedule(t0: float, t_end: float, N: int, spacing: str = "log") -> np.ndarray:
    """Sample times from ``t0`` to ``t_end`` inclusive.

    Parameters
    ----------
    t0, t_end : float
        ``0 < t0 < t_end``.
    N : int
        Number of samples, at least 2.
    spacing : {"log", "linear"}

    Returns
    -------
    ndarray
        Strictly increasing times with exact end points.
    """
    if not (N >= 2 and int(N) == N):
        raise ParameterError("sample count must be an integer >= 2")
    if not (t0 > 0 and t_end > t0 and np.isfinite(t_end)):
        raise ParameterError(f"need 0 < t0 < t_end (got {t0}, {t_end})")
    N = int(N)
    if spacing == "log":
        k = np.arange(N) / (N - 1)
        ts = t0 * (t_end / t0) ** k
    elif spacing == "linear":
        ts = np.linspace(t0, t_end, N)
    else:
        raise ParameterError(f"unknown spacing {spacing!r}")
    ts[0], ts[-1] = t0, t_end
    return ts


@dataclass
class Trajectory:
    """Sampled solution.

    Attributes
    ----------
    times : ndarray, shape (N,)
    x, xdot, xddot : ndarray, shape (N, n)
    lam, lamdot, lamddot : ndarray, shape (N, m)
    stats : dict
        ``naccept``, ``nreject``, ``nfev``, ``backend``.
    mode : str
        Strongest assumption mode the parameters satisfy.
    """

    times: np.ndarray
    x: np.ndarray
    lam: np.ndarray
    xdot: np.ndarray
    lamdot: np.ndarray
    xddot: np.ndarray
    lamddot: np.ndarray
    stats: dict = field(default_factory=dict)
    mode: str = "standard"

    def __len__(self):
        return self.times.size

    def state(self, k: int) -> SystemState:
        return SystemState(float(self.times[k]), self.x[k], self.lam[k], self.xdot[k], self.lamdot[k])

    def states(self):
        return (self.state(k) for k in range(len(self)))


def integrate(p: ProblemInstance, params: SolverParams, schedule=None, *, max_steps: int = 10**9, backend: str | None = None) -> Trajectory:
    """Integrate from ``params.t0`` and sample at ``schedule``.

    Parameters
    ----------
    p : ProblemInstance
    params : SolverParams
        Must satisfy at least the standard assumption.
    schedule : array_like, optional
        Increasing sample times within ``[t0, t_end]``; defaults to
        ``sample_schedule(t0, t_end, params.samples, params.spacing)``.
    max_steps : int
        Cap on attempted steps.
    backend : {"compiled", "python"}, optional
        Force a kernel for quadratic objectives.

    Returns
    -------
    Trajectory

    Raises
    ------
    ParameterError
        Invalid parameters or schedule.
    IntegrationError
        Step-size underflow (stiffness), non-finite state (divergence) or step cap.
    """
    validate_params(params, "standard")
    mode = satisfied_mode(params)
    if schedule is None:
        schedule = sample_schedule(params.t0, params.t_end, params.samples, params.spacing)
    ts = np.asarray(schedule, dtype=float).reshape(-1)
    if ts.size < 1 or np.any(np.diff(ts) <= 0):
        raise ParameterError("schedule must be strictly increasing")
    if ts[0] < params.t0 or ts[-1] > params.t_end * (1 + 1e-15):
        raise ParameterError("schedule must lie within [t0, t_end]")

    s0 = initial_state(p, params)
    y0 = s0.to_vector()
    quad = p.objective.as_quadratic()
    args = (y0, float(params.t0), ts, float(params.atol), float(params.rtol))
    if quad is not None and backend != "python":
        if backend == "compiled" and _backend.NAME != "compiled":
            raise ParameterError("compiled backend requested but the extension is not built")
        Q, q = quad
        out, stats = _backend.dopri5_quadratic(
            Q, q, p.A, p.b, float(params.alpha), float(params.beta), float(params.theta), *args, max_steps=max_steps
        )
        stats["backend"] = _backend.NAME
    elif quad is not None:
        out, stats = _py_quadratic(
            quad[0], quad[1], p.A, p.b, float(params.alpha), float(params.beta), float(params.theta), *args,
            max_steps=max_steps,
        )
        stats["backend"] = "python"
    else:
        out, stats = dopri5(first_order_rhs(p, params), *args, max_steps=max_steps)
        stats["backend"] = "python"

    status = stats["status"]
    if status != T.STATUS_OK:
        what = {
            T.STATUS_UNDERFLOW: "step size underflow (stiffness)",
            T.STATUS_NONFINITE: "non-finite state (divergence)",
            T.STATUS_MAX_STEPS: f"step limit {max_steps} reached",
        }.get(status, f"status {status}")
        raise IntegrationError(f"integration stopped at t={stats['t_last']:.6g}: {what}", stats["t_last"], stats)
    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite samples (divergence)", stats["t_last"], stats)

    n, m = p.n, p.m
    traj = Trajectory(
        times=ts.copy(),
        x=out[:, :n].copy(),
        lam=out[:, n : n + m].copy(),
        xdot=out[:, n + m : 2 * n + m].copy(),
        lamdot=out[:, 2 * n + m :].copy(),
        xddot=np.empty((ts.size, n)),
        lamddot=np.empty((ts.size, m)),
        stats=stats,
        mode=mode,
    )
    for k, st in enumerate(traj.states()):
        traj.xddot[k], traj.lamddot[k] = second_derivatives(p, params, st)
    return traj
