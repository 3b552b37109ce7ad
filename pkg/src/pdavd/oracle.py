"""Reference primal-dual solutions.

Quadratic problems are solved through their KKT linear system; other smooth
problems by damped Newton on the KKT residual map
``T(x, lam) = (grad f(x) + A^T lam, b - Ax)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoSaddlePointError, OracleError
from .problem import ProblemInstance

__all__ = [
    "SaddlePoint",
    "ConsistencyReport",
    "kkt_map",
    "saddle_residual",
    "solve_kkt_qp",
    "solve_kkt_newton",
    "find_saddle",
    "check_solution_set_consistency",
]


@dataclass(frozen=True)
class SaddlePoint:
    """A primal-dual optimal pair with its objective value.

    Attributes
    ----------
    x_star, lambda_star : ndarray
    f_star : float
        ``f(x_star)``, recomputed after the solve.
    residual : float
        ``||grad f(x*) + A^T lam*|| + ||A x* - b||``.
    iterations : int
        Newton iterations used (0 for direct solves).
    """

    x_star: np.ndarray
    lambda_star: np.ndarray
    f_star: float
    residual: float
    iterations: int = 0


def kkt_map(p: ProblemInstance, x, lam) -> np.ndarray:
    """Stacked residual ``(grad f(x) + A^T lam, b - Ax)``."""
    x = p.check_x(x)
    lam = p.check_lam(lam)
    return np.concatenate([p.grad_f(x) + p.constraint.adjoint(lam), -p.residual(x)])


def saddle_residual(p: ProblemInstance, x, lam) -> float:
    x = p.check_x(x)
    lam = p.check_lam(lam)
    return float(
        np.linalg.norm(p.grad_f(x) + p.constraint.adjoint(lam)) + np.linalg.norm(p.residual(x))
    )


def _make(p, x, lam, iterations=0):
    x = np.array(x, dtype=float)
    lam = np.array(lam, dtype=float)
    return SaddlePoint(x, lam, p.f(x), saddle_residual(p, x, lam), iterations)


def solve_kkt_qp(p: ProblemInstance) -> SaddlePoint:
    """Solve ``Qx + q + A^T lam = 0, Ax = b`` directly.

    Singular but consistent systems return the minimum-norm least-squares
    solution (singular values below ``1e-10 * ||K||`` are discarded).

    Raises
    ------
    NoSaddlePointError
        If the KKT system is inconsistent.
    TypeError
        If the objective is not quadratic.
    """
    quad = p.objective.as_quadratic()
    if quad is None:
        raise TypeError("solve_kkt_qp needs a quadratic objective")
    Q, q = quad
    n, m = p.n, p.m
    A = p.A
    K = np.zeros((n + m, n + m))
    K[:n, :n] = Q
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate([-q, p.b])
    sol = np.linalg.lstsq(K, rhs, rcond=1e-10)[0]
    # one step of iterative refinement
    sol = sol + np.linalg.lstsq(K, rhs - K @ sol, rcond=1e-10)[0]
    x, lam = sol[:n], sol[n:]
    res = saddle_residual(p, x, lam)
    scale = (1.0 + np.linalg.norm(q) + np.linalg.norm(p.b)) * (1.0 + np.linalg.norm(K, 2))
    if not np.isfinite(res) or res > 1e-8 * scale:
        raise NoSaddlePointError(f"KKT system is inconsistent (residual {res:.3e})")
    return _make(p, x, lam)


def _hessian(p: ProblemInstance, x):
    H = p.objective.hessian(x)
    if H is not None:
        return np.asarray(H, dtype=float)
    h = 1e-5 * (1.0 + np.linalg.norm(x))
    n = p.n
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        H[:, i] = (p.grad_f(x + e) - p.grad_f(x - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


def solve_kkt_newton(p: ProblemInstance, x0=None, lam0=None, tol: float = 1e-10, max_iter: int = 200) -> SaddlePoint:
    """Damped Newton iteration on the KKT residual map.

    Parameters
    ----------
    p : ProblemInstance
    x0, lam0 : array_like, optional
        Starting point (zeros by default).
    tol : float
        Target for ``||T(x, lam)||``.
    max_iter : int
        Iteration cap (200).

    Notes
    -----
    The step is the least-squares solution of ``J d = -T`` with
    ``J = [[H, A^T], [-A, 0]]``; the step length is halved until the residual
    norm decreases by the Armijo factor ``1 - 1e-4 s``.  Without an analytic
    Hessian, central differences of the gradient with step
    ``1e-5 (1 + ||x||)`` are used, which limits the attainable accuracy to
    roughly ``1e-8``.

    Raises
    ------
    OracleError
        When ``tol`` is not reached within ``max_iter`` iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.zeros(p.n) if x0 is None else p.check_x(x0).copy()
    lam = np.zeros(p.m) if lam0 is None else p.check_lam(lam0).copy()
    n, m = p.n, p.m
    A = p.A
    T = kkt_map(p, x, lam)
    rn = float(np.linalg.norm(T))
    it = 0
    while rn > tol:
        if it >= max_iter:
            raise OracleError(f"Newton did not converge in {max_iter} iterations", rn)
        J = np.zeros((n + m, n + m))
        J[:n, :n] = _hessian(p, x)
        J[:n, n:] = A.T
        J[n:, :n] = -A
        d = np.linalg.lstsq(J, -T, rcond=1e-12)[0]
        s = 1.0
        while True:
            xt, lt = x + s * d[:n], lam + s * d[n:]
            Tt = kkt_map(p, xt, lt)
            rt = float(np.linalg.norm(Tt))
            if rt <= (1.0 - 1e-4 * s) * rn or s < 2.0**-30:
                break
            s *= 0.5
        it += 1
        if not rt < rn:
            raise OracleError("Newton line search stalled", rn)
        x, lam, T, rn = xt, lt, Tt, rt
    return _make(p, x, lam, it)


def find_saddle(p: ProblemInstance, tol: float = 1e-10) -> SaddlePoint:
    """Direct KKT solve for quadratics, Newton otherwise."""
    if p.objective.as_quadratic() is not None:
        return solve_kkt_qp(p)
    return solve_kkt_newton(p, tol=tol)


@dataclass(frozen=True)
class ConsistencyReport:
    """Outcome of comparing two saddle points.

    ``passed`` requires both inputs to be valid saddle points (residual at
    most ``tol``) and ``grad f`` and ``A^T lam`` to agree within ``10 tol``.
    """

    passed: bool
    inputs_valid: bool
    grad_diff: float
    adjoint_diff: float
    lambda_diff: float
    tol: float
    message: str = ""


def check_solution_set_consistency(p: ProblemInstance, s1: SaddlePoint, s2: SaddlePoint, tol: float = 1e-10) -> ConsistencyReport:
    """Check that ``grad f`` and ``A^T lam`` are constant across two saddle points.

    The multipliers themselves may differ when ``A`` is rank deficient.
    """
    r1 = saddle_residual(p, s1.x_star, s1.lambda_star)
    r2 = saddle_residual(p, s2.x_star, s2.lambda_star)
    gd = float(np.linalg.norm(p.grad_f(s1.x_star) - p.grad_f(s2.x_star)))
    ad = float(np.linalg.norm(p.constraint.adjoint(s1.lambda_star - s2.lambda_star)))
    ld = float(np.linalg.norm(s1.lambda_star - s2.lambda_star))
    valid = r1 <= tol and r2 <= tol
    ok = gd <= 10 * tol and ad <= 10 * tol
    if not valid:
        msg = f"input rejected: residuals {r1:.3e}, {r2:.3e} exceed tol {tol:.1e}"
    elif not ok:
        msg = "gradient or A^T lambda differs between saddle points"
    else:
        msg = "consistent"
    return ConsistencyReport(valid and ok, valid, gd, ad, ld, tol, msg)
