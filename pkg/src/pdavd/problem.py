"""Linearly constrained smooth convex problems ``min f(x)  s.t.  Ax = b``.

This module holds the problem data (objective oracle, constraint operator and
right-hand side), the Lagrangian and augmented Lagrangian with their partial
gradients, and the reduction of a separable multi-block problem to a single
block.

Examples
--------
>>> import numpy as np
>>> p = ProblemInstance(QuadraticObjective(np.eye(2)), LinearMap([[1.0, 1.0]]), [1.0])
>>> lagrangian(p, np.array([0.0, 0.0]), np.array([-0.5]))
0.5
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, ParameterError

__all__ = [
    "LinearMap",
    "SmoothObjective",
    "QuadraticObjective",
    "LogisticObjective",
    "CallableObjective",
    "SeparableObjective",
    "ProblemInstance",
    "register_objective",
    "make_objective",
    "registered_objectives",
    "lagrangian",
    "augmented_lagrangian",
    "grad_x_aug",
    "grad_lambda_aug",
    "compose_multiblock",
    "random_qp",
]


def _vec(v, size, name):
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.size != size:
        raise DimensionError(f"{name} has length {a.size}, expected {size}")
    return a


# ---------------------------------------------------------------------------
# linear constraint operator
# ---------------------------------------------------------------------------


class LinearMap:
    """Dense linear operator ``A: R^n -> R^m``.

    Parameters
    ----------
    matrix : array_like, shape (m, n)
        Row-major entries.  An empty constraint is given as shape ``(0, n)``.
    cols : int, optional
        Required when ``matrix`` has no rows and therefore no inferable width.

    Notes
    -----
    The operator norm is estimated once, lazily, by power iteration on
    ``A^T A`` (200 iterations, relative tolerance 1e-10).  If the iteration
    does not settle, the Frobenius norm is stored instead, which is always an
    upper bound.
    """

    POWER_ITERS = 200
    POWER_TOL = 1e-10

    def __init__(self, matrix, cols: int | None = None):
        a = np.array(matrix, dtype=float)
        if a.ndim == 1 and a.size == 0:
            if cols is None:
                raise DimensionError("empty LinearMap needs an explicit column count")
            a = a.reshape(0, cols)
        elif a.ndim == 1:
            a = a.reshape(1, -1)
        if a.ndim != 2:
            raise DimensionError("LinearMap matrix must be two-dimensional")
        if cols is not None and a.shape[1] != cols:
            raise DimensionError(f"matrix has {a.shape[1]} columns, expected {cols}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("LinearMap entries must be finite")
        a.setflags(write=False)
        self._a = a

    @property
    def matrix(self) -> np.ndarray:
        return self._a

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    def apply(self, x) -> np.ndarray:
        """Return ``A x``."""
        return self._a @ _vec(x, self.cols, "x")

    def adjoint(self, y) -> np.ndarray:
        """Return ``A^T y``."""
        return self._a.T @ _vec(y, self.rows, "y")

    @cached_property
    def norm(self) -> float:
        """Largest singular value (power iteration) or a Frobenius upper bound."""
        a = self._a
        if a.size == 0 or not np.any(a):
            return 0.0
        v = np.ones(self.cols) + np.linspace(0.0, 1e-3, self.cols)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(self.POWER_ITERS):
            w = a.T @ (a @ v)
            lam_new = float(np.linalg.norm(w))
            if lam_new == 0.0:
                break
            v = w / lam_new
            if abs(lam_new - lam) <= self.POWER_TOL * lam_new:
                return float(np.sqrt(lam_new))
            lam = lam_new
        return float(np.linalg.norm(a))

    def __repr__(self):
        return f"LinearMap(rows={self.rows}, cols={self.cols})"


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------


class SmoothObjective:
    """Convex, continuously differentiable ``f: R^n -> R`` with ``l``-Lipschitz gradient.

    Subclasses implement :meth:`value` and :meth:`grad`; :meth:`hessian`
    returns ``None`` unless an analytic Hessian is available.
    """

    def __init__(self, n: int, lipschitz: float):
        if n < 1:
            raise DimensionError("objective dimension must be positive")
        if not np.isfinite(lipschitz) or lipschitz < 0:
            raise ParameterError("Lipschitz constant must be finite and nonnegative")
        self.n = int(n)
        self.lipschitz = float(lipschitz)

    def value(self, x) -> float:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x):
        return None

    def as_quadratic(self):
        """Return ``(Q, q)`` if the objective is quadratic, else ``None``."""
        return None


class QuadraticObjective(SmoothObjective):
    """``f(x) = <x, Qx>/2 + <q, x>`` with ``Q`` symmetric positive semidefinite.

    The Lipschitz constant of the gradient is the largest eigenvalue of ``Q``.
    """

    def __init__(self, Q, q=None):
        Q = np.array(Q, dtype=float)
        if Q.ndim == 0:
            Q = Q.reshape(1, 1)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError("Q must be square")
        n = Q.shape[0]
        if not np.all(np.isfinite(Q)):
            raise ParameterError("Q must be finite")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(Q))):
            raise ParameterError("Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        eig = np.linalg.eigvalsh(Q)
        if eig[0] < -1e-10:
            raise ParameterError(f"Q is not positive semidefinite (smallest eigenvalue {eig[0]:.3e})")
        q = np.zeros(n) if q is None else _vec(q, n, "q")
        super().__init__(n, max(float(eig[-1]), 0.0))
        Q.setflags(write=False)
        q.setflags(write=False)
        self.Q = Q
        self.q = q

    def value(self, x):
        x = _vec(x, self.n, "x")
        return float(0.5 * x @ (self.Q @ x) + self.q @ x)

    def grad(self, x):
        x = _vec(x, self.n, "x")
        return self.Q @ x + self.q

    def hessian(self, x):
        return np.array(self.Q)

    def as_quadratic(self):
        return self.Q, self.q


class LogisticObjective(SmoothObjective):
    """Regularized logistic loss ``sum_i log(1 + exp(-y_i <d_i, x>)) + (reg/2)||x||^2``.

    Parameters
    ----------
    data : array_like, shape (k, n)
        Feature rows ``d_i``.
    labels : array_like, shape (k,)
        Labels ``y_i``, usually in ``{-1, +1}``.
    reg : float
        Ridge weight, ``reg >= 0``.

    Notes
    -----
    The gradient is Lipschitz with constant ``||D||^2 max_i y_i^2 / 4 + reg``.
    """

    def __init__(self, data, labels, reg: float = 0.0):
        D = np.array(data, dtype=float)
        if D.ndim == 1:
            D = D.reshape(1, -1)
        y = _vec(labels, D.shape[0], "labels")
        if reg < 0:
            raise ParameterError("reg must be nonnegative")
        ell = np.linalg.norm(D, 2) ** 2 * float(np.max(y**2, initial=0.0)) / 4.0 + reg
        super().__init__(D.shape[1], ell)
        D.setflags(write=False)
        y.setflags(write=False)
        self.data = D
        self.labels = y
        self.reg = float(reg)

    def value(self, x):
        x = _vec(x, self.n, "x")
        z = -self.labels * (self.data @ x)
        return float(np.sum(np.logaddexp(0.0, z)) + 0.5 * self.reg * x @ x)

    def grad(self, x):
        x = _vec(x, self.n, "x")
        z = -self.labels * (self.data @ x)
        s = 0.5 * (1.0 + np.tanh(0.5 * z))  # logistic sigmoid of z, overflow-free
        return -self.data.T @ (self.labels * s) + self.reg * x

    def hessian(self, x):
        x = _vec(x, self.n, "x")
        z = -self.labels * (self.data @ x)
        s = 0.5 * (1.0 + np.tanh(0.5 * z))
        w = s * (1.0 - s) * self.labels**2
        return self.data.T @ (w[:, None] * self.data) + self.reg * np.eye(self.n)


class CallableObjective(SmoothObjective):
    """Objective built from user-supplied value and gradient callables."""

    def __init__(self, n, value, grad, lipschitz, hessian=None):
        super().__init__(n, lipschitz)
        self._value = value
        self._grad = grad
        self._hessian = hessian

    def value(self, x):
        return float(self._value(_vec(x, self.n, "x")))

    def grad(self, x):
        return _vec(self._grad(_vec(x, self.n, "x")), self.n, "gradient")

    def hessian(self, x):
        if self._hessian is None:
            return None
        return np.asarray(self._hessian(_vec(x, self.n, "x")), dtype=float)


class SeparableObjective(SmoothObjective):
    """``f(x) = sum_i f_i(x_i)`` over consecutive blocks of ``x``."""

    def __init__(self, parts: Sequence[SmoothObjective]):
        if not parts:
            raise DimensionError("at least one block is required")
        self.parts = tuple(parts)
        self.sizes = tuple(p.n for p in self.parts)
        self._cuts = np.cumsum((0,) + self.sizes)
        super().__init__(int(self._cuts[-1]), max(p.lipschitz for p in self.parts))

    def _split(self, x):
        x = _vec(x, self.n, "x")
        return [x[self._cuts[i] : self._cuts[i + 1]] for i in range(len(self.parts))]

    def value(self, x):
        return float(sum(p.value(xi) for p, xi in zip(self.parts, self._split(x))))

    def grad(self, x):
        return np.concatenate([p.grad(xi) for p, xi in zip(self.parts, self._split(x))])

    def hessian(self, x):
        blocks = [p.hessian(xi) for p, xi in zip(self.parts, self._split(x))]
        if any(h is None for h in blocks):
            return None
        H = np.zeros((self.n, self.n))
        for i, h in enumerate(blocks):
            s = slice(self._cuts[i], self._cuts[i + 1])
            H[s, s] = h
        return H

    def as_quadratic(self):
        quads = [p.as_quadratic() for p in self.parts]
        if any(qd is None for qd in quads):
            return None
        Q = np.zeros((self.n, self.n))
        for i, (Qi, _) in enumerate(quads):
            s = slice(self._cuts[i], self._cuts[i + 1])
            Q[s, s] = Qi
        return Q, np.concatenate([qi for _, qi in quads])


# ---------------------------------------------------------------------------
# registry for config-file objectives
# ---------------------------------------------------------------------------

_REGISTRY: dict[str, Callable[..., SmoothObjective]] = {}


def register_objective(name: str):
    """Decorator registering an objective factory under ``name``.

    The factory receives the keyword arguments from the problem section of a
    configuration file (minus ``kind``) and returns a :class:`SmoothObjective`.
    """

    def deco(factory):
        _REGISTRY[name] = factory
        return factory

    return deco


def registered_objectives() -> list[str]:
    return sorted(_REGISTRY)


def make_objective(kind: str, **kwargs) -> SmoothObjective:
    """Build a registered objective by name."""
    try:
        factory = _REGISTRY[kind]
    except KeyError:
        raise ParameterError(
            f"unknown objective kind {kind!r}; known: {', '.join(registered_objectives())}"
        ) from None
    return factory(**kwargs)


@register_objective("quadratic")
def _quadratic_factory(Q, q=None):
    return QuadraticObjective(Q, q)


@register_objective("logistic-smooth")
def _logistic_factory(data, labels, reg=0.0):
    return LogisticObjective(data, labels, reg)


# ---------------------------------------------------------------------------
# problem instance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemInstance:
    """``min f(x)  s.t.  Ax = b``.

    Attributes
    ----------
    objective : SmoothObjective
    constraint : LinearMap
        Operator ``A`` with ``cols == objective.n``.
    b : ndarray, shape (m,)
    blocks : tuple of int, optional
        Block sizes when the instance came from :func:`compose_multiblock`.
    """

    objective: SmoothObjective
    constraint: LinearMap
    b: np.ndarray
    blocks: tuple | None = field(default=None)

    def __post_init__(self):
        if not isinstance(self.constraint, LinearMap):
            object.__setattr__(self, "constraint", LinearMap(self.constraint, cols=self.objective.n))
        if self.constraint.cols != self.objective.n:
            raise DimensionError(
                f"A has {self.constraint.cols} columns but the objective has dimension {self.objective.n}"
            )
        b = _vec(self.b, self.constraint.rows, "b")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        if self.blocks is not None:
            blocks = tuple(int(s) for s in self.blocks)
            if sum(blocks) != self.n:
                raise DimensionError("block sizes do not sum to n")
            object.__setattr__(self, "blocks", blocks)

    @property
    def n(self) -> int:
        return self.objective.n

    @property
    def m(self) -> int:
        return self.constraint.rows

    @property
    def A(self) -> np.ndarray:
        return self.constraint.matrix

    @property
    def lipschitz(self) -> float:
        return self.objective.lipschitz

    @property
    def norm_A(self) -> float:
        return self.constraint.norm

    def f(self, x) -> float:
        return self.objective.value(x)

    def grad_f(self, x) -> np.ndarray:
        return self.objective.grad(x)

    def residual(self, x) -> np.ndarray:
        """``Ax - b``."""
        return self.constraint.apply(x) - self.b

    def check_x(self, x) -> np.ndarray:
        return _vec(x, self.n, "x")

    def check_lam(self, lam) -> np.ndarray:
        return _vec(lam, self.m, "lambda")


def lagrangian(p: ProblemInstance, x, lam) -> float:
    """``f(x) + <lam, Ax - b>``."""
    x = p.check_x(x)
    lam = p.check_lam(lam)
    return float(p.f(x) + lam @ p.residual(x))


def augmented_lagrangian(p: ProblemInstance, x, lam, beta: float) -> float:
    """Lagrangian plus the penalty ``(beta/2) ||Ax - b||^2``."""
    if beta < 0:
        raise ParameterError("beta must be nonnegative")
    x = p.check_x(x)
    lam = p.check_lam(lam)
    r = p.residual(x)
    return float(p.f(x) + lam @ r + 0.5 * beta * r @ r)


def grad_x_aug(p: ProblemInstance, x, lam, beta: float) -> np.ndarray:
    """``grad f(x) + A^T lam + beta A^T (Ax - b)``."""
    if beta < 0:
        raise ParameterError("beta must be nonnegative")
    x = p.check_x(x)
    lam = p.check_lam(lam)
    return p.grad_f(x) + p.constraint.adjoint(lam + beta * p.residual(x))


def grad_lambda_aug(p: ProblemInstance, x) -> np.ndarray:
    """``Ax - b``; the augmented Lagrangian is affine in the multiplier."""
    return p.residual(p.check_x(x))


def compose_multiblock(blocks: Sequence[tuple[SmoothObjective, LinearMap]], b) -> ProblemInstance:
    """Reduce ``min sum_i f_i(x_i)  s.t.  sum_i A_i x_i = b`` to a single block.

    The stacked variable is ``x = (x_1, ..., x_k)``, the stacked operator is
    ``[A_1 ... A_k]`` and the gradient is the concatenation of block gradients.
    """
    if not blocks:
        raise DimensionError("at least one block is required")
    b = np.asarray(b, dtype=float).reshape(-1)
    parts, mats = [], []
    for i, (obj, amap) in enumerate(blocks):
        if not isinstance(amap, LinearMap):
            amap = LinearMap(amap, cols=obj.n)
        if amap.rows != b.size:
            raise DimensionError(f"block {i} maps into R^{amap.rows}, expected R^{b.size}")
        if amap.cols != obj.n:
            raise DimensionError(f"block {i}: operator width {amap.cols} != objective dimension {obj.n}")
        parts.append(obj)
        mats.append(amap.matrix)
    A = np.hstack(mats) if b.size else np.zeros((0, sum(o.n for o in parts)))
    obj = parts[0] if len(parts) == 1 else SeparableObjective(parts)
    return ProblemInstance(obj, LinearMap(A, cols=obj.n), b, blocks=tuple(o.n for o in parts))


def random_qp(seed: int, n: int = 20, m: int = 5, a_scale: float = 1.0) -> ProblemInstance:
    """Seeded strongly convex QP with a consistent equality constraint.

    ``Q = M^T M + 0.1 I`` with ``M`` uniform on ``[-1, 1]``; ``q`` uniform on
    ``[-1, 1]``; ``A`` uniform on ``[-a_scale, a_scale]``; ``b = A xbar`` for a
    uniform ``xbar`` so that the feasible set is nonempty.

    Notes
    -----
    The oscillation frequency of the coupled system grows like
    ``theta ||A|| t``, so ``a_scale`` directly controls how many steps an
    explicit integrator needs to reach a given final time.
    """
    if n < 1 or m < 0:
        raise DimensionError("need n >= 1 and m >= 0")
    if not a_scale >= 0:
        raise ParameterError("a_scale must be nonnegative")
    rng = np.random.default_rng(seed)
    M = rng.uniform(-1.0, 1.0, (n, n))
    Q = M.T @ M + 0.1 * np.eye(n)
    q = rng.uniform(-1.0, 1.0, n)
    A = a_scale * rng.uniform(-1.0, 1.0, (m, n))
    xbar = rng.uniform(-1.0, 1.0, n)
    return ProblemInstance(QuadraticObjective(Q, q), LinearMap(A, cols=n), A @ xbar)
