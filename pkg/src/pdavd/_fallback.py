"""Pure-Python Dormand-Prince stepper.

Used when the compiled ``_core`` extension is unavailable, and always for
objectives the extension does not know about (anything that is not a
quadratic).  The control logic matches ``_core.pyx`` line by line.
"""
from __future__ import annotations

import math

import numpy as np

from . import _tableau as T


def _rms(v):
    return math.sqrt(float(np.dot(v, v)) / v.size)


def _initial_step(fun, t0, y0, f0, t_end, atol, rtol):
    sc = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / sc)
    d1 = _rms(f0 / sc)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    h = min(h, t_end - t0)
    f1 = fun(t0 + h, y0 + h * f0)
    d2 = _rms((f1 - f0) / sc) / h
    big = max(d1, d2)
    if big <= 1e-15:
        h1 = max(1e-6, h * 1e-3)
    else:
        h1 = (0.01 / big) ** 0.2
    return min(100.0 * h, h1, t_end - t0)


def dopri5(fun, y0, t0, times, atol, rtol, h0=0.0, max_steps=10**9):
    """Integrate ``y' = fun(t, y)`` from ``t0`` and sample at ``times``.

    Returns ``(samples, stats)`` where ``samples[k]`` is the dense-output value
    at ``times[k]`` and ``stats`` holds step counters and a status code from
    :mod:`pdavd._tableau`.  Integration stops at ``times[-1]``.
    """
    y = np.array(y0, dtype=float)
    times = np.asarray(times, dtype=float)
    d = y.size
    N = times.size
    out = np.full((N, d), np.nan)
    stats = {"naccept": 0, "nreject": 0, "nfev": 0, "status": T.STATUS_OK, "t_last": t0}

    t = float(t0)
    t_end = float(times[-1])
    k = 0
    while k < N and times[k] <= t:
        out[k] = y
        k += 1
    if k == N:
        return out, stats

    k1 = fun(t, y)
    stats["nfev"] += 1
    if not np.all(np.isfinite(k1)):
        stats["status"] = T.STATUS_NONFINITE
        return out, stats
    h = h0 if h0 > 0 else _initial_step(fun, t, y, k1, t_end, atol, rtol)
    stats["nfev"] += 0 if h0 > 0 else 1
    facold = 1e-4
    rejected = False
    nstep = 0

    while k < N:
        if nstep >= max_steps:
            stats["status"] = T.STATUS_MAX_STEPS
            break
        if h < T.UNDERFLOW * abs(t):
            stats["status"] = T.STATUS_UNDERFLOW
            break
        last = False
        if t + 1.01 * h >= t_end:
            h = t_end - t
            last = True
        nstep += 1

        k2 = fun(t + T.C2 * h, y + h * (T.A21 * k1))
        k3 = fun(t + T.C3 * h, y + h * (T.A31 * k1 + T.A32 * k2))
        k4 = fun(t + T.C4 * h, y + h * (T.A41 * k1 + T.A42 * k2 + T.A43 * k3))
        k5 = fun(t + T.C5 * h, y + h * (T.A51 * k1 + T.A52 * k2 + T.A53 * k3 + T.A54 * k4))
        k6 = fun(
            t + h,
            y + h * (T.A61 * k1 + T.A62 * k2 + T.A63 * k3 + T.A64 * k4 + T.A65 * k5),
        )
        ynew = y + h * (T.B1 * k1 + T.B3 * k3 + T.B4 * k4 + T.B5 * k5 + T.B6 * k6)
        k7 = fun(t + h, ynew)
        stats["nfev"] += 6

        err_vec = h * (T.E1 * k1 + T.E3 * k3 + T.E4 * k4 + T.E5 * k5 + T.E6 * k6 + T.E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        err = _rms(err_vec / sc)
        if not math.isfinite(err):
            stats["status"] = T.STATUS_NONFINITE
            break

        fac11 = err**T.EXPO
        if err <= 1.0:
            fac = fac11 / facold**T.PI_BETA
            fac = max(1.0 / T.FAC_MAX, min(1.0 / T.FAC_MIN, fac / T.SAFETY))
            hnew = h / fac
            facold = max(err, 1e-4)
            stats["naccept"] += 1

            t_new = t_end if last else t + h
            if k < N and times[k] <= t_new:
                ydiff = ynew - y
                bspl = h * k1 - ydiff
                r4 = ydiff - h * k7 - bspl
                r5 = h * (T.D1 * k1 + T.D3 * k3 + T.D4 * k4 + T.D5 * k5 + T.D6 * k6 + T.D7 * k7)
                while k < N and times[k] <= t_new:
                    if times[k] == t_new:
                        out[k] = ynew
                    else:
                        s = (times[k] - t) / h
                        s1 = 1.0 - s
                        out[k] = y + s * (ydiff + s1 * (bspl + s * (r4 + s1 * r5)))
                    k += 1
            t = t_new
            y = ynew
            k1 = k7
            if rejected:
                hnew = min(hnew, h)
            rejected = False
            h = hnew
        else:
            hnew = h / min(1.0 / T.FAC_MIN, fac11 / T.SAFETY)
            rejected = True
            stats["nreject"] += 1
            h = hnew

    stats["t_last"] = t
    return out, stats


def quadratic_rhs(Q, q, A, b, alpha, beta, theta):
    """First-order vector field for ``f(x) = <x, Qx>/2 + <q, x>``.

    State layout is ``[x, lambda, xdot, lambdadot]``.
    """
    n = Q.shape[0]
    m = A.shape[0]
    AT = A.T

    def fun(t, s):
        x = s[:n]
        lam = s[n : n + m]
        u = s[n + m : 2 * n + m]
        nu = s[2 * n + m :]
        r = A @ x - b
        w = lam + theta * t * nu + beta * r
        out = np.empty_like(s)
        out[:n] = u
        out[n : n + m] = nu
        out[n + m : 2 * n + m] = -(alpha / t) * u - (Q @ x + q) - AT @ w
        out[2 * n + m :] = -(alpha / t) * nu + r + theta * t * (A @ u)
        return out

    return fun


def dopri5_quadratic(Q, q, A, b, alpha, beta, theta, y0, t0, times, atol, rtol, h0=0.0, max_steps=10**9):
    """Same contract as the compiled ``_core.dopri5_quadratic``."""
    Q = np.ascontiguousarray(Q, dtype=float)
    A = np.ascontiguousarray(A, dtype=float).reshape(-1, Q.shape[0])
    fun = quadratic_rhs(Q, np.asarray(q, float), A, np.asarray(b, float), alpha, beta, theta)
    return dopri5(fun, y0, t0, times, atol, rtol, h0=h0, max_steps=max_steps)
