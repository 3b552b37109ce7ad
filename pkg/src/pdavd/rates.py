"""Log-log rate fits and little-o / big-O verdicts for sampled decay series."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError

__all__ = ["RateFit", "RateVerdict", "envelope", "fit_slope", "fit_rate", "little_o_check", "default_window"]

CLAMP = 1e-15
MIN_SAMPLES = 8


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through ``(log t, log value)``.

    Attributes
    ----------
    slope, intercept : float
    r2 : float
        Coefficient of determination, in ``[0, 1]``.
    t_lo, t_hi : float
        Fit window.
    n_used : int
        Samples entering the fit.
    n_clamped : int
        Samples in the window dropped because ``value <= 1e-15``.
    variant : str
        ``"raw"`` or ``"envelope"``.
    """

    slope: float
    intercept: float
    r2: float
    t_lo: float
    t_hi: float
    n_used: int
    n_clamped: int
    variant: str = "raw"

    def as_dict(self):
        return asdict(self)


def default_window(times) -> tuple[float, float]:
    """Last two decades of the sampled span, ``[t_end/100, t_end]``."""
    t_hi = float(np.max(times))
    return max(t_hi / 100.0, float(np.min(times))), t_hi


def _window(times, values, window):
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ParameterError("times and values differ in shape")
    lo, hi = default_window(t) if window is None else window
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    return t[sel], v[sel], float(lo), float(hi)


def envelope(values) -> np.ndarray:
    """Running maximum taken from the right: ``env[k] = max(values[k:])``.

    For a decaying but oscillating series this is the smallest nonincreasing
    function above every sample, i.e. it follows the peaks.
    """
    v = np.asarray(values, dtype=float)
    return np.maximum.accumulate(v[::-1])[::-1]


def fit_slope(times, values, window=None, variant: str = "raw") -> RateFit:
    """Ordinary least squares of ``log value`` against ``log t`` inside ``window``.

    Parameters
    ----------
    times, values : array_like
    window : (float, float), optional
        Defaults to the last two decades.
    variant : {"raw", "envelope"}
        Fit the values themselves or their right running maximum.

    Raises
    ------
    ParameterError
        Fewer than 8 positive samples in the window.

    Examples
    --------
    >>> t = np.geomspace(1, 1e4, 50)
    >>> round(fit_slope(t, 5 / t**2).slope, 9)
    -2.0
    """
    t, v, lo, hi = _window(times, values, window)
    if variant == "envelope":
        v = envelope(v)
    elif variant != "raw":
        raise ParameterError(f"unknown variant {variant!r}")
    keep = v > CLAMP
    n_clamped = int(np.sum(~keep))
    t, v = t[keep], v[keep]
    if t.size < MIN_SAMPLES:
        raise ParameterError(f"need at least {MIN_SAMPLES} positive samples in the window, got {t.size}")
    X = np.log(t)
    Y = np.log(v)
    xm, ym = X.mean(), Y.mean()
    sxx = np.sum((X - xm) ** 2)
    slope = float(np.sum((X - xm) * (Y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((Y - (intercept + slope * X)) ** 2))
    ss_tot = float(np.sum((Y - ym) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(Y @ Y)) else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return RateFit(slope, intercept, r2, lo, hi, int(t.size), n_clamped, variant)


def fit_rate(times, values, window=None, r2_min: float = 0.9) -> RateFit:
    """Fit raw values, falling back to the peak envelope when ``r2 < r2_min``."""
    raw = fit_slope(times, values, window, "raw")
    if raw.r2 >= r2_min:
        return raw
    return fit_slope(times, values, window, "envelope")


@dataclass(frozen=True)
class RateVerdict:
    """Verdict on ``g(t) = t^p value(t)`` over a window.

    ``little_o`` requires ``g`` to trend downward over the window's last
    decade (negative log-log slope of its peak envelope) and to end at no
    more than half its starting value.  ``big_o`` requires ``g`` inside the
    window not to exceed its maximum up to the window start.
    """

    exponent: float
    little_o: bool
    big_o: bool
    g_start: float
    g_end: float
    g_max_window: float
    g_max_before: float
    last_decade_slope: float

    def as_dict(self):
        return asdict(self)


def little_o_check(times, values, p: float, window=None) -> RateVerdict:
    """Numerical surrogate for ``value = o(t^-p)`` and ``value = O(t^-p)``.

    Examples
    --------
    >>> t = np.geomspace(10, 1e6, 80)
    >>> v = little_o_check(t, 1 / (np.sqrt(t) * np.log(t)), 0.5, window=(10, 1e6))
    >>> v.little_o, v.big_o
    (True, True)
    """
    t_all = np.asarray(times, dtype=float)
    g_all = t_all**p * np.asarray(values, dtype=float)
    t, g, lo, hi = _window(t_all, g_all, window)
    if t.size < MIN_SAMPLES or np.sum(g > CLAMP) < MIN_SAMPLES:
        raise ParameterError(f"need at least {MIN_SAMPLES} positive samples in the window")
    last = t >= hi / 10.0 * (1 - 1e-12)
    env = envelope(g)
    if np.sum(last) >= 2 and np.all(env[last] > CLAMP):
        sl = float(np.polyfit(np.log(t[last]), np.log(env[last]), 1)[0])
    else:
        sl = -np.inf if np.all(env[last] <= CLAMP) else float("nan")
    g_start, g_end = float(g[0]), float(g[-1])
    before = g_all[t_all <= lo * (1 + 1e-12)]
    g_before = float(np.max(before)) if before.size else g_start
    g_max = float(np.max(g))
    little = bool(sl < 0 and g_end <= 0.5 * g_start)
    big = bool(g_max <= g_before * (1.0 + 1e-9) + CLAMP)
    return RateVerdict(float(p), little, big, g_start, g_end, g_max, g_before, sl)
