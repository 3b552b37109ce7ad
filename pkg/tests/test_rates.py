from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pdavd.errors import ParameterError
from pdavd.rates import default_window, envelope, fit_rate, fit_slope, little_o_check

T = np.geomspace(1.0, 1e4, 60)


def test_exact_power_law():
    fit = fit_slope(T, 5.0 / T**2)
    assert abs(fit.slope + 2.0) <= 1e-12
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(5.0), abs=1e-10)
    assert (fit.t_lo, fit.t_hi) == (100.0, 1e4)


def test_constant_series_has_zero_slope():
    fit = fit_slope(T, np.full_like(T, 3.0))
    assert abs(fit.slope) <= 1e-15 and fit.r2 == 1.0


def test_noisy_synthetic_series_against_frozen_fit(oracles):
    o = oracles["rate_3_over_t15"]
    fit = fit_slope(o["times"], o["values"], tuple(o["window"]))
    assert -1.51 <= fit.slope <= -1.49
    assert fit.slope == pytest.approx(o["slope"], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 1e6), st.floats(-3.0, 1.0))
def test_scale_equivariance(c, p):
    v = T**p * (1.0 + 0.3 * np.sin(T))
    # samples pushed below the clamp level leave the fit, so stay above it
    assume(np.min(c * v) > 1e-12)
    a, b = fit_slope(T, v), fit_slope(T, c * v)
    assert b.slope == pytest.approx(a.slope, abs=1e-12)
    assert b.intercept - a.intercept == pytest.approx(np.log(c), abs=1e-9)


def test_nonpositive_samples_are_clamped_and_counted():
    v = 1.0 / T
    v[-3:] = 0.0
    fit = fit_slope(T, v)
    assert fit.n_clamped == 3
    assert fit.slope == pytest.approx(-1.0)


def test_too_few_samples():
    with pytest.raises(ParameterError):
        fit_slope(T[:5], 1.0 / T[:5], window=(1.0, 1e4))
    with pytest.raises(ParameterError):
        fit_slope(T, np.zeros_like(T))
    with pytest.raises(ParameterError):
        fit_slope(T, 1.0 / T[:-1])
    with pytest.raises(ParameterError):
        fit_slope(T, 1.0 / T, variant="median")


def test_envelope_follows_peaks():
    np.testing.assert_array_equal(envelope([3.0, 1.0, 2.0, 0.5]), [3.0, 2.0, 2.0, 0.5])
    v = np.abs(np.sin(T)) / T**2 + 1e-30
    env = envelope(v)
    assert np.all(np.diff(env) <= 0) and np.all(env >= v)


def test_fit_rate_switches_to_envelope_for_oscillating_series():
    t = np.geomspace(1.0, 1e4, 400)
    v = np.abs(np.cos(3.0 * t)) / t**2 + 1e-20
    assert fit_slope(t, v).r2 < 0.9
    fit = fit_rate(t, v)
    assert fit.variant == "envelope"
    assert -2.2 < fit.slope < -1.8
    assert fit_rate(T, 1.0 / T).variant == "raw"


def test_default_window():
    assert default_window([1.0, 10.0, 1e3]) == (10.0, 1e3)
    assert default_window([1.0, 50.0]) == (1.0, 50.0)


def test_little_o_examples():
    t = np.geomspace(10.0, 1e6, 80)
    v = little_o_check(t, 1.0 / (np.sqrt(t) * np.log(t)), 0.5, window=(10.0, 1e6))
    assert v.little_o and v.big_o
    c = little_o_check(t, 1.0 / np.sqrt(t), 0.5, window=(10.0, 1e6))
    assert c.big_o and not c.little_o
    assert c.g_start == pytest.approx(1.0) and c.g_end == pytest.approx(1.0)


def test_growth_fails_both_verdicts():
    v = little_o_check(T, T**-0.25, 0.5, window=(100.0, 1e4))
    assert not v.little_o and not v.big_o
    assert v.g_max_window > v.g_max_before


def test_little_o_too_few_samples():
    with pytest.raises(ParameterError):
        little_o_check(T[:6], 1.0 / T[:6], 0.5, window=(1.0, 1e4))
