import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oldroyd_decay.fitting import MIN_SAMPLES, check_lower_envelope, fit_exponent, fractional_constant
from oldroyd_decay.linear import continuum_norm, gaussian_profile, lower_bound_constant, profile_eta


def test_exact_power_law():
    t = np.linspace(10, 1000, 50)
    fit = fit_exponent(list(zip(t, 3.0 * (1 + t) ** -0.5)))
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-10)
    assert fit.r_squared == 1.0
    assert fit.n_samples == 50 and fit.window == (10.0, 1000.0)


def test_constant_series():
    fit = fit_exponent([(t, 2.0) for t in range(20)])
    assert fit.slope == pytest.approx(0.0, abs=1e-14)
    assert fit.r_squared == 1.0


def test_continuum_series_slope():
    profile = gaussian_profile(1.0, u=1.0, a=1.0, c=1.0, s=1.0)
    times = np.geomspace(1e2, 1e4, 25)
    fit = fit_exponent([(t, continuum_norm(profile, 1.0, 1.0, t)) for t in times])
    assert abs(fit.slope + 1.0) <= 0.03


@settings(max_examples=25, deadline=None)
@given(slope=st.floats(-3, 0.5), amp=st.floats(1e-6, 1e6), lo=st.floats(0, 50))
def test_window_shrink_invariance(slope, amp, lo):
    t = np.linspace(0, 500, 200)
    series = list(zip(t, amp * (1 + t) ** slope))
    full = fit_exponent(series)
    part = fit_exponent(series, (lo, lo + 200))
    assert part.slope == pytest.approx(full.slope, abs=1e-9)
    assert part.window[0] >= lo and part.window[1] <= lo + 200


def test_relative_error():
    fit = fit_exponent([(t, (1 + t) ** -0.55) for t in range(10)])
    assert fit.relative_error(-0.5) == pytest.approx(0.1, rel=1e-9)


def test_errors():
    with pytest.raises(ValueError):
        fit_exponent([(t, 1.0) for t in range(MIN_SAMPLES - 1)])
    with pytest.raises(ValueError):
        fit_exponent([(t, 1.0) for t in range(20)], (100, 200))
    with pytest.raises(ValueError):
        fit_exponent([(t, 1.0 - 0.1 * t) for t in range(20)])
    with pytest.raises(ValueError):
        fit_exponent([(1.0, 1.0)] * 10)
    with pytest.raises(ValueError):
        fit_exponent([1.0, 2.0, 3.0])


class TestEnvelope:
    def test_exact_envelope_passes(self):
        c0, eta, s1 = 0.5, 1.2, 1.0
        C = lower_bound_constant(c0, eta, s1)
        t = np.geomspace(1, 1e4, 30)
        series = list(zip(t, 0.5 * C * (1 + t) ** (-(s1 + 1) / 2)))
        rep = check_lower_envelope(series, c0, eta, s1)
        assert rep.passed and rep.min_margin == pytest.approx(0.0, abs=1e-15)
        assert rep.min_ratio == pytest.approx(1.0)

    def test_below_envelope_fails(self):
        c0, eta = 0.5, 1.2
        C = lower_bound_constant(c0, eta, 0.0)
        t = np.geomspace(1, 1e4, 30)
        v = 0.5 * C * (1 + t) ** -0.5
        v[10] *= 0.9
        rep = check_lower_envelope(list(zip(t, v)), c0, eta, 0.0)
        assert not rep.passed and rep.n_violations == 1
        assert rep.worst_time == pytest.approx(t[10])
        assert "1 violations" in str(rep)

    @pytest.mark.parametrize("s1", [0.0, 1.0, 2.0])
    def test_oracle_series(self, s1):
        profile = gaussian_profile(1.0, u=0.0, a=0.3)
        eta = profile_eta(profile)
        t = np.geomspace(1, 1e4, 40)
        series = [(x, continuum_norm(profile, s1, 1.0, x)) for x in t]
        rep = check_lower_envelope(series, profile.c0, eta, s1)
        assert rep.passed and not rep.degenerate and rep.min_ratio > 1

    def test_degenerate_zero_mean(self):
        t = np.linspace(0, 10, 12)
        rep = check_lower_envelope(list(zip(t, np.exp(-t))), 0.0, 1.0, 0.0)
        assert rep.degenerate and rep.passed and rep.constant == 0.0
        assert "degenerate" in str(rep)

    def test_fractional_constant(self):
        t = np.linspace(0, 100, 50)
        series = list(zip(t, 2.0 * (1 + t) ** -1.5 * (1 + 1 / (1 + t))))
        c = fractional_constant(series, 1.0, 2 / 3)
        assert c == pytest.approx(2.0 * (1 + 1 / 101), rel=1e-12)
        rep = check_lower_envelope(series, 0.0, 1.0, 1.0, beta=2 / 3, reference_series=series)
        assert rep.passed and rep.constant == pytest.approx(c)
        with pytest.raises(ValueError):
            check_lower_envelope(series, 0.0, 1.0, 1.0, beta=0.5)
