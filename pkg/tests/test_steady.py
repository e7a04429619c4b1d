import numpy as np
import pytest

from dotflux.steady import (
    CurrentSeries,
    SteadyPolicy,
    detect_steady,
    first_stationary_time,
)


def series(times, i_avg, delta=None):
    delta = np.zeros_like(i_avg) if delta is None else delta
    return CurrentSeries(
        times=times, i_1d=i_avg + 0.5 * delta, i_d2=i_avg - 0.5 * delta
    )


class TestDetectSteady:
    def test_constant_series_steady_at_window_end(self):
        t = np.linspace(0, 1, 400)
        cur = series(t, np.full_like(t, -3.0))
        verdict = detect_steady(cur, SteadyPolicy(window=0.25))
        assert verdict.converged
        assert verdict.steady_time == pytest.approx(0.25, abs=0.01)
        assert verdict.steady_value == pytest.approx(-3.0)

    def test_pure_oscillation_never_steady(self):
        t = np.linspace(0, 10, 4000)
        cur = series(t, np.sin(8.0 * t) + 2.0)
        verdict = detect_steady(cur, SteadyPolicy(window=2.0))
        assert not verdict.converged
        assert verdict.reason

    def test_unbalanced_currents_rejected(self):
        t = np.linspace(0, 1, 300)
        flat = np.full_like(t, 4.0)
        cur = series(t, flat, delta=np.full_like(t, 0.1))
        verdict = detect_steady(cur, SteadyPolicy(window=0.2))
        assert not verdict.converged

    def test_short_series_inconclusive(self):
        t = np.linspace(0, 0.1, 50)
        cur = series(t, np.ones_like(t))
        verdict = detect_steady(cur, SteadyPolicy(window=1.0))
        assert not verdict.converged
        assert "window" in verdict.reason

    def test_exponential_approach(self):
        t = np.linspace(0, 20, 8000)
        i_avg = -5.0 * (1 - np.exp(-t))
        cur = series(t, i_avg, delta=4.0 * np.exp(-t))
        verdict = detect_steady(cur, SteadyPolicy(window=2.0))
        assert verdict.converged
        assert verdict.steady_value == pytest.approx(-5.0, rel=1e-3)
        assert abs(cur.delta_i[np.searchsorted(t, verdict.steady_time)]) < 1e-3 * 5.0


class TestFirstStationaryPoint:
    def test_parabola_vertex(self):
        t = np.linspace(0, 2, 2001)
        vals = -((t - 0.7) ** 2)
        tp = first_stationary_time(t, vals)
        assert tp == pytest.approx(0.7, abs=2e-3)

    def test_monotone_has_none(self):
        t = np.linspace(0, 1, 100)
        assert first_stationary_time(t, np.exp(-t)) is None

    def test_damped_oscillation_first_extremum(self):
        t = np.linspace(0, 5, 5000)
        vals = 1 - np.exp(-t) * np.cos(4.0 * t)
        tp = first_stationary_time(t, vals)
        # First stationary point of the full expression (slightly below the
        # bare quarter period because of the envelope).
        from scipy.optimize import brentq

        exact = brentq(
            lambda x: np.exp(-x) * (np.cos(4 * x) + 4 * np.sin(4 * x)), 0.1, 0.8
        )
        assert tp == pytest.approx(exact, abs=2e-3)
