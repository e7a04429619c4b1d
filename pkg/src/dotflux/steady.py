"""Current series container and steady-state detection.

A run produces the two directed currents I_1d(t) (reservoir 1 -> dot) and
I_d2(t) (dot -> reservoir 2).  Their difference Delta I feeds the dot
population, so a true steady state is flagged by Delta I -> 0 together with
a flat trailing window of the average current I = (I_1d + I_d2)/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SteadyPolicy:
    """Detection rule: trailing window width and flatness/balance tolerances."""

    window: float  # ns
    rel_tol: float = 1e-4  # max relative change of I over the window
    balance_tol: float = 1e-3  # |Delta I / I| at the detected time


@dataclass
class SteadyVerdict:
    converged: bool
    steady_value: float | None = None  # nA
    steady_time: float | None = None  # ns
    window_rel_change: float | None = None
    balance_ratio: float | None = None
    first_stationary_time: float | None = None  # t_p
    reason: str = ""


@dataclass
class CurrentSeries:
    """Directed currents in nA on a (possibly non-uniform) time grid."""

    times: np.ndarray
    i_1d: np.ndarray
    i_d2: np.ndarray
    steady_value: float | None = None
    steady_time: float | None = None

    @property
    def delta_i(self) -> np.ndarray:
        return self.i_1d - self.i_d2

    @property
    def i_avg(self) -> np.ndarray:
        return 0.5 * (self.i_1d + self.i_d2)


def first_stationary_time(times: np.ndarray, values: np.ndarray) -> float | None:
    """Time of the first sign change of dI/dt (linearly interpolated)."""
    dv = np.diff(values)
    dt = np.diff(times)
    slope = dv / dt
    # Skip the leading zero-slope points at t=0 where all currents vanish.
    start = 0
    while start < slope.size and slope[start] == 0.0:
        start += 1
    for k in range(start, slope.size - 1):
        s0, s1 = slope[k], slope[k + 1]
        if s0 == 0.0:
            return 0.5 * (times[k] + times[k + 1])
        if s0 * s1 < 0.0:
            # Slopes are centered on interval midpoints; interpolate the zero.
            m0 = 0.5 * (times[k] + times[k + 1])
            m1 = 0.5 * (times[k + 1] + times[k + 2])
            return m0 + (m1 - m0) * s0 / (s0 - s1)
    return None


def detect_steady(series: CurrentSeries, policy: SteadyPolicy) -> SteadyVerdict:
    """Scan for the first time satisfying the trailing-window steady rule.

    Steady when the relative change of the average current over the trailing
    window stays below `rel_tol` and |Delta I / I| is below `balance_tol`.
    Returns an inconclusive verdict when the series is shorter than one
    window.
    """
    t = np.asarray(series.times, dtype=float)
    i_avg = series.i_avg
    delta = series.delta_i
    t_p = first_stationary_time(t, i_avg)
    if t.size < 3 or t[-1] - t[0] < policy.window:
        return SteadyVerdict(
            converged=False,
            first_stationary_time=t_p,
            reason="series shorter than the detection window",
        )

    start = int(np.searchsorted(t, t[0] + policy.window))
    best_rel = None
    best_bal = None
    for k in range(start, t.size):
        lo = int(np.searchsorted(t, t[k] - policy.window))
        window_vals = i_avg[lo : k + 1]
        ref = abs(i_avg[k])
        scale = ref if ref > 0 else np.abs(window_vals).max()
        if scale == 0.0:
            rel = 0.0
        else:
            rel = np.abs(window_vals - i_avg[k]).max() / scale
        bal = abs(delta[k]) / ref if ref > 0 else abs(delta[k])
        if best_rel is None or rel < best_rel:
            best_rel, best_bal = rel, bal
        if rel < policy.rel_tol and bal < policy.balance_tol:
            # The steady value estimates I(t -> infinity): average the most
            # settled stretch of the series (trailing tenth of a window
            # anchored at the series end, which lies at or past the
            # detection time).
            lo_mean = int(np.searchsorted(t, t[-1] - 0.1 * policy.window))
            value = float(np.mean(i_avg[lo_mean:]))
            return SteadyVerdict(
                converged=True,
                steady_value=value,
                steady_time=float(t[k]),
                window_rel_change=float(rel),
                balance_ratio=float(bal),
                first_stationary_time=t_p,
            )
    return SteadyVerdict(
        converged=False,
        window_rel_change=None if best_rel is None else float(best_rel),
        balance_ratio=None if best_bal is None else float(best_bal),
        first_stationary_time=t_p,
        reason="no trailing window met the steady tolerances",
    )
