"""Time grids, memory-integral quadrature, and two-time propagation engines.

Two solver entry points live here:

* :func:`solve_volterra_u` integrates the scalar linear Volterra
  integro-differential equation  du/dt = i*W*u - int_0^t K(s-t) u(s) ds
  with a trapezoid predictor-corrector (one fixed-point sweep).
* :func:`propagate_two_time` advances a family of two-time coefficient
  columns f(t, s), one column per boundary time s, whose right-hand side
  couples to the columns only through accumulated single-time integrals
  F_x(t) = int_0^t K_x(t-s) f(t, s) ds.  Columns are advanced with classical
  Runge-Kutta stages using integral values interpolated from a predictor
  pass; the quadrature is composite trapezoid on the shared uniform grid.

Both schemes are globally second-order accurate (the trapezoid quadrature
dominates the error).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np


class GridError(ValueError):
    """Invalid time grid or off-grid request."""


class TwoTimeBlowUpError(RuntimeError):
    """A coefficient column exceeded the stability bound."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid: t_i = i*step for i = 0..count."""

    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise GridError("step must be positive")
        if self.count < 2:
            raise GridError("count must be at least 2")

    @property
    def horizon(self) -> float:
        return self.step * self.count

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(self.count + 1)

    def index_of(self, t: float) -> int:
        """Grid index of time t; t must sit on the grid."""
        n = int(round(t / self.step))
        if n < 0 or n > self.count or abs(t - n * self.step) > 1e-9 * self.step:
            raise GridError(f"time {t} is not on the grid")
        return n


def memory_integral(kernel: np.ndarray, series: np.ndarray, step: float, t: float) -> complex:
    """Composite-trapezoid value of int_0^t K(t-s) f(s) ds.

    `kernel` holds K at non-negative lags m*step and `series` holds f on the
    same grid starting at s = 0.  Exact for constant integrands up to
    rounding.
    """
    if step <= 0:
        raise GridError("step must be positive")
    n = int(round(t / step))
    if n < 0 or abs(t - n * step) > 1e-9 * step:
        raise GridError(f"time {t} is not on the integration grid")
    if n >= len(series) or n >= len(kernel):
        raise GridError("series/kernel too short for the requested time")
    if n == 0:
        return 0.0 + 0.0j
    ker = kernel[: n + 1][::-1]  # K(t - s_m) for m = 0..n
    total = np.dot(ker, series[: n + 1])
    total -= 0.5 * (ker[0] * series[0] + ker[-1] * series[n])
    return complex(step * total)


@dataclass
class VolterraSolution:
    """Scalar Volterra solution u(t) on the grid, with an underflow flag.

    `underflow_index` is the first grid index where |u| fell below 1e-14
    (division by u* happens downstream), or None.
    """

    values: np.ndarray
    underflow_index: int | None = None


def solve_volterra_u(kernel: np.ndarray, omega: float, grid: TimeGrid) -> VolterraSolution:
    """Solve du/dt = i*omega*u - int_0^t K(s-t) u(s) ds with u(0) = 1.

    `kernel` tabulates K at non-negative lags on the grid step; the negative
    lag K(s-t) is evaluated through the Hermitian symmetry
    K(-tau) = conj(K(tau)).  Trapezoid predictor-corrector stepping, one
    fixed-point sweep per step.
    """
    n_steps = grid.count
    if len(kernel) < n_steps + 1:
        raise GridError("kernel must cover lags up to the grid horizon")
    h = grid.step
    kc = np.conj(np.asarray(kernel[: n_steps + 1], dtype=complex))
    kc_rev = kc[::-1].copy()
    kc0 = kc[0]
    u = np.empty(n_steps + 1, dtype=complex)
    u[0] = 1.0
    mem = 0.0 + 0.0j  # accumulated integral at t_n
    underflow = None
    iw = 1j * omega
    last = n_steps  # L-1-n offsets into kc_rev
    for n in range(n_steps):
        # Interior + left-endpoint part of the integral at t_{n+1}; only the
        # s = t_{n+1} endpoint depends on the yet-unknown u value.
        part = np.dot(kc_rev[last - n : last], u[1 : n + 1]) + 0.5 * kc[n + 1] * u[0]
        rhs_n = iw * u[n] - mem
        u_pred = u[n] + h * rhs_n
        mem_pred = h * (part + 0.5 * kc0 * u_pred)
        u[n + 1] = u[n] + 0.5 * h * (rhs_n + iw * u_pred - mem_pred)
        mem = h * (part + 0.5 * kc0 * u[n + 1])
        if underflow is None and abs(u[n + 1]) < 1e-14:
            underflow = n + 1
    return VolterraSolution(values=u, underflow_index=underflow)


@dataclass(frozen=True)
class AccumulatedIntegral:
    """One single-time integral F_x(t) = int_0^t K(t-s) g_x(t, s) ds.

    The integrand selects column components: g_x(t, s) is the sum over the
    listed terms of kernel-weighted rows, each term contracting the column
    block (dim, n_seeds) at boundary time s with `seed_weights` on the seed
    axis at component `row`.  kind "history" integrates over the recorded
    trajectory of the s = 0 column instead (used by the scalar Volterra
    instantiation).
    """

    name: str
    terms: tuple[tuple[str, int, tuple[float, ...]], ...]
    kind: str = "columns"  # or "history"


@dataclass(frozen=True)
class TwoTimeSystem:
    """Linear two-time coefficient system closed through its integrals.

    d/dt f(t, s) = M(t) f(t, s) [+ r(t) for affine systems], where M (and r)
    depend on t only through the accumulated integrals.  `boundary` gives
    f(s, s) for every seed.
    """

    dim: int
    boundary: np.ndarray  # (dim, n_seeds)
    integrals: tuple[AccumulatedIntegral, ...]
    matrix: Callable[[Mapping[str, complex], float], np.ndarray]
    forcing: Callable[[Mapping[str, complex], float], np.ndarray] | None = None
    seed_columns: bool = True  # seed a fresh column at every step

    @property
    def n_seeds(self) -> int:
        return self.boundary.shape[1]


@dataclass
class TwoTimeResult:
    """Integral series on the grid plus diagnostics."""

    grid: TimeGrid
    integrals: dict[str, np.ndarray]
    n_steps: int  # may be smaller than grid.count when stopped early
    columns: np.ndarray  # (dim, n_seeds, n_steps+1) at the final time
    history: np.ndarray | None
    column_ops: int  # stage evaluations, for work-scaling checks

    @property
    def times(self) -> np.ndarray:
        return self.grid.step * np.arange(self.n_steps + 1)


def _quadrature(
    integrals,
    kernels_rev,
    kernels,
    cols,
    history,
    n,
    h,
):
    """Trapezoid values of every accumulated integral at grid index n."""
    out = {}
    contracted = {}
    for spec in integrals:
        total = 0.0 + 0.0j
        if n > 0:
            for kname, row, wq in spec.terms:
                if spec.kind == "history":
                    g = history[row, 0, : n + 1]
                else:
                    key = wq
                    if key not in contracted:
                        wvec = np.asarray(wq, dtype=complex)
                        contracted[key] = np.tensordot(wvec, cols[:, :, : n + 1], (0, 1))
                    g = contracted[key][row]
                ker = kernels_rev[kname]
                sl = ker[ker.size - 1 - n : ker.size]
                val = np.dot(sl, g)
                val -= 0.5 * (kernels[kname][n] * g[0] + kernels[kname][0] * g[n])
                total += val
        out[spec.name] = h * total
    return out


def propagate_two_time(
    system: TwoTimeSystem,
    kernels: Mapping[str, np.ndarray],
    grid: TimeGrid,
    *,
    stepping: str = "rk4",
    max_abs: float = 1e6,
    stop_when: Callable[[dict[str, np.ndarray], int], bool] | None = None,
    stop_check_every: int = 64,
) -> TwoTimeResult:
    """Advance all coefficient columns of `system` across `grid`.

    At each step the active columns are advanced with a classical 4-stage
    Runge-Kutta update whose stage-time integral values are interpolated
    from a frozen-coefficient predictor pass; a fresh column is seeded at
    t = s with its boundary value and the integrals are recomputed by
    trapezoid quadrature over all columns.  `stepping="pc"` switches to the
    trapezoid predictor-corrector used by :func:`solve_volterra_u` (for
    cross-validation of the scalar instantiation).

    Raises TwoTimeBlowUpError naming the first exploding column when any
    |f| exceeds `max_abs`.
    """
    if stepping not in ("rk4", "pc"):
        raise ValueError(f"unknown stepping scheme {stepping!r}")
    h = grid.step
    n_max = grid.count
    for name, arr in kernels.items():
        if len(arr) < n_max + 1:
            raise GridError(f"kernel {name!r} must cover lags up to the horizon")
    kers = {k: np.asarray(v, dtype=complex)[: n_max + 1] for k, v in kernels.items()}
    kers_rev = {k: v[::-1].copy() for k, v in kers.items()}
    dim, n_seeds = system.boundary.shape
    track_history = any(i.kind == "history" for i in system.integrals)

    cols = np.zeros((dim, n_seeds, n_max + 1), dtype=complex)
    cols[:, :, 0] = system.boundary
    history = np.zeros((dim, n_seeds, n_max + 1), dtype=complex) if track_history else None
    if track_history:
        history[:, :, 0] = system.boundary
    series = {spec.name: np.zeros(n_max + 1, dtype=complex) for spec in system.integrals}
    vals_n = {spec.name: 0.0 + 0.0j for spec in system.integrals}
    column_ops = 0

    def forcing(vals, t):
        if system.forcing is None:
            return None
        return system.forcing(vals, t)

    def apply(mat, block, add):
        out = np.tensordot(mat, block, (1, 0))
        if add is not None:
            out += add[:, :, None]
        return out

    n_done = n_max
    for n in range(n_max):
        t_n = n * h
        n_cols = n + 1 if system.seed_columns else 1
        active = cols[:, :, :n_cols]
        m0 = system.matrix(vals_n, t_n)
        r0 = forcing(vals_n, t_n)

        # Predictor pass: frozen coefficients over the whole step.
        if stepping == "rk4":
            k1 = apply(m0, active, r0)
            k2 = apply(m0, active + 0.5 * h * k1, r0)
            k3 = apply(m0, active + 0.5 * h * k2, r0)
            k4 = apply(m0, active + h * k3, r0)
            pred = active + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            pred = active + h * apply(m0, active, r0)
        if system.seed_columns:
            cols_p = np.concatenate([pred, system.boundary[:, :, None]], axis=2)
        else:
            cols_p = pred
        if track_history:
            hist_p = history.copy()
            hist_p[:, :, n + 1] = pred[:, :, 0]
        else:
            hist_p = None
        vals_p = _quadrature(
            system.integrals, kers_rev, kers, cols_p, hist_p, n + 1, h
        )

        # Corrector with stage-interpolated integrals.
        if stepping == "rk4":
            vals_h = {k: 0.5 * (vals_n[k] + vals_p[k]) for k in vals_n}
            mh = system.matrix(vals_h, t_n + 0.5 * h)
            m1 = system.matrix(vals_p, t_n + h)
            rh = forcing(vals_h, t_n + 0.5 * h)
            r1 = forcing(vals_p, t_n + h)
            k1 = apply(m0, active, r0)
            k2 = apply(mh, active + 0.5 * h * k1, rh)
            k3 = apply(mh, active + 0.5 * h * k2, rh)
            k4 = apply(m1, active + h * k3, r1)
            new = active + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            column_ops += 8 * (n + 1)
        else:
            m1 = system.matrix(vals_p, t_n + h)
            r1 = forcing(vals_p, t_n + h)
            new = active + 0.5 * h * (apply(m0, active, r0) + apply(m1, pred, r1))
            column_ops += 3 * (n + 1)

        peak = np.abs(new).max()
        if not np.isfinite(peak) or peak > max_abs:
            flat = np.abs(new)
            r, q, m = np.unravel_index(np.nanargmax(flat), flat.shape)
            raise TwoTimeBlowUpError(
                f"column s={m * h:.6g} (component {r}, seed {q}) reached "
                f"|f|={flat[r, q, m]:.3e} at t={t_n + h:.6g}; reduce the step"
            )
        cols[:, :, :n_cols] = new
        if system.seed_columns:
            cols[:, :, n + 1] = system.boundary
        if track_history:
            history[:, :, n + 1] = new[:, :, 0]
        vals_n = _quadrature(
            system.integrals,
            kers_rev,
            kers,
            cols[:, :, : n + 2],
            history,
            n + 1,
            h,
        )
        for k, v in vals_n.items():
            series[k][n + 1] = v

        if stop_when is not None and (n + 1) % stop_check_every == 0:
            view = {k: v[: n + 2] for k, v in series.items()}
            if stop_when(view, n + 1):
                n_done = n + 1
                break

    series = {k: v[: n_done + 1] for k, v in series.items()}
    return TwoTimeResult(
        grid=grid,
        integrals=series,
        n_steps=n_done,
        columns=cols[:, :, : n_done + 1],
        history=None if history is None else history[:, :, : n_done + 1],
        column_ops=column_ops,
    )


def propagate_two_time_fundamental(
    system: TwoTimeSystem,
    kernels: Mapping[str, np.ndarray],
    grid: TimeGrid,
    *,
    stop_when: Callable[[dict[str, np.ndarray], int], bool] | None = None,
    stop_check_every: int = 64,
    condition_limit: float = 1e8,
) -> TwoTimeResult:
    """Column-free propagation of a linear two-time system.

    Every column obeys the same linear flow, so f(t, s) = W(t) W(s)^-1 B
    with W the fundamental matrix; the engine advances W and its inverse
    flow Y (dY/dt = -Y M) and realizes the quadratures as kernel
    convolutions against the stored history Y(s) @ B.  The stepping and
    quadrature rules mirror :func:`propagate_two_time` (frozen-coefficient
    predictor, stage-interpolated RK4, trapezoid), so the two routes agree
    to discretization accuracy; this one costs O(dim) column work per step.

    Raises TwoTimeBlowUpError when the fundamental matrix becomes too
    ill-conditioned for the factored representation (strongly damped or
    amplified systems); callers should then fall back to the column engine.
    """
    h = grid.step
    n_max = grid.count
    if any(i.kind != "columns" for i in system.integrals):
        raise ValueError("fundamental path supports column integrals only")
    if not system.seed_columns:
        raise ValueError("fundamental path requires seeded columns")
    kers = {k: np.asarray(v, dtype=complex)[: n_max + 1] for k, v in kernels.items()}
    for name, arr in kers.items():
        if len(arr) < n_max + 1:
            raise GridError(f"kernel {name!r} must cover lags up to the horizon")
    kers_rev = {k: v[::-1].copy() for k, v in kers.items()}
    dim, n_seeds = system.boundary.shape

    # Unique seed-weight vectors across integral terms.
    weight_keys: list[tuple[float, ...]] = []
    for spec in system.integrals:
        for _, _, wq in spec.terms:
            if wq not in weight_keys:
                weight_keys.append(wq)
    seed_vecs = {
        wq: system.boundary @ np.asarray(wq, dtype=complex) for wq in weight_keys
    }

    w_mat = np.eye(dim, dtype=complex)
    y_mat = np.eye(dim, dtype=complex)
    # Histories of Y(s) @ v for each unique seed vector.
    hist = {wq: np.zeros((dim, n_max + 1), dtype=complex) for wq in weight_keys}
    for wq, v in seed_vecs.items():
        hist[wq][:, 0] = v
    series = {spec.name: np.zeros(n_max + 1, dtype=complex) for spec in system.integrals}
    vals_n = {spec.name: 0.0 + 0.0j for spec in system.integrals}

    def rk4_pair(wm, ym, mats):
        m0, mh, m1 = mats
        k1 = m0 @ wm
        k2 = mh @ (wm + 0.5 * h * k1)
        k3 = mh @ (wm + 0.5 * h * k2)
        k4 = m1 @ (wm + h * k3)
        w_new = wm + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        l1 = -(ym @ m0)
        l2 = -((ym + 0.5 * h * l1) @ mh)
        l3 = -((ym + 0.5 * h * l2) @ mh)
        l4 = -((ym + h * l3) @ m1)
        y_new = ym + (h / 6.0) * (l1 + 2 * l2 + 2 * l3 + l4)
        return w_new, y_new

    def quadrature(n, w_now, hist_arrays):
        out = {}
        conv_cache: dict[tuple[str, tuple[float, ...]], np.ndarray] = {}
        for spec in system.integrals:
            total = 0.0 + 0.0j
            if n > 0:
                for kname, row_idx, wq in spec.terms:
                    key = (kname, wq)
                    if key not in conv_cache:
                        ker = kers_rev[kname]
                        sl = ker[ker.size - 1 - n : ker.size]
                        g = hist_arrays[wq][:, : n + 1]
                        vec = g @ sl
                        vec -= 0.5 * (
                            kers[kname][n] * g[:, 0] + kers[kname][0] * g[:, n]
                        )
                        conv_cache[key] = w_now @ vec
                    total += conv_cache[key][row_idx]
            out[spec.name] = h * total
        return out

    n_done = n_max
    for n in range(n_max):
        t_n = n * h
        m0 = system.matrix(vals_n, t_n)
        # Predictor: frozen coefficients across the step.
        w_p, y_p = rk4_pair(w_mat, y_mat, (m0, m0, m0))
        hist_p = {wq: arr.copy() for wq, arr in hist.items()}
        for wq, v in seed_vecs.items():
            hist_p[wq][:, n + 1] = y_p @ v
        vals_p = quadrature(n + 1, w_p, hist_p)
        vals_h = {k: 0.5 * (vals_n[k] + vals_p[k]) for k in vals_n}
        mh = system.matrix(vals_h, t_n + 0.5 * h)
        m1 = system.matrix(vals_p, t_n + h)
        w_mat, y_mat = rk4_pair(w_mat, y_mat, (m0, mh, m1))
        cond = np.abs(w_mat).max() * np.abs(y_mat).max() * dim
        if not np.isfinite(cond) or cond > condition_limit:
            raise TwoTimeBlowUpError(
                f"fundamental matrix condition {cond:.2e} exceeds "
                f"{condition_limit:.0e} at t={t_n + h:.6g}; use the column engine"
            )
        for wq, v in seed_vecs.items():
            hist[wq][:, n + 1] = y_mat @ v
        vals_n = quadrature(n + 1, w_mat, hist)
        for k, v in vals_n.items():
            series[k][n + 1] = v
        if stop_when is not None and (n + 1) % stop_check_every == 0:
            view = {k: v[: n + 2] for k, v in series.items()}
            if stop_when(view, n + 1):
                n_done = n + 1
                break

    series = {k: v[: n_done + 1] for k, v in series.items()}
    return TwoTimeResult(
        grid=grid,
        integrals=series,
        n_steps=n_done,
        columns=np.empty((dim, n_seeds, 0), dtype=complex),
        history=None,
        column_ops=0,
    )


def run_two_time(system, kernels, grid, *, engine="auto", stop_when=None):
    """Dispatch a two-time system to the fundamental fast path or columns.

    The fundamental factorization is exact for these linear systems and
    costs O(dim) per step; the column engine is the fallback when the
    factored representation is too ill-conditioned (far outside the
    weak-coupling regime).
    """
    if engine in ("auto", "fundamental"):
        try:
            return propagate_two_time_fundamental(
                system, kernels, grid, stop_when=stop_when
            )
        except TwoTimeBlowUpError:
            if engine == "fundamental":
                raise
    return propagate_two_time(system, kernels, grid, stop_when=stop_when)
