"""Exact master equation for one spinless dot between two reservoirs.

The reduced dynamics is closed by four time-dependent coefficients per
reservoir, F_1j(t) and F_2j(t), constructed from the scalar Volterra
solution u(t) through a chain of convolutions and quadratures:

    C_1j(t) = int_0^t K_bj(t-s) u*(s) ds
    C_2j(t) = int_0^t conj(K_cj)(t-s) u*(s) ds
    dA_j/dt = C_1j conj(C_2) + u * int_0^t conj(K_c)(t-s) C_1j(s) ds
    dB_j/dt = C_2j conj(C_1) + u * int_0^t K_b(t-s) C_2j(s) ds
    dD_1/dt = 2 Re(u C_1),   dD_2/dt = 2 Re(u C_2)
    F_1j = A_j - B_j + (C_1j (1 - D_2) + C_2j D_1) / u*
    F_2j = A_j - B_j - (C_1j D_2 + C_2j (1 - D_1)) / u*

with unsubscripted C/K denoting sums over both reservoirs.  The populations
then obey a closed two-level equation and the directed currents follow from
the real parts of the F's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.signal import fftconvolve

from . import envkit
from .envkit import DiscreteSpectrum, EnvironmentSpec, KernelTable
from .steady import CurrentSeries
from .units import NA_PER_INVERSE_NS
from .volterra import TimeGrid, solve_volterra_u


class CoefficientError(RuntimeError):
    """Coefficient construction became invalid (|u| underflow)."""


class PropagationError(RuntimeError):
    """Density propagation violated a conservation bound."""


@dataclass(frozen=True)
class SingleDotModel:
    """One spinless level at frequency Omega coupled to two reservoirs."""

    dot_frequency: float  # rad/ns
    env1: EnvironmentSpec
    env2: EnvironmentSpec
    grid: TimeGrid
    # Matched-bath overrides for oracle comparisons; when set, the kernels
    # are built from these spectra instead of the environments' windows.
    spectrum1: DiscreteSpectrum | None = None
    spectrum2: DiscreteSpectrum | None = None

    def __post_init__(self):
        if not self.dot_frequency > 0:
            raise ValueError("dot frequency must be positive")

    def spectra(self) -> tuple[DiscreteSpectrum, DiscreteSpectrum]:
        s1 = self.spectrum1 or envkit.build_spectrum(self.env1)
        s2 = self.spectrum2 or envkit.build_spectrum(self.env2)
        return s1, s2

    def kernels(self) -> tuple[KernelTable, KernelTable]:
        n_lags = self.grid.count + 1
        if self.spectrum1 is None and self.spectrum2 is None:
            return envkit.cached_thermal_pair(
                self.env1, self.env2, self.grid.step, n_lags
            )
        s1, s2 = self.spectra()
        return envkit.thermal_kernels_pair(s1, s2, self.grid.step, n_lags)


def default_step(model_scales: list[float], phase_budget: float = 0.05) -> float:
    """Step such that the fastest retained scale advances <= phase_budget rad."""
    return phase_budget / max(model_scales)


def default_grid(
    dot_frequency: float,
    envs: list[EnvironmentSpec],
    extra_scales: list[float] | None = None,
    horizon: float | None = None,
    max_count: int = 400_000,
) -> TimeGrid:
    """Grid from the default step policy and a relaxation-based horizon."""
    scales = [dot_frequency]
    for env in envs:
        scales.append(env.relative_bandwidth * dot_frequency)
        scales.append(abs(env.mu_radns - dot_frequency))
    scales.extend(extra_scales or [])
    h = default_step([s for s in scales if s > 0])
    if horizon is None:
        gamma = sum(envkit.golden_rule_rate(e) for e in envs)
        mem = min(envkit.kernel_memory_rate(e) for e in envs)
        horizon = 8.0 * max(1.0 / gamma, 1.0 / mem)
    count = int(math.ceil(horizon / h))
    if count > max_count:
        count = max_count
    return TimeGrid(step=h, count=count)


def _convolve_series(kernels: np.ndarray, series: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid convolution table y_r[n] = int_0^{t_n} K_r(t_n-s) f(s) ds.

    `kernels` is (r, N+1) and `series` (N+1,); returns (r, N+1).  These
    tables sit outside any solver feedback loop, so the whole triangular
    family of trapezoid sums is evaluated at once as a linear convolution
    (with the half-weight endpoint corrections applied exactly).
    """
    kernels = np.atleast_2d(kernels)
    n_pts = series.size
    out = np.empty((kernels.shape[0], n_pts), dtype=complex)
    for r in range(kernels.shape[0]):
        full = fftconvolve(kernels[r], series)[:n_pts]
        out[r] = h * (full - 0.5 * (kernels[r] * series[0] + kernels[r, 0] * series))
    out[:, 0] = 0.0
    return out


def _convolve_multi(kernel: np.ndarray, series_mat: np.ndarray, h: float) -> np.ndarray:
    """Like _convolve_series but one kernel against several integrands."""
    series_mat = np.atleast_2d(series_mat)
    n_pts = series_mat.shape[1]
    out = np.empty((series_mat.shape[0], n_pts), dtype=complex)
    for r in range(series_mat.shape[0]):
        full = fftconvolve(kernel, series_mat[r])[:n_pts]
        out[r] = h * (
            full - 0.5 * (kernel * series_mat[r, 0] + kernel[0] * series_mat[r])
        )
    out[:, 0] = 0.0
    return out


@dataclass
class ExactCoefficients:
    """Time series of the exact-ME coefficients on the model grid.

    f[i-1, j-1] holds F_ij; c, a, b, d follow the construction chain.
    `valid_count` is the number of leading grid points with |u| above the
    underflow guard (coefficients beyond it are not meaningful).
    """

    grid: TimeGrid
    u: np.ndarray
    c: np.ndarray  # (2, 2, N+1): C_ij
    a: np.ndarray  # (2, N+1): A_j
    b: np.ndarray  # (2, N+1): B_j
    d: np.ndarray  # (2, N+1) real: D_i
    f: np.ndarray  # (2, 2, N+1): F_ij
    valid_count: int

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def f_total(self, i: int) -> np.ndarray:
        """F_i1 + F_i2 for i in {1, 2}."""
        return self.f[i - 1, 0] + self.f[i - 1, 1]


def compute_exact_coefficients(
    model: SingleDotModel,
    kernel_tables: tuple[KernelTable, KernelTable] | None = None,
) -> ExactCoefficients:
    """Run the full coefficient pipeline for the exact single-dot ME."""
    grid = model.grid
    h = grid.step
    n_pts = grid.count + 1
    kt1, kt2 = kernel_tables if kernel_tables is not None else model.kernels()
    kb = np.vstack([kt1.kb[:n_pts], kt2.kb[:n_pts]])
    kc = np.vstack([kt1.kc[:n_pts], kt2.kc[:n_pts]])
    k_total = kb[0] + kb[1] + np.conj(kc[0]) + np.conj(kc[1])

    sol = solve_volterra_u(k_total, model.dot_frequency, grid)
    u = sol.values
    ustar = np.conj(u)
    valid_count = sol.underflow_index if sol.underflow_index is not None else n_pts
    guard = np.abs(u) >= 1e-12
    if not np.all(guard):
        valid_count = min(valid_count, int(np.argmin(guard)))

    # C_1j against K_bj, C_2j against conj(K_cj); all share the integrand u*.
    conv = _convolve_series(np.vstack([kb, np.conj(kc)]), ustar, h)
    c = np.empty((2, 2, n_pts), dtype=complex)
    c[0, 0], c[0, 1] = conv[0], conv[1]
    c[1, 0], c[1, 1] = conv[2], conv[3]
    c1 = c[0, 0] + c[0, 1]
    c2 = c[1, 0] + c[1, 1]

    kb_sum = kb[0] + kb[1]
    kc_sum = kc[0] + kc[1]
    inner_a = _convolve_multi(np.conj(kc_sum), c[0], h)  # against C_1j
    inner_b = _convolve_multi(kb_sum, c[1], h)  # against C_2j

    a = np.empty((2, n_pts), dtype=complex)
    b = np.empty((2, n_pts), dtype=complex)
    for j in range(2):
        rhs_a = c[0, j] * np.conj(c2) + u * inner_a[j]
        rhs_b = c[1, j] * np.conj(c1) + u * inner_b[j]
        a[j] = cumulative_trapezoid(rhs_a, dx=h, initial=0.0)
        b[j] = cumulative_trapezoid(rhs_b, dx=h, initial=0.0)

    d = np.empty((2, n_pts), dtype=float)
    d[0] = cumulative_trapezoid(2.0 * np.real(u * c1), dx=h, initial=0.0)
    d[1] = cumulative_trapezoid(2.0 * np.real(u * c2), dx=h, initial=0.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        inv_ustar = np.where(np.abs(ustar) < 1e-300, np.nan, 1.0 / ustar)
    f = np.empty((2, 2, n_pts), dtype=complex)
    for j in range(2):
        ab = a[j] - b[j]
        f[0, j] = ab + (c[0, j] * (1.0 - d[1]) + c[1, j] * d[0]) * inv_ustar
        f[1, j] = ab - (c[0, j] * d[1] + c[1, j] * (1.0 - d[0])) * inv_ustar
    if valid_count < n_pts:
        f[:, :, valid_count:] = np.nan

    return ExactCoefficients(
        grid=grid, u=u, c=c, a=a, b=b, d=d, f=f, valid_count=valid_count
    )


def propagate_rho_single(
    coeffs: ExactCoefficients,
    rho0: tuple[float, float],
    grid: TimeGrid | None = None,
) -> np.ndarray:
    """Propagate the populations (rho00, rho11) under the exact ME.

    Coherences decouple in this diagonal-basis model, so only the two
    populations evolve:  d(rho11)/dt = -2 (F_1^R rho11 + F_2^R rho00).
    Returns an (N+1, 2) array; trace is conserved by construction and
    checked against a 1e-6 drift bound.
    """
    grid = grid or coeffs.grid
    n_steps = grid.count
    if n_steps + 1 > coeffs.valid_count:
        raise CoefficientError(
            f"coefficients valid for {coeffs.valid_count} points "
            f"(|u| underflow), requested {n_steps + 1}; shorten the horizon"
        )
    h = grid.step
    f1 = np.real(coeffs.f_total(1))
    f2 = np.real(coeffs.f_total(2))
    out = np.empty((n_steps + 1, 2), dtype=float)
    out[0] = rho0
    r00, r11 = float(rho0[0]), float(rho0[1])

    def rate(f1v, f2v, r00v, r11v):
        flow = f1v * r11v + f2v * r00v
        return 2.0 * flow, -2.0 * flow

    for n in range(n_steps):
        fa, fb = f1[n], f2[n]
        fm1, fm2 = 0.5 * (f1[n] + f1[n + 1]), 0.5 * (f2[n] + f2[n + 1])
        fe1, fe2 = f1[n + 1], f2[n + 1]
        k1 = rate(fa, fb, r00, r11)
        k2 = rate(fm1, fm2, r00 + 0.5 * h * k1[0], r11 + 0.5 * h * k1[1])
        k3 = rate(fm1, fm2, r00 + 0.5 * h * k2[0], r11 + 0.5 * h * k2[1])
        k4 = rate(fe1, fe2, r00 + h * k3[0], r11 + h * k3[1])
        r00 += (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        r11 += (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        out[n + 1] = (r00, r11)
        if abs(r00 + r11 - 1.0) > 1e-6:
            raise PropagationError(
                f"trace drift {abs(r00 + r11 - 1.0):.2e} at t={h * (n + 1):.4g} ns; "
                "reduce the time step"
            )
    return out


def currents_single(coeffs: ExactCoefficients, rhos: np.ndarray) -> CurrentSeries:
    """Directed currents from the coefficient real parts and populations.

    I_1d = -2 q_e (F_21^R rho00 + F_11^R rho11),
    I_d2 = +2 q_e (F_22^R rho00 + F_12^R rho11),  reported in nA.
    """
    n_pts = rhos.shape[0]
    r00, r11 = rhos[:, 0], rhos[:, 1]
    f = np.real(coeffs.f[:, :, :n_pts])
    i_1d = -2.0 * NA_PER_INVERSE_NS * (f[1, 0] * r00 + f[0, 0] * r11)
    i_d2 = 2.0 * NA_PER_INVERSE_NS * (f[1, 1] * r00 + f[0, 1] * r11)
    return CurrentSeries(
        times=coeffs.grid.step * np.arange(n_pts), i_1d=i_1d, i_d2=i_d2
    )


def coupling_symmetry_residual(coeffs: ExactCoefficients) -> float:
    """max |F_12 - F_11 - F_22 + F_21| / max |F| over the valid horizon."""
    m = coeffs.valid_count
    f = coeffs.f[:, :, :m]
    resid = np.abs(f[0, 1] - f[0, 0] - f[1, 1] + f[1, 0]).max()
    scale = np.abs(f).max()
    return float(resid / scale) if scale > 0 else 0.0


def average_current_shortcut(coeffs: ExactCoefficients, tol: float = 1e-9) -> np.ndarray:
    """Density-independent average current for symmetric couplings, in nA.

    Valid only when the two reservoirs share one coupling spectrum, which
    forces F_12 - F_11 - F_22 + F_21 = 0; refuses otherwise.
    """
    resid = coupling_symmetry_residual(coeffs)
    if resid > tol:
        raise ValueError(
            "average-current shortcut requires symmetric couplings: "
            f"identity residual {resid:.2e} exceeds {tol:.0e}"
        )
    f = coeffs.f
    val = 0.5 * np.real(f[1, 1] - f[1, 0] + f[0, 1] - f[0, 0])
    return NA_PER_INVERSE_NS * val
