"""Zeroth-order non-Markovian ME for the spin-degenerate Coulomb dot.

One orbital holding up & down spins with on-site repulsion Omega_c.  The
coefficient closure keeps two two-time families per noise branch,

    df_b/dt = P(t) f_b,                 f_b(s,s) = 1,
    df_c/dt = -P(t) f_c,                f_c(s,s) = -1,
    dg_b/dt = P(t) g_b + S(t)(f_b+g_b), g_b(s,s) = 0,
    dg_c/dt = -P(t) g_c - S(t)(f_c+g_c), g_c(s,s) = 0,

    P = i*Omega + F_b + F_c - G_c,   S = i*Omega_c + 2*(G_b + G_c),

with the single-time integrals F_lj(t) = int K_lj(t-s) f_l(t,s) ds and
G_lj likewise from g_l (totals over reservoirs inside P and S).  Spin
symmetry removes the spin index throughout.  Valid deep in the weak
coupling regime; configurations outside Lambda <= 0.05, b >= 0.05 emit a
warning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import envkit
from .envkit import DiscreteSpectrum, EnvironmentSpec, KernelTable
from .fermions import annihilators_dense
from .meops import assemble, hamiltonian_part, pair_a_q_rho, pair_q_rho_comm
from .steady import CurrentSeries
from .units import NA_PER_INVERSE_NS
from .volterra import (
    AccumulatedIntegral,
    TimeGrid,
    TwoTimeSystem,
    run_two_time,
)

COEFF_NAMES = ("fb1", "fb2", "fc1", "fc2", "gb1", "gb2", "gc1", "gc2")

# Register indices of the 4 dot states (spin-down mode first):
# |0>, |up>, |down>, |double>.
IDX_EMPTY, IDX_UP, IDX_DOWN, IDX_DOUBLE = 0, 1, 2, 3


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpinDegModel:
    """Spin-degenerate dot: frequency, Coulomb energy, two reservoirs, grid."""

    dot_frequency: float  # rad/ns
    coulomb_energy: float  # rad/ns
    env1: EnvironmentSpec
    env2: EnvironmentSpec
    grid: TimeGrid
    spectrum1: DiscreteSpectrum | None = None
    spectrum2: DiscreteSpectrum | None = None

    def __post_init__(self):
        if self.coulomb_energy < 0:
            raise ValueError("coulomb energy must be >= 0")
        for env in (self.env1, self.env2):
            if env.coupling_factor > 0.05 or env.relative_bandwidth < 0.05:
                warnings.warn(
                    "zeroth-order approximation outside the validated regime "
                    f"(Lambda={env.coupling_factor}, b={env.relative_bandwidth}); "
                    "expected Lambda <= 0.05 and b >= 0.05",
                    stacklevel=2,
                )

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


@dataclass
class SpinDegCoefficients:
    """Single-time coefficient series F_lj, G_lj on the (possibly truncated) grid."""

    grid: TimeGrid
    series: dict[str, np.ndarray]
    n_steps: int
    converged: bool
    convergence_change: float

    @property
    def times(self) -> np.ndarray:
        return self.grid.step * np.arange(self.n_steps + 1)

    def totals(self) -> dict[str, np.ndarray]:
        s = self.series
        return {
            "fb": s["fb1"] + s["fb2"],
            "fc": s["fc1"] + s["fc2"],
            "gb": s["gb1"] + s["gb2"],
            "gc": s["gc1"] + s["gc2"],
        }

    def frozen_values(self) -> dict[str, complex]:
        return {k: complex(v[-1]) for k, v in self.series.items()}


def convergence_stop(
    names: tuple[str, ...], window_pts: int, tol: float
) -> callable:
    """Trailing-window relative-change stop rule for the coefficient engine."""

    def stop(series_view: dict[str, np.ndarray], n: int) -> bool:
        if n < 2 * window_pts:
            return False
        scale = max(np.abs(series_view[name]).max() for name in names)
        if scale == 0.0:
            return True
        worst = 0.0
        for name in names:
            s = series_view[name]
            worst = max(worst, np.abs(s[n] - s[n - window_pts : n]).max())
        return worst / scale < tol

    return stop


def coefficient_convergence(series: dict[str, np.ndarray], window_pts: int) -> float:
    """Largest trailing-window change over all series, in global-scale units.

    Normalized by the largest coefficient magnitude: a physically negligible
    series (for example the drain's hole branch with the chemical potential
    at the band floor) must not block convergence with its own noise floor.
    """
    scale = max(np.abs(s).max() for s in series.values())
    if scale == 0.0:
        return 0.0
    worst = 0.0
    for s in series.values():
        worst = max(worst, np.abs(s[-1] - s[-window_pts - 1 : -1]).max())
    return float(worst / scale)


def build_two_time_system(model: SpinDegModel) -> TwoTimeSystem:
    """The f/g coefficient system as a generic two-time specification."""
    omega, omega_c = model.dot_frequency, model.coulomb_energy

    def matrix(vals, t):
        p = (
            1j * omega
            + vals["fb1"] + vals["fb2"] + vals["fc1"] + vals["fc2"]
            - vals["gc1"] - vals["gc2"]
        )
        s = 1j * omega_c + 2.0 * (
            vals["gb1"] + vals["gb2"] + vals["gc1"] + vals["gc2"]
        )
        return np.array(
            [
                [p, 0, 0, 0],
                [0, -p, 0, 0],
                [s, 0, p + s, 0],
                [0, -s, 0, -(p + s)],
            ],
            dtype=complex,
        )

    rows = {"fb": 0, "fc": 1, "gb": 2, "gc": 3}
    # Integral names are f/g + kernel branch: fb uses K_b with row f_b, etc.
    integrals = tuple(
        AccumulatedIntegral(
            f"{fam}{j}", ((f"k{fam[1]}{j}", rows[fam], (1.0,)),)
        )
        for fam in ("fb", "fc", "gb", "gc")
        for j in (1, 2)
    )
    return TwoTimeSystem(
        dim=4,
        boundary=np.array([[1.0], [-1.0], [0.0], [0.0]], dtype=complex),
        integrals=integrals,
        matrix=matrix,
    )


def solve_spindeg_coefficients(
    model: SpinDegModel,
    kernel_tables: tuple[KernelTable, KernelTable] | None = None,
    *,
    stop_tol: float = 1e-5,
    allow_early_stop: bool = True,
    engine: str = "auto",
) -> SpinDegCoefficients:
    """Propagate the f/g two-time system and accumulate F, G.

    Stops early once every coefficient is flat over a trailing window of
    one kernel-memory time (the master equation then runs with frozen
    values).
    """
    kt1, kt2 = kernel_tables if kernel_tables is not None else model.kernels()
    kernels = {"kb1": kt1.kb, "kb2": kt2.kb, "kc1": kt1.kc, "kc2": kt2.kc}
    system = build_two_time_system(model)
    mem_rate = min(
        envkit.kernel_memory_rate(model.env1), envkit.kernel_memory_rate(model.env2)
    )
    window_pts = max(16, int(round(1.0 / (mem_rate * model.grid.step))))
    stop = (
        convergence_stop(COEFF_NAMES, window_pts, stop_tol)
        if allow_early_stop
        else None
    )
    result = run_two_time(system, kernels, model.grid, engine=engine, stop_when=stop)
    change = coefficient_convergence(
        result.integrals, min(window_pts, result.n_steps // 2)
    )
    return SpinDegCoefficients(
        grid=model.grid,
        series=result.integrals,
        n_steps=result.n_steps,
        converged=change < stop_tol,
        convergence_change=change,
    )


@dataclass
class SweepPoint:
    mu1_mev: float
    coulomb_mev: float
    bandwidth: float
    i_st_na: float | None
    converged: bool
    steady_time_ns: float | None


def steady_sweep_spindeg(
    template: SpinDegModel,
    mu1_values_mev: list[float],
    omega_c_values_mev: list[float],
    b_values: list[float],
) -> list[SweepPoint]:
    """Steady currents over the (mu1, Omega_c, b) grid.

    Each point rebuilds the reservoir pair on a shared window and runs the
    full freeze-and-extend pipeline; non-converged points are flagged in
    the row, never dropped.  Kernel tables are shared across the Omega_c
    axis (the step is pinned to the largest Coulomb energy of the grid).
    """
    from . import runs  # deferred: runs orchestrates the model modules
    from .units import mev_to_radns

    omega = template.dot_frequency
    step = 0.05 / max(
        [omega]
        + [mev_to_radns(o) for o in omega_c_values_mev if o > 0]
        + [abs(mev_to_radns(mu) - omega) for mu in mu1_values_mev]
    )
    rows = []
    for b in b_values:
        for mu1 in mu1_values_mev:
            e1, e2 = envkit.environment_pair(
                template.env1.temperature,
                mu1,
                template.env2.chemical_potential,
                template.env1.coupling_factor,
                b,
                omega,
                template.env1.mode_spacing,
            )
            mem = min(envkit.kernel_memory_rate(e1), envkit.kernel_memory_rate(e2))
            grid = TimeGrid(step, max(2, int(16.0 / mem / step)))
            for omc in omega_c_values_mev:
                model = SpinDegModel(omega, mev_to_radns(omc), e1, e2, grid)
                try:
                    res = runs.simulate_spindeg(model)
                    verdict = res.verdict
                    rows.append(
                        SweepPoint(
                            mu1, omc, b,
                            verdict.steady_value,
                            verdict.converged,
                            verdict.steady_time,
                        )
                    )
                except Exception:
                    rows.append(SweepPoint(mu1, omc, b, None, False, None))
    return rows


def _operators():
    d_dn, d_up = annihilators_dense(2)
    n_dn = d_dn.conj().T @ d_dn
    n_up = d_up.conj().T @ d_up
    return d_dn, d_up, n_dn, n_up


def generator_pairs(env_index: int | None = None):
    """Superoperator pairs keyed by coefficient total (fb, fc, gb, gc).

    With env_index (1 or 2) the pairs correspond to that reservoir's part of
    the ME only (the continuity-equation pieces the currents derive from).
    """
    d_dn, d_up, n_dn, n_up = _operators()
    pairs = {"fb": None, "fc": None, "gb": None, "gc": None}
    for sigma, (d_s, n_other) in enumerate(((d_dn, n_up), (d_up, n_dn))):
        add = {
            "fb": pair_q_rho_comm(d_s, d_s.conj().T),
            "gb": pair_q_rho_comm(d_s @ n_other, d_s.conj().T),
            "fc": pair_a_q_rho(d_s, d_s.conj().T),
            "gc": pair_a_q_rho(d_s, d_s.conj().T @ n_other),
        }
        for key, (s1, s2) in add.items():
            if pairs[key] is None:
                pairs[key] = (s1.copy(), s2.copy())
            else:
                pairs[key] = (pairs[key][0] + s1, pairs[key][1] + s2)
    return pairs


def hamiltonian_super(model: SpinDegModel) -> np.ndarray:
    d_dn, d_up, n_dn, n_up = _operators()
    h = model.dot_frequency * (n_dn + n_up) + model.coulomb_energy * (n_dn @ n_up)
    return hamiltonian_part(h)


def _coeff_values(series: dict[str, np.ndarray], idx) -> dict[str, complex]:
    return {
        "fb": series["fb1"][idx] + series["fb2"][idx],
        "fc": series["fc1"][idx] + series["fc2"][idx],
        "gb": series["gb1"][idx] + series["gb2"][idx],
        "gc": series["gc1"][idx] + series["gc2"][idx],
    }


def propagate_rho_spindeg(
    coeffs: SpinDegCoefficients,
    rho0: np.ndarray,
    model: SpinDegModel,
) -> np.ndarray:
    """Propagate the 4x4 dot density matrix over the coefficient window.

    Returns (n_steps+1, 4, 4); trace conservation is structural (the
    generator annihilates the trace covector) and checked to 1e-8.
    """
    pairs = generator_pairs()
    base = hamiltonian_super(model)
    series = coeffs.series
    h = coeffs.grid.step
    n_steps = coeffs.n_steps
    out = np.empty((n_steps + 1, 4, 4), dtype=complex)
    out[0] = rho0
    vec = np.asarray(rho0, dtype=complex).reshape(-1)
    for n in range(n_steps):
        g0 = assemble(base, pairs, _coeff_values(series, n))
        g1 = assemble(base, pairs, _coeff_values(series, n + 1))
        gh = 0.5 * (g0 + g1)
        k1 = g0 @ vec
        k2 = gh @ (vec + 0.5 * h * k1)
        k3 = gh @ (vec + 0.5 * h * k2)
        k4 = g1 @ (vec + h * k3)
        vec = vec + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[n + 1] = vec.reshape(4, 4)
        tr = np.real(vec[0] + vec[5] + vec[10] + vec[15])
        if abs(tr - 1.0) > 1e-8:
            raise RuntimeError(
                f"trace drift {abs(tr - 1.0):.2e} at step {n + 1}; reduce step"
            )
    return out


def rho_spin_components(rho: np.ndarray) -> dict[str, np.ndarray]:
    """Populations and the down-up coherence from 4x4 densities."""
    rho = np.asarray(rho)
    return {
        "rho00": rho[..., IDX_EMPTY, IDX_EMPTY].real,
        "rho_dd": rho[..., IDX_DOWN, IDX_DOWN].real,
        "rho_uu": rho[..., IDX_UP, IDX_UP].real,
        "rho22": rho[..., IDX_DOUBLE, IDX_DOUBLE].real,
        "rho_du": rho[..., IDX_DOWN, IDX_UP],
    }


def currents_spindeg(
    coeffs: SpinDegCoefficients, rhos: np.ndarray
) -> CurrentSeries:
    """Directed currents from the coefficient real parts and populations."""
    comp = rho_spin_components(rhos)
    n_pts = rhos.shape[0]
    s = coeffs.series
    singles = comp["rho_dd"] + comp["rho_uu"]
    doubles = comp["rho22"]
    empt = comp["rho00"]

    def directed(j: int, sign: float) -> np.ndarray:
        fb = np.real(s[f"fb{j}"][:n_pts])
        fc = np.real(s[f"fc{j}"][:n_pts])
        gb = np.real(s[f"gb{j}"][:n_pts])
        gc = np.real(s[f"gc{j}"][:n_pts])
        val = 2.0 * fc * empt + (fc + gc + fb) * singles + 2.0 * (fb + gb) * doubles
        return sign * 2.0 * NA_PER_INVERSE_NS * val

    return CurrentSeries(
        times=coeffs.grid.step * np.arange(n_pts),
        i_1d=directed(1, -1.0),
        i_d2=directed(2, +1.0),
    )


def currents_from_continuity(
    coeffs: SpinDegCoefficients, rhos: np.ndarray, model: SpinDegModel
) -> CurrentSeries:
    """Independent current route: I = q_e Tr(N v_j(rho)) from the ME split.

    Cross-checks the closed-form current expressions against the
    reservoir-resolved generator pieces.
    """
    d_dn, d_up, n_dn, n_up = _operators()
    n_tot = n_dn + n_up
    n_pts = rhos.shape[0]
    out = {}
    for j in (1, 2):
        pairs = {}
        d_ops = ((d_dn, n_up), (d_up, n_dn))
        for d_s, n_other in d_ops:
            add = {
                f"fb{j}": pair_q_rho_comm(d_s, d_s.conj().T),
                f"gb{j}": pair_q_rho_comm(d_s @ n_other, d_s.conj().T),
                f"fc{j}": pair_a_q_rho(d_s, d_s.conj().T),
                f"gc{j}": pair_a_q_rho(d_s, d_s.conj().T @ n_other),
            }
            for key, (s1, s2) in add.items():
                if key in pairs:
                    pairs[key] = (pairs[key][0] + s1, pairs[key][1] + s2)
                else:
                    pairs[key] = (s1, s2)
        vals = np.zeros(n_pts)
        trn = n_tot.reshape(-1)
        for n in range(n_pts):
            gen = assemble(
                np.zeros((16, 16), dtype=complex),
                pairs,
                {k: coeffs.series[k][n] for k in pairs},
            )
            v = (gen @ rhos[n].reshape(-1)).reshape(4, 4)
            vals[n] = np.real(np.trace(n_tot @ v))
        out[j] = vals * NA_PER_INVERSE_NS
    return CurrentSeries(
        times=coeffs.grid.step * np.arange(n_pts), i_1d=out[1], i_d2=-out[2]
    )
