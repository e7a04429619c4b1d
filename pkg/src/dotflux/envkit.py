"""Reservoir spectra, occupations, and correlation-kernel tables.

Each reservoir is a discretized fermionic bath: modes on a uniform frequency
grid, Lorentzian-weighted couplings, and Fermi-Dirac occupations.  After the
particle-hole purification every mode splits into an electron branch (b) and
a hole branch (c) with couplings

    t_b = sqrt(1 - nbar) * t,    t_c = sqrt(nbar) * t,

and the memory kernels consumed by the solvers are the mode sums

    K_b(tau) = sum_k t_b_k^2 exp(-i w_k tau),
    K_c(tau) = sum_k t_c_k^2 exp(+i w_k tau).

Kernels are tabulated on a uniform non-negative lag grid whose step equals
the solver time step; values at negative lags follow from the Hermitian
symmetry K(-tau) = conj(K(tau)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit

from .units import mev_to_radns, thermal_energy_radns


class ReservoirError(ValueError):
    """Invalid reservoir description or kernel request."""


@dataclass(frozen=True)
class EnvironmentSpec:
    """Physical description of one thermal fermionic reservoir.

    Parameters
    ----------
    temperature : float
        Reservoir temperature in kelvin (> 0).
    chemical_potential : float
        Chemical potential mu in meV.
    coupling_factor : float
        Dimensionless overall coupling strength Lambda.
    relative_bandwidth : float
        Dimensionless Lorentzian bandwidth b (> 0).
    mode_spacing : float
        Eigenfrequency spacing of the discrete spectrum, rad/ns.
    window_lo, window_hi : float
        Frequency window for mode discretization, rad/ns.
    dot_frequency_ref : float
        Dot frequency Omega used in the Lorentzian weight, rad/ns.
    """

    temperature: float
    chemical_potential: float
    coupling_factor: float
    relative_bandwidth: float
    mode_spacing: float
    window_lo: float
    window_hi: float
    dot_frequency_ref: float

    def __post_init__(self):
        if not self.temperature > 0:
            raise ReservoirError("temperature must be > 0 K")
        if not self.relative_bandwidth > 0:
            raise ReservoirError("relative_bandwidth must be > 0")
        if not self.mode_spacing > 0:
            raise ReservoirError("mode_spacing must be > 0")
        if not (self.window_lo < self.dot_frequency_ref < self.window_hi):
            raise ReservoirError(
                "window must bracket the dot reference frequency: "
                f"[{self.window_lo}, {self.window_hi}] vs {self.dot_frequency_ref}"
            )

    @property
    def mu_radns(self) -> float:
        return mev_to_radns(self.chemical_potential)


def default_window(
    dot_frequency: float,
    temperature: float,
    chemical_potential_radns: float,
    relative_bandwidth: float,
    mode_spacing: float,
) -> tuple[float, float]:
    """Default discretization window around the dot frequency.

    Half-width = max(50*b*Omega, |mu - Omega| + 20*k_B*T); the lower edge is
    floored just above zero so no mode sits at a non-positive frequency.
    """
    kt = thermal_energy_radns(temperature)
    half = max(
        50.0 * relative_bandwidth * dot_frequency,
        abs(chemical_potential_radns - dot_frequency) + 20.0 * kt,
    )
    lo = dot_frequency - half
    if lo <= 0.0:
        lo = mode_spacing / 2.0
    return lo, dot_frequency + half


def environment(
    temperature: float,
    chemical_potential_mev: float,
    coupling_factor: float,
    relative_bandwidth: float,
    dot_frequency: float,
    mode_spacing: float = 2.0 * math.pi,
    window: tuple[float, float] | None = None,
) -> EnvironmentSpec:
    """Build an EnvironmentSpec, applying the default window policy if needed."""
    mu = mev_to_radns(chemical_potential_mev)
    if window is None:
        window = default_window(
            dot_frequency, temperature, mu, relative_bandwidth, mode_spacing
        )
    return EnvironmentSpec(
        temperature=temperature,
        chemical_potential=chemical_potential_mev,
        coupling_factor=coupling_factor,
        relative_bandwidth=relative_bandwidth,
        mode_spacing=mode_spacing,
        window_lo=window[0],
        window_hi=window[1],
        dot_frequency_ref=dot_frequency,
    )


@dataclass(frozen=True)
class DiscreteSpectrum:
    """Discretized reservoir: mode frequencies, squared couplings, occupations."""

    mode_frequencies: np.ndarray  # rad/ns, strictly increasing
    coupling_sq: np.ndarray  # (rad/ns)^2, >= 0
    occupations: np.ndarray  # in [0, 1]

    def __post_init__(self):
        w = np.asarray(self.mode_frequencies, dtype=float)
        t2 = np.asarray(self.coupling_sq, dtype=float)
        n = np.asarray(self.occupations, dtype=float)
        if w.size == 0:
            raise ReservoirError("empty mode grid")
        if not (w.shape == t2.shape == n.shape):
            raise ReservoirError("spectrum arrays must share one shape")
        if np.any(np.diff(w) <= 0):
            raise ReservoirError("mode frequencies must be strictly increasing")
        if np.any(t2 < 0):
            raise ReservoirError("squared couplings must be non-negative")
        if np.any((n < 0) | (n > 1)):
            raise ReservoirError("occupations must lie in [0, 1]")
        object.__setattr__(self, "mode_frequencies", w)
        object.__setattr__(self, "coupling_sq", t2)
        object.__setattr__(self, "occupations", n)

    @property
    def n_modes(self) -> int:
        return self.mode_frequencies.size

    def truncate_strongest(self, n_keep: int) -> "DiscreteSpectrum":
        """Keep the n_keep modes with the largest squared coupling.

        Used to produce small matched baths for the exact-oracle comparisons;
        the selected modes keep their original frequencies and occupations.
        """
        if n_keep >= self.n_modes:
            return self
        idx = np.sort(np.argsort(self.coupling_sq)[-n_keep:])
        return DiscreteSpectrum(
            self.mode_frequencies[idx],
            self.coupling_sq[idx],
            self.occupations[idx],
        )


def fermi_occupation(omega: float | np.ndarray, env: EnvironmentSpec):
    """Fermi-Dirac occupation nbar = 1/(1 + exp(beta*(omega - mu))).

    `omega` is in rad/ns; mu and k_B*T are taken from `env`.
    """
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ReservoirError("mode frequency must be finite")
    beta = 1.0 / thermal_energy_radns(env.temperature)
    out = expit(-beta * (omega - env.mu_radns))
    return out if out.ndim else float(out)


def lorentzian_coupling_sq(
    omega: np.ndarray,
    dot_frequency: float,
    coupling_factor: float,
    relative_bandwidth: float,
    mode_spacing: float,
) -> np.ndarray:
    """Squared coupling t^2 = Lambda^2*Omega*dw * b^2 / ((w/Omega - 1)^2 + b^2)."""
    b = relative_bandwidth
    x = omega / dot_frequency - 1.0
    return (
        coupling_factor**2 * dot_frequency * mode_spacing * b**2 / (x**2 + b**2)
    )


def build_spectrum(env: EnvironmentSpec) -> DiscreteSpectrum:
    """Discretize one reservoir on its window with the Lorentzian weight."""
    n_modes = int(math.floor((env.window_hi - env.window_lo) / env.mode_spacing)) + 1
    if n_modes < 1:
        raise ReservoirError("window too narrow for the requested mode spacing")
    omega = env.window_lo + env.mode_spacing * np.arange(n_modes)
    t2 = lorentzian_coupling_sq(
        omega,
        env.dot_frequency_ref,
        env.coupling_factor,
        env.relative_bandwidth,
        env.mode_spacing,
    )
    nbar = fermi_occupation(omega, env)
    return DiscreteSpectrum(omega, t2, nbar)


def build_spectrum_two_dot(
    env: EnvironmentSpec, dot_frequencies: tuple[float, float]
) -> DiscreteSpectrum:
    """Two-dot variant of the Lorentzian weight.

    Both dots share one coupling profile: the average of the two Lorentzians
    centered on the two dot frequencies,

        t^2 = sum_e (Omega_e/2) * Lambda^2*dw*b^2 / ((w/Omega_e - 1)^2 + b^2),

    so the dot index never enters the couplings (rank-1 coupling structure).
    On resonance this reduces to the single-dot formula.
    """
    n_modes = int(math.floor((env.window_hi - env.window_lo) / env.mode_spacing)) + 1
    if n_modes < 1:
        raise ReservoirError("window too narrow for the requested mode spacing")
    omega = env.window_lo + env.mode_spacing * np.arange(n_modes)
    t2 = np.zeros_like(omega)
    for w0 in dot_frequencies:
        t2 += 0.5 * lorentzian_coupling_sq(
            omega,
            w0,
            env.coupling_factor,
            env.relative_bandwidth,
            env.mode_spacing,
        )
    nbar = fermi_occupation(omega, env)
    return DiscreteSpectrum(omega, t2, nbar)


def environment_pair(
    temperature: float,
    mu1_mev: float,
    mu2_mev: float,
    coupling_factor: float,
    relative_bandwidth: float,
    dot_frequency: float,
    mode_spacing: float = 2.0 * math.pi,
    window: tuple[float, float] | None = None,
) -> tuple[EnvironmentSpec, EnvironmentSpec]:
    """Source and drain sharing one mode window (hence one mode grid).

    A shared grid makes the two reservoirs' couplings identical mode by
    mode (t_1k = t_2k), which the symmetric-coupling identities rely on;
    the window is the union of the two per-reservoir defaults.
    """
    if window is None:
        los, his = [], []
        for mu in (mu1_mev, mu2_mev):
            lo, hi = default_window(
                dot_frequency,
                temperature,
                mev_to_radns(mu),
                relative_bandwidth,
                mode_spacing,
            )
            los.append(lo)
            his.append(hi)
        window = (min(los), max(his))
    make = lambda mu: environment(
        temperature,
        mu,
        coupling_factor,
        relative_bandwidth,
        dot_frequency,
        mode_spacing,
        window,
    )
    return make(mu1_mev), make(mu2_mev)


def kernel_memory_rate(env: EnvironmentSpec) -> float:
    """Slowest decay rate of the reservoir kernels, rad/ns.

    The Lorentzian weight decays at b*Omega and the thermally smoothed Fermi
    edge at pi*k_B*T; the kernel tail is governed by the slower of the two.
    """
    return min(
        env.relative_bandwidth * env.dot_frequency_ref,
        math.pi * thermal_energy_radns(env.temperature),
    )


def golden_rule_rate(env: EnvironmentSpec) -> float:
    """Peak weak-coupling tunneling rate 2*pi*Lambda^2*Omega, rad/ns."""
    return 2.0 * math.pi * env.coupling_factor**2 * env.dot_frequency_ref


def _phase_sums(
    omega: np.ndarray,
    weights: np.ndarray,
    lag_step: float,
    n_lags: int,
) -> np.ndarray:
    """Direct mode sums sum_k W[r,k] exp(-i*w_k*tau_m) for every weight row.

    The lag phase factors as exp(-i*w*(q*B + r)*h) = a(w,q) * b(w,r), so one
    base table b per mode chunk (built by a unit-phase recursion) serves
    every lag block through a single matrix product against the a-scaled
    weights.  Work is O(modes * lags) with a BLAS-dominated constant.
    """
    omega = np.asarray(omega, dtype=float)
    weights = np.atleast_2d(np.asarray(weights, dtype=complex))
    n_rows = weights.shape[0]
    out = np.zeros((n_rows, n_lags), dtype=complex)
    block = min(2048, n_lags)
    mode_chunk = 8192
    for k0 in range(0, omega.size, mode_chunk):
        w = omega[k0 : k0 + mode_chunk]
        wt = weights[:, k0 : k0 + mode_chunk]
        m = w.size
        base = np.empty((block, m), dtype=complex)  # b[r, k] = exp(-i w_k r h)
        base[0] = 1.0
        unit = np.exp(-1j * w * lag_step)
        for r in range(1, block):
            np.multiply(base[r - 1], unit, out=base[r])
        for m0 in range(0, n_lags, block):
            m1 = min(m0 + block, n_lags)
            aq = np.exp(-1j * w * (m0 * lag_step))
            scaled = wt * aq  # (n_rows, m)
            out[:, m0:m1] += (base[: m1 - m0] @ scaled.T).T
    return out


@dataclass(frozen=True)
class KernelTable:
    """Tabulated K_b(tau), K_c(tau) for one reservoir on a uniform lag grid.

    Values are stored for tau = m*lag_step, m = 0..n_lags-1; negative lags
    are obtained from K(-tau) = conj(K(tau)).
    """

    lag_step: float
    kb: np.ndarray
    kc: np.ndarray

    @property
    def n_lags(self) -> int:
        return self.kb.size

    def vacuum(self) -> np.ndarray:
        """The T- and mu-independent combination K_b(tau) + conj(K_c(tau))."""
        return self.kb + np.conj(self.kc)

    def at(self, kind: str, m: int) -> complex:
        """Kernel value at signed lag index m (negative via Hermitian symmetry)."""
        arr = self.kb if kind == "b" else self.kc
        return arr[m] if m >= 0 else np.conj(arr[-m])


def thermal_kernels(
    spec: DiscreteSpectrum, lag_step: float, n_lags: int
) -> KernelTable:
    """Tabulate K_b and K_c for one reservoir by direct mode summation."""
    if n_lags < 1:
        raise ReservoirError("lag grid must contain at least one point")
    wb = (1.0 - spec.occupations) * spec.coupling_sq
    wc = spec.occupations * spec.coupling_sq
    sums = _phase_sums(
        spec.mode_frequencies, np.vstack([wb, wc]), lag_step, n_lags
    )
    # K_c carries exp(+i w tau) = conj of the evaluated phase.
    return KernelTable(lag_step=lag_step, kb=sums[0], kc=np.conj(sums[1]))


@lru_cache(maxsize=6)
def cached_thermal_pair(
    env1: EnvironmentSpec, env2: EnvironmentSpec, lag_step: float, n_lags: int
) -> tuple[KernelTable, KernelTable]:
    """Kernel tables for a reservoir pair, memoized on the physical inputs.

    Sweeps revisit the same reservoirs with many Coulomb energies; pinning
    the grid step in the sweep config makes every point share one table.
    """
    return thermal_kernels_pair(
        build_spectrum(env1), build_spectrum(env2), lag_step, n_lags
    )


@lru_cache(maxsize=6)
def cached_cross_pair(
    env1: EnvironmentSpec,
    env2: EnvironmentSpec,
    dot_frequencies: tuple[float, float],
    lag_step: float,
    n_lags: int,
):
    """Cross-kernel tables for the two-dot model, memoized like the above."""
    s1 = build_spectrum_two_dot(env1, dot_frequencies)
    s2 = build_spectrum_two_dot(env2, dot_frequencies)
    return (
        cross_kernels(s1, s1, lag_step, n_lags),
        cross_kernels(s2, s2, lag_step, n_lags),
    )


def thermal_kernels_batch(
    specs: list[DiscreteSpectrum], lag_step: float, n_lags: int
) -> list[KernelTable]:
    """Kernel tables for several reservoirs sharing one mode grid.

    A single phase-table pass serves every reservoir; spectra on different
    grids fall back to individual builds.
    """
    ref = specs[0].mode_frequencies
    if not all(np.array_equal(s.mode_frequencies, ref) for s in specs[1:]):
        return [thermal_kernels(s, lag_step, n_lags) for s in specs]
    rows = []
    for s in specs:
        rows.append((1.0 - s.occupations) * s.coupling_sq)
        rows.append(s.occupations * s.coupling_sq)
    sums = _phase_sums(ref, np.vstack(rows), lag_step, n_lags)
    return [
        KernelTable(
            lag_step=lag_step, kb=sums[2 * i], kc=np.conj(sums[2 * i + 1])
        )
        for i in range(len(specs))
    ]


def thermal_kernels_pair(
    spec1: DiscreteSpectrum,
    spec2: DiscreteSpectrum,
    lag_step: float,
    n_lags: int,
) -> tuple[KernelTable, KernelTable]:
    """Kernel tables for two reservoirs, sharing phase work on a common grid."""
    out = thermal_kernels_batch([spec1, spec2], lag_step, n_lags)
    return out[0], out[1]


@dataclass(frozen=True)
class CrossKernelTable:
    """Cross-correlation tables C[e][e'] for one reservoir and two dots.

    entries[kind][e, e'] is the lag series of C_{e e',kind_j}(tau); `kind` is
    "b" or "c" with the same sign conventions as KernelTable.
    """

    lag_step: float
    b: np.ndarray  # shape (2, 2, n_lags)
    c: np.ndarray

    def entry(self, kind: str, e: int, ep: int) -> np.ndarray:
        arr = self.b if kind == "b" else self.c
        return arr[e, ep]


def cross_kernels(
    spec1: DiscreteSpectrum,
    spec2: DiscreteSpectrum,
    lag_step: float,
    n_lags: int,
) -> CrossKernelTable:
    """Cross-correlations of the noises seen by two dots in one reservoir.

    C_{e e',b}(tau) = sum_k (1-nbar_k) t_{e,k} t_{e',k} exp(-i w_k tau) and
    the c entry with occupation weight and opposite phase sign.  Both dots
    must share the reservoir's mode grid and occupations.
    """
    if spec1.n_modes != spec2.n_modes or not np.array_equal(
        spec1.mode_frequencies, spec2.mode_frequencies
    ):
        raise ReservoirError("cross kernels need a shared mode grid")
    if not np.array_equal(spec1.occupations, spec2.occupations):
        raise ReservoirError("cross kernels need shared reservoir occupations")
    t = [np.sqrt(spec1.coupling_sq), np.sqrt(spec2.coupling_sq)]
    nbar = spec1.occupations
    rows = []
    for e in range(2):
        for ep in range(2):
            rows.append((1.0 - nbar) * t[e] * t[ep])
    for e in range(2):
        for ep in range(2):
            rows.append(nbar * t[e] * t[ep])
    sums = _phase_sums(spec1.mode_frequencies, np.vstack(rows), lag_step, n_lags)
    b = sums[:4].reshape(2, 2, n_lags)
    c = np.conj(sums[4:].reshape(2, 2, n_lags))
    return CrossKernelTable(lag_step=lag_step, b=b, c=c)
