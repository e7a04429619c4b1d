"""Correlated-noise two-dot model: coefficients, MEs, groups, steady states.

Two spinless dots in parallel between the reservoirs, every reservoir mode
coupled to both dots, with inter-dot repulsion Omega_c.  The coefficient
closure is a pair of 4x4 linear two-time systems (electron and hole
branches) driven by the scalars

    A = i*W1 + sum_{l,j} F_11lj - sum_j G_22cj
    B = i*W2 + sum_{l,j} F_22lj - sum_j G_11cj
    C = sum_j (F_12bj + F_21cj + G_21cj)
    D = sum_j (F_21bj + F_12cj + G_12cj)
    E = i*Wc + sum_{e,l,j} G_eelj

with F_ee'lj(t) = sum_e'' int_0^t C_ee'',lj(t-s) f_e''e'l(t,s) ds and G
likewise from the g components.  On resonance (W1 = W2 with the shared
rank-1 coupling spectrum) all e,e' components coincide and the density
6-vector (rho00, rho11, rho22, rho33, Re rho12, Im rho12) evolves under
the real M-matrix, which splits into two conserved 2-dim subsystems whose
steady states are closed-form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import envkit
from .envkit import CrossKernelTable, DiscreteSpectrum, EnvironmentSpec
from .fermions import annihilators_dense
from .meops import assemble, hamiltonian_part, pair_a_q_rho, pair_q_rho_comm
from .spindeg import coefficient_convergence, convergence_stop
from .volterra import run_two_time
from .steady import CurrentSeries
from .units import NA_PER_INVERSE_NS
from .volterra import AccumulatedIntegral, TimeGrid, TwoTimeSystem

# Register indices of the 4 dot states (dot 1 = first mode):
# |0>, |dot2>, |dot1>, |both>.
IDX_EMPTY, IDX_DOT2, IDX_DOT1, IDX_BOTH = 0, 1, 2, 3

RESONANCE_RTOL = 1e-9

# The eight reference initial states, columns of (rho00, rho11, rho22,
# rho33, rho12_R, rho12_I).
INITIAL_BASIS = np.array(
    [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.5, 0.5, 0.0, 0.5, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.5, 0.5, 0.0, 0.0, 0.5],
        [0.0, 0.5, 0.5, 0.0, 0.0, -0.5],
        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.5, 0.5, 0.0, -0.5, 0.0],
    ]
).T  # shape (6, 8); column i-1 is initial state i

GROUP_OF_BASIS = {1: "I", 2: "I", 3: "II", 4: "II", 5: "II", 6: "II", 7: "III", 8: "III"}

COEFF_KEYS = tuple(
    f"{kind}{e}{ep}{lam}{j}"
    for kind in ("F", "G")
    for e in (1, 2)
    for ep in (1, 2)
    for lam in ("b", "c")
    for j in (1, 2)
)


class ResonanceError(ValueError):
    """Operation requires the resonance-reduced symmetric regime."""


class DegenerateSteadyState(RuntimeError):
    """Closed-form steady state hit a vanishing denominator."""


@dataclass(frozen=True)
class TwoDotModel:
    dot_frequencies: tuple[float, float]  # rad/ns
    coulomb_energy: float  # rad/ns
    env1: EnvironmentSpec
    env2: EnvironmentSpec
    grid: TimeGrid
    spectrum1: DiscreteSpectrum | None = None
    spectrum2: DiscreteSpectrum | None = None

    def __post_init__(self):
        if not all(w > 0 for w in self.dot_frequencies):
            raise ValueError("dot frequencies must be positive")
        if self.coulomb_energy < 0:
            raise ValueError("coulomb energy must be >= 0")

    def spectra(self) -> tuple[DiscreteSpectrum, DiscreteSpectrum]:
        s1 = self.spectrum1 or envkit.build_spectrum_two_dot(
            self.env1, self.dot_frequencies
        )
        s2 = self.spectrum2 or envkit.build_spectrum_two_dot(
            self.env2, self.dot_frequencies
        )
        return s1, s2

    def cross_kernel_tables(self) -> tuple[CrossKernelTable, CrossKernelTable]:
        n_lags = self.grid.count + 1
        if self.spectrum1 is None and self.spectrum2 is None:
            return envkit.cached_cross_pair(
                self.env1, self.env2, self.dot_frequencies, self.grid.step, n_lags
            )
        s1, s2 = self.spectra()
        return (
            envkit.cross_kernels(s1, s1, self.grid.step, n_lags),
            envkit.cross_kernels(s2, s2, self.grid.step, n_lags),
        )

    def is_resonant(self, tables: tuple[CrossKernelTable, CrossKernelTable] | None = None) -> bool:
        w1, w2 = self.dot_frequencies
        if abs(w1 - w2) > RESONANCE_RTOL * abs(w1):
            return False
        if tables is None:
            return True
        for table in tables:
            for kind in ("b", "c"):
                arr = table.b if kind == "b" else table.c
                scale = np.abs(arr).max()
                if scale == 0:
                    continue
                for e in range(2):
                    for ep in range(2):
                        if np.abs(arr[e, ep] - arr[0, 0]).max() > RESONANCE_RTOL * scale:
                            return False
        return True


@dataclass
class TwoDotCoefficients:
    """F/G series keyed as F{e}{e'}{lam}{j}; plus the A..E drive scalars."""

    grid: TimeGrid
    series: dict[str, np.ndarray]
    n_steps: int
    converged: bool
    convergence_change: float
    resonant: bool

    @property
    def times(self) -> np.ndarray:
        return self.grid.step * np.arange(self.n_steps + 1)

    def frozen_values(self) -> dict[str, complex]:
        return {k: complex(v[-1]) for k, v in self.series.items()}

    def collapsed(self, kind: str, lam: str, j: int, idx=-1):
        """Resonance-collapsed value (the e,e'=1,1 component)."""
        return self.series[f"{kind}11{lam}{j}"][idx]

    def resonance_residual(self) -> float:
        """Max deviation between e,e' components, in global-scale units."""
        scale = max(np.abs(v).max() for v in self.series.values())
        if scale == 0:
            return 0.0
        worst = 0.0
        for kind in ("F", "G"):
            for lam in ("b", "c"):
                for j in (1, 2):
                    ref = self.series[f"{kind}11{lam}{j}"]
                    for e in (1, 2):
                        for ep in (1, 2):
                            dev = np.abs(
                                self.series[f"{kind}{e}{ep}{lam}{j}"] - ref
                            ).max()
                            worst = max(worst, dev)
        return float(worst / scale)


def _drive_scalars(vals: dict[str, complex], model: TwoDotModel):
    w1, w2 = model.dot_frequencies
    a = (
        1j * w1
        + sum(vals[f"F11{lam}{j}"] for lam in "bc" for j in (1, 2))
        - sum(vals[f"G22c{j}"] for j in (1, 2))
    )
    b = (
        1j * w2
        + sum(vals[f"F22{lam}{j}"] for lam in "bc" for j in (1, 2))
        - sum(vals[f"G11c{j}"] for j in (1, 2))
    )
    c = sum(vals[f"F12b{j}"] + vals[f"F21c{j}"] + vals[f"G21c{j}"] for j in (1, 2))
    d = sum(vals[f"F21b{j}"] + vals[f"F12c{j}"] + vals[f"G12c{j}"] for j in (1, 2))
    e = 1j * model.coulomb_energy + sum(
        vals[f"G{ep}{ep}{lam}{j}"] for ep in (1, 2) for lam in "bc" for j in (1, 2)
    )
    return a, b, c, d, e


def solve_twodot_coefficients(
    model: TwoDotModel,
    kernel_tables: tuple[CrossKernelTable, CrossKernelTable] | None = None,
    *,
    stop_tol: float = 1e-5,
    allow_early_stop: bool = True,
    engine: str = "auto",
) -> TwoDotCoefficients:
    """Propagate the two 4x4 coefficient systems and accumulate all F, G."""
    tables = kernel_tables if kernel_tables is not None else model.cross_kernel_tables()
    kernels = {}
    for j, table in ((1, tables[0]), (2, tables[1])):
        for lam in ("b", "c"):
            arr = table.b if lam == "b" else table.c
            for e in (1, 2):
                for epp in (1, 2):
                    kernels[f"{lam}{j}e{e}{epp}"] = arr[e - 1, epp - 1]

    # Column layout: [f_.1b, f_.2b, g_.1b, g_.2b, f_.1c, f_.2c, g_.1c, g_.2c],
    # two seed families (boundary delta on dot 1 or dot 2).
    boundary = np.zeros((8, 2), dtype=complex)
    boundary[0, 0] = 1.0
    boundary[1, 1] = 1.0
    boundary[4, 0] = -1.0
    boundary[5, 1] = -1.0

    row = {("f", "b", 1): 0, ("f", "b", 2): 1, ("g", "b", 1): 2, ("g", "b", 2): 3,
           ("f", "c", 1): 4, ("f", "c", 2): 5, ("g", "c", 1): 6, ("g", "c", 2): 7}
    seeds = {1: (1.0, 0.0), 2: (0.0, 1.0)}
    integrals = []
    for kind, comp in (("F", "f"), ("G", "g")):
        for e in (1, 2):
            for ep in (1, 2):
                for lam in ("b", "c"):
                    for j in (1, 2):
                        terms = tuple(
                            (f"{lam}{j}e{e}{epp}", row[(comp, lam, ep)], seeds[epp])
                            for epp in (1, 2)
                        )
                        integrals.append(
                            AccumulatedIntegral(f"{kind}{e}{ep}{lam}{j}", terms)
                        )

    def matrix(vals, t):
        a, b, c, d, e = _drive_scalars(vals, model)
        mb = np.array(
            [[a, d, 0, 0], [c, b, 0, 0], [e, 0, a + e, d], [0, e, c, b + e]],
            dtype=complex,
        )
        mc = -np.array(
            [[a, c, 0, 0], [d, b, 0, 0], [e, 0, a + e, c], [0, e, d, b + e]],
            dtype=complex,
        )
        out = np.zeros((8, 8), dtype=complex)
        out[:4, :4] = mb
        out[4:, 4:] = mc
        return out

    system = TwoTimeSystem(
        dim=8, boundary=boundary, integrals=tuple(integrals), matrix=matrix
    )
    mem_rate = min(
        envkit.kernel_memory_rate(model.env1), envkit.kernel_memory_rate(model.env2)
    )
    window_pts = max(16, int(round(1.0 / (mem_rate * model.grid.step))))
    stop = (
        convergence_stop(COEFF_KEYS, window_pts, stop_tol) if allow_early_stop else None
    )
    result = run_two_time(system, kernels, model.grid, engine=engine, stop_when=stop)
    change = coefficient_convergence(
        result.integrals, min(window_pts, result.n_steps // 2)
    )
    return TwoDotCoefficients(
        grid=model.grid,
        series=result.integrals,
        n_steps=result.n_steps,
        converged=change < stop_tol,
        convergence_change=change,
        resonant=model.is_resonant(tables),
    )


def _operators():
    d1, d2 = annihilators_dense(2)
    n1 = d1.conj().T @ d1
    n2 = d2.conj().T @ d2
    return d1, d2, n1, n2


def hamiltonian_super(model: TwoDotModel) -> np.ndarray:
    d1, d2, n1, n2 = _operators()
    w1, w2 = model.dot_frequencies
    h = w1 * n1 + w2 * n2 + model.coulomb_energy * (n1 @ n2)
    return hamiltonian_part(h)


def generator_pairs(env_index: int | None = None):
    """Superoperator pairs for every F/G coefficient of the full ME.

    env_index restricts to one reservoir's terms (continuity-split pieces).
    """
    d1, d2, n1, n2 = _operators()
    dots = {1: d1, 2: d2}
    nn = n1 @ n2
    pairs = {}
    js = (1, 2) if env_index is None else (env_index,)
    for e in (1, 2):
        for ep in (1, 2):
            for j in js:
                pairs[f"F{e}{ep}b{j}"] = pair_q_rho_comm(dots[ep], dots[e].conj().T)
                pairs[f"G{e}{ep}b{j}"] = pair_q_rho_comm(
                    dots[ep] @ nn, dots[e].conj().T
                )
                pairs[f"F{e}{ep}c{j}"] = pair_a_q_rho(dots[e], dots[ep].conj().T)
                pairs[f"G{e}{ep}c{j}"] = pair_a_q_rho(dots[e], nn @ dots[ep].conj().T)
    return pairs


def propagate_rho_twodot_full(
    coeffs: TwoDotCoefficients, rho0: np.ndarray, model: TwoDotModel
) -> np.ndarray:
    """Propagate the 4x4 two-dot density under the full zeroth-order ME."""
    pairs = generator_pairs()
    base = hamiltonian_super(model)
    h = coeffs.grid.step
    n_steps = coeffs.n_steps
    out = np.empty((n_steps + 1, 4, 4), dtype=complex)
    out[0] = rho0
    vec = np.asarray(rho0, dtype=complex).reshape(-1)
    series = coeffs.series

    def gen_at(idx):
        return assemble(base, pairs, {k: series[k][idx] for k in pairs})

    g0 = gen_at(0)
    for n in range(n_steps):
        g1 = gen_at(n + 1)
        gh = 0.5 * (g0 + g1)
        k1 = g0 @ vec
        k2 = gh @ (vec + 0.5 * h * k1)
        k3 = gh @ (vec + 0.5 * h * k2)
        k4 = g1 @ (vec + h * k3)
        vec = vec + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[n + 1] = vec.reshape(4, 4)
        tr = np.real(vec[0] + vec[5] + vec[10] + vec[15])
        if abs(tr - 1.0) > 1e-8:
            raise RuntimeError(f"trace drift {abs(tr - 1.0):.2e} at step {n + 1}")
        g0 = g1
    return out


def rho_matrix_to_vector6(rho: np.ndarray) -> np.ndarray:
    """(rho00, rho11, rho22, rho33, Re rho12, Im rho12) from 4x4 densities."""
    rho = np.asarray(rho)
    r12 = rho[..., IDX_DOT1, IDX_DOT2]
    return np.stack(
        [
            rho[..., IDX_EMPTY, IDX_EMPTY].real,
            rho[..., IDX_DOT1, IDX_DOT1].real,
            rho[..., IDX_DOT2, IDX_DOT2].real,
            rho[..., IDX_BOTH, IDX_BOTH].real,
            r12.real,
            r12.imag,
        ],
        axis=-1,
    )


def vector6_to_rho_matrix(v: np.ndarray) -> np.ndarray:
    """Embed the 6-vector back into a 4x4 density matrix."""
    rho = np.zeros(v.shape[:-1] + (4, 4), dtype=complex)
    rho[..., IDX_EMPTY, IDX_EMPTY] = v[..., 0]
    rho[..., IDX_DOT1, IDX_DOT1] = v[..., 1]
    rho[..., IDX_DOT2, IDX_DOT2] = v[..., 2]
    rho[..., IDX_BOTH, IDX_BOTH] = v[..., 3]
    rho[..., IDX_DOT1, IDX_DOT2] = v[..., 4] + 1j * v[..., 5]
    rho[..., IDX_DOT2, IDX_DOT1] = v[..., 4] - 1j * v[..., 5]
    return rho


@dataclass
class MMatrixScalars:
    """Real scalars of the resonance-reduced 6x6 generator."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float


def m_matrix_scalars(coeffs: TwoDotCoefficients, idx=-1) -> MMatrixScalars:
    fb1 = coeffs.collapsed("F", "b", 1, idx)
    fb2 = coeffs.collapsed("F", "b", 2, idx)
    fc1 = coeffs.collapsed("F", "c", 1, idx)
    fc2 = coeffs.collapsed("F", "c", 2, idx)
    gb1 = coeffs.collapsed("G", "b", 1, idx)
    gb2 = coeffs.collapsed("G", "b", 2, idx)
    gc1 = coeffs.collapsed("G", "c", 1, idx)
    gc2 = coeffs.collapsed("G", "c", 2, idx)
    return MMatrixScalars(
        a=2.0 * (fc1.real + fc2.real),
        b=2.0 * (fb1.real + fb2.real),
        c=2.0 * (fc1.real + gc1.real + fc2.real + gc2.real),
        d=2.0 * (fc1.imag + gc1.imag + fc2.imag + gc2.imag),
        e=2.0 * (fb1.imag + fb2.imag),
        f=2.0 * (fb1.real + gb1.real + fb2.real + gb2.real),
    )


def build_m_matrix(
    coeffs: TwoDotCoefficients, idx=-1, *, check_resonance: bool = True
) -> np.ndarray:
    """The 6x6 generator of the reduced density-vector dynamics."""
    if check_resonance and not coeffs.resonant:
        raise ResonanceError(
            "M-matrix reduction requires resonance and a symmetric spectrum"
        )
    s = m_matrix_scalars(coeffs, idx)
    a, b, c, d, e, f = s.a, s.b, s.c, s.d, s.e, s.f
    return np.array(
        [
            [2 * a, b, b, 0, 2 * b, 0],
            [-a, c - b, 0, f, -c - b, -d - e],
            [-a, 0, c - b, f, -c - b, d + e],
            [0, -c, -c, -2 * f, 2 * c, 0],
            [-a, -(c + b) / 2, -(c + b) / 2, -f, c - b, 0],
            [0, (d + e) / 2, -(d + e) / 2, 0, 0, c - b],
        ]
    )


def propagate_rho_M(coeffs: TwoDotCoefficients, rho0_vec: np.ndarray) -> np.ndarray:
    """Propagate the 6-vector under the time-dependent M-matrix."""
    if not coeffs.resonant:
        raise ResonanceError("M-matrix propagation requires resonance")
    h = coeffs.grid.step
    n_steps = coeffs.n_steps
    out = np.empty((n_steps + 1, 6))
    out[0] = rho0_vec
    v = np.asarray(rho0_vec, dtype=float).copy()
    m0 = build_m_matrix(coeffs, 0, check_resonance=False)
    for n in range(n_steps):
        m1 = build_m_matrix(coeffs, n + 1, check_resonance=False)
        mh = 0.5 * (m0 + m1)
        k1 = m0 @ v
        k2 = mh @ (v + 0.5 * h * k1)
        k3 = mh @ (v + 0.5 * h * k2)
        k4 = m1 @ (v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[n + 1] = v
        m0 = m1
    return out


def currents_twodot(
    coeffs: TwoDotCoefficients,
    rho_vecs: np.ndarray,
    *,
    reduced: bool = False,
    idx: slice | None = None,
) -> CurrentSeries:
    """Directed currents from the 6-vector trajectory.

    reduced=True uses the resonance-simplified expressions (requires the
    symmetric regime); otherwise the full forms with all e,e' components.
    """
    n_pts = rho_vecs.shape[0]
    s = {k: v[:n_pts] for k, v in coeffs.series.items()}
    r00, r11, r22, r33 = (rho_vecs[:, i] for i in range(4))
    r12 = rho_vecs[:, 4] + 1j * rho_vecs[:, 5]

    if reduced:
        if not coeffs.resonant:
            raise ResonanceError("reduced currents require resonance")
        out = {}
        for j, sign in ((1, -1.0), (2, +1.0)):
            fb = s[f"F11b{j}"].real
            fc = s[f"F11c{j}"].real
            gb = s[f"G11b{j}"].real
            gc = s[f"G11c{j}"].real
            val = (
                fc * r00
                + (fb + fc + gc) * 0.5 * (r11 + r22)
                + (fb + gb) * r33
                + (fb - fc - gc) * rho_vecs[:, 4]
            )
            out[j] = sign * 4.0 * NA_PER_INVERSE_NS * val
        i_1d, i_d2 = out[1], out[2]
    else:
        out = {}
        for j, sign in ((1, -1.0), (2, +1.0)):
            val = (s[f"F11c{j}"].real + s[f"F22c{j}"].real) * r00
            val = val + (
                s[f"F11b{j}"].real + s[f"F22c{j}"].real + s[f"G22c{j}"].real
            ) * r11
            val = val + (
                s[f"F11c{j}"].real + s[f"F22b{j}"].real + s[f"G11c{j}"].real
            ) * r22
            val = val + (
                s[f"F11b{j}"].real
                + s[f"F22b{j}"].real
                + s[f"G11b{j}"].real
                + s[f"G22b{j}"].real
            ) * r33
            coh = (
                s[f"F21b{j}"]
                + np.conj(s[f"F12b{j}"])
                - s[f"F12c{j}"]
                - np.conj(s[f"F21c{j}"])
                - s[f"G12c{j}"]
                - np.conj(s[f"G21c{j}"])
            )
            val = val + np.real(coh * r12)
            out[j] = sign * 2.0 * NA_PER_INVERSE_NS * val
        i_1d, i_d2 = out[1], out[2]
    return CurrentSeries(
        times=coeffs.grid.step * np.arange(n_pts), i_1d=i_1d, i_d2=i_d2
    )


def classify_initial_state(v: np.ndarray, tol: float = 1e-9) -> str:
    """Group label of a density 6-vector: I, II, III, or mixed."""
    v = np.asarray(v, dtype=float)
    trace = v[0] + v[1] + v[2] + v[3]
    if abs(trace - 1.0) > 1e-6:
        raise ValueError(f"not a unit-trace density vector (trace {trace})")
    coh_bound = v[1] * v[2] + 1e-8
    if v[4] ** 2 + v[5] ** 2 > coh_bound:
        raise ValueError("coherence exceeds the population bound")
    rho_plus = 0.5 * (v[1] + v[2])
    if abs(v[3]) < tol and abs(rho_plus - v[4]) < tol:
        return "I"
    if abs(v[0]) < tol and abs(rho_plus + v[4]) < tol:
        return "III"
    if abs(v[0]) < tol and abs(v[3]) < tol and abs(v[4]) < tol:
        return "II"
    return "mixed"


def steady_state_closed_form(
    scalars: MMatrixScalars, group: str
) -> np.ndarray:
    """Closed-form steady 6-vector for a group's conserved-subspace sector.

    Group I:   rho00 = B/(B-A),  rho+ = rho12_R = A/(2(A-B)), rho33 = 0.
    Group III: rho+ = -rho12_R = F/(2(F-C)), rho33 = C/(C-F), rho00 = 0.
    Group II:  equal mixture of the two sectors.
    """
    a, b, c, f = scalars.a, scalars.b, scalars.c, scalars.f

    def sector_i():
        if abs(a - b) < 1e-30:
            raise DegenerateSteadyState("A = B: Group I sector degenerate")
        rho00 = b / (b - a)
        rho_plus = a / (2.0 * (a - b))
        return np.array([rho00, rho_plus, rho_plus, 0.0, rho_plus, 0.0])

    def sector_iii():
        if abs(f - c) < 1e-30:
            raise DegenerateSteadyState("F = C: Group III sector degenerate")
        rho_plus = f / (2.0 * (f - c))
        rho33 = c / (c - f)
        return np.array([0.0, rho_plus, rho_plus, rho33, -rho_plus, 0.0])

    if group == "I":
        return sector_i()
    if group == "III":
        return sector_iii()
    if group == "II":
        return 0.5 * (sector_i() + sector_iii())
    raise ValueError(f"unknown group {group!r}")


def steady_state_from_initial(
    scalars: MMatrixScalars, v0: np.ndarray
) -> np.ndarray:
    """Steady 6-vector for an arbitrary resonant initial state.

    Uses the two conserved combinations w1 = rho00 + rho+ + rho12_R and
    w2 = (rho+ - rho12_R) + rho33, each relaxing onto its sector's ray.
    """
    v0 = np.asarray(v0, dtype=float)
    rho_plus0 = 0.5 * (v0[1] + v0[2])
    w1 = v0[0] + rho_plus0 + v0[4]
    w2 = (rho_plus0 - v0[4]) + v0[3]
    out = np.zeros(6)
    a, b, c, f = scalars.a, scalars.b, scalars.c, scalars.f
    if abs(a - b) < 1e-30 or abs(f - c) < 1e-30:
        raise DegenerateSteadyState("degenerate sector denominators")
    # Sector (rho00, rho+ + rho12_R) -> w1 * (B, -A)/(B - A).
    rho00 = w1 * b / (b - a)
    s1 = w1 * (-a) / (b - a)  # rho+ + rho12_R
    # Sector (rho+ - rho12_R, rho33) -> w2 * (F, -C)/(F - C).
    s2 = w2 * f / (f - c)  # rho+ - rho12_R
    rho33 = w2 * (-c) / (f - c)
    rho_plus = 0.5 * (s1 + s2)
    rho12r = 0.5 * (s1 - s2)
    return np.array([rho00, rho_plus, rho_plus, rho33, rho12r, 0.0])
