"""Exact finite-environment reference dynamics (desk-scale validator).

The purified total Hamiltonian couples the dot modes to explicit electron
(b) and hole (c) branches of every discretized reservoir mode,

    H = H_dots + sum_k w_k (b_k^dag b_k - c_k^dag c_k)
        + sum_k (t_b d^dag b_k + t_c d^dag c_k^dag + h.c.),

with the reservoirs' thermal states encoded as the purified vacuum.  The
full state vector is propagated exactly and the dots' reduced density
matrix is extracted by partial trace, giving an independent cross-check of
the master-equation solvers on matched few-mode baths.

Mode ordering on the register: dot modes first, then for each reservoir its
b modes followed by its c modes (reservoir 1 before reservoir 2; in the
spin-degenerate model each branch carries the two spin species back to
back).  Pair creation d^dag c^dag breaks particle-number conservation, so
only parity survives; no number-block reduction is attempted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.linalg import expm_multiply

from .envkit import DiscreteSpectrum
from .fermions import annihilators_sparse

MAX_MODES = 18
_DENSE_DIM = 2048

# Register indices of the four two-mode dot states under the fixed ordering
# (first dot mode = most significant bit).  For the spin model the first
# mode is spin-down; for the two-dot model it is dot 1.
TWO_MODE_BASIS = {"empty": 0, "first": 2, "second": 1, "double": 3}


class OracleSizeError(ValueError):
    """Requested register exceeds the exact-propagation budget."""


@dataclass(frozen=True)
class BathBranch:
    """One purified coupling branch: frequency, coupling, kind b or c."""

    omega: float
    coupling: np.ndarray  # per dot mode
    kind: str


@dataclass
class OracleConfig:
    """Matched finite-environment configuration.

    `spectra` holds one truncated DiscreteSpectrum per reservoir (the same
    modes the master-equation kernels are built from).  `dot_frequencies`
    and `coulomb` fix the dot register; `kind` selects the model layout:
    "singledot" (1 dot mode), "twodot" (2 dot modes sharing each reservoir
    mode), "spindeg" (2 spin modes with per-spin reservoir copies).
    """

    kind: str
    dot_frequencies: tuple[float, ...]
    coulomb: float
    spectra: tuple[DiscreteSpectrum, ...]
    prune_threshold: float = 1e-24

    def __post_init__(self):
        if self.kind not in ("singledot", "spindeg", "twodot"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")


def _branches(config: OracleConfig) -> list[BathBranch]:
    """Flatten the reservoirs into coupled b/c branches, pruning dead ones."""
    n_dots = len(config.dot_frequencies)
    out: list[BathBranch] = []
    scale = max(s.coupling_sq.max() for s in config.spectra)
    for spec in config.spectra:
        t = np.sqrt(spec.coupling_sq)
        tb2 = (1.0 - spec.occupations) * spec.coupling_sq
        tc2 = spec.occupations * spec.coupling_sq
        for branch, w2, phase in (("b", tb2, 1.0), ("c", tc2, 1.0)):
            for k in range(spec.n_modes):
                if w2[k] <= config.prune_threshold * scale:
                    continue
                if config.kind == "twodot":
                    coupling = np.full(n_dots, np.sqrt(w2[k]))
                else:
                    coupling = np.array([np.sqrt(w2[k])])
                out.append(
                    BathBranch(spec.mode_frequencies[k], coupling, branch)
                )
    return out


@dataclass
class OracleOperators:
    """Assembled Hamiltonian and the operator handles tests need."""

    hamiltonian: sp.csr_matrix
    n_modes: int
    n_dot_modes: int
    dot_ops: list[sp.csr_matrix]
    env1_b_number: sp.csr_matrix  # number operator of reservoir 1's b modes


def build_total_hamiltonian(config: OracleConfig) -> OracleOperators:
    """Sparse purified Hamiltonian under the fixed mode ordering."""
    branches = _branches(config)
    if config.kind == "spindeg":
        n_dots = 2
        per_spin = branches
        n_modes = n_dots + 2 * len(per_spin)
    else:
        n_dots = len(config.dot_frequencies)
        n_modes = n_dots + len(branches)
    if n_modes > MAX_MODES:
        raise OracleSizeError(
            f"register needs {n_modes} modes (dim {2**n_modes}); "
            f"the exact oracle is capped at {MAX_MODES}"
        )
    ops = annihilators_sparse(n_modes)
    dim = 2**n_modes
    h = sp.csr_matrix((dim, dim), dtype=complex)

    def num(i):
        return (ops[i].getH() @ ops[i]).tocsr()

    # Dot part.
    if config.kind == "spindeg":
        omega = config.dot_frequencies[0]
        h = h + omega * (num(0) + num(1))
        h = h + config.coulomb * (num(0) @ num(1))
    else:
        for i, w in enumerate(config.dot_frequencies):
            h = h + w * num(i)
        if n_dots == 2:
            h = h + config.coulomb * (num(0) @ num(1))

    env1_b_number = sp.csr_matrix((dim, dim), dtype=complex)

    def add_branch(mode_index, br: BathBranch, dot_indices, env1: bool):
        nonlocal h, env1_b_number
        a = ops[mode_index]
        adag = a.getH()
        sign = 1.0 if br.kind == "b" else -1.0
        h = h + sign * br.omega * (adag @ a)
        for dot, t in zip(dot_indices, br.coupling):
            d = ops[dot]
            if br.kind == "b":
                term = t * (d.getH() @ a)
            else:
                term = t * (d.getH() @ adag)
            h = h + term + term.getH()
        if env1 and br.kind == "b":
            env1_b_number = env1_b_number + (adag @ a)

    if config.kind == "spindeg":
        # Independent reservoir copies for each spin; branch list is shared.
        env1_count = _env1_branch_count(config)
        mode = n_dots
        for spin in (0, 1):
            for i, br in enumerate(branches):
                add_branch(mode, br, [spin], i < env1_count)
                mode += 1
    else:
        mode = n_dots
        env1_count = _env1_branch_count(config)
        for i, br in enumerate(branches):
            dots = list(range(n_dots)) if config.kind == "twodot" else [0]
            add_branch(mode, br, dots, i < env1_count)
            mode += 1

    h = h.tocsr()
    herm_gap = abs(h - h.getH()).max()
    if herm_gap > 1e-12 * max(1.0, abs(h).max()):
        raise AssertionError(f"Hamiltonian not Hermitian: residual {herm_gap}")
    return OracleOperators(
        hamiltonian=h,
        n_modes=n_modes,
        n_dot_modes=n_dots,
        dot_ops=[ops[i].tocsr() for i in range(n_dots)],
        env1_b_number=env1_b_number.tocsr(),
    )


def _env1_branch_count(config: OracleConfig) -> int:
    """Number of flattened branches belonging to reservoir 1."""
    count = 0
    spec = config.spectra[0]
    scale = max(s.coupling_sq.max() for s in config.spectra)
    tb2 = (1.0 - spec.occupations) * spec.coupling_sq
    tc2 = spec.occupations * spec.coupling_sq
    for w2 in (tb2, tc2):
        count += int(np.sum(w2 > config.prune_threshold * scale))
    return count


def dot_register_state(ops: OracleOperators, dot_index_amplitudes: dict[int, complex]) -> np.ndarray:
    """State vector |dot configuration> x |bath vacuum>.

    Keys index the dot register (0..2^n_dots-1) under the fixed ordering.
    """
    dim = 2 ** ops.n_modes
    env_dim = 2 ** (ops.n_modes - ops.n_dot_modes)
    psi = np.zeros(dim, dtype=complex)
    for idx, amp in dot_index_amplitudes.items():
        psi[idx * env_dim] = amp
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("empty initial state")
    return psi / norm


def evolve_state(
    ops: OracleOperators, psi0: np.ndarray, times: np.ndarray
) -> np.ndarray:
    """Exact propagation |psi(t_i)>; rows indexed like `times`.

    Dense eigendecomposition below dimension 2048, Krylov matrix
    exponential stepping above.  Norm drift beyond 1e-10 aborts.
    """
    times = np.asarray(times, dtype=float)
    h = ops.hamiltonian
    dim = h.shape[0]
    out = np.empty((times.size, dim), dtype=complex)
    if dim <= _DENSE_DIM:
        evals, vecs = eigh(h.toarray())
        coeff = vecs.conj().T @ psi0
        phases = np.exp(-1j * np.outer(times, evals))
        out[...] = (phases * coeff) @ vecs.T
    else:
        if not np.allclose(np.diff(times), times[1] - times[0], rtol=1e-9):
            raise ValueError("sparse propagation needs uniform output times")
        psi = psi0.astype(complex)
        gen = (-1j * (times[1] - times[0])) * h
        for i, t in enumerate(times):
            if i > 0:
                psi = expm_multiply(gen, psi)
            out[i] = psi
    norms = np.linalg.norm(out, axis=1)
    drift = np.abs(norms - np.linalg.norm(psi0)).max()
    if drift > 1e-10:
        raise RuntimeError(f"norm drift {drift:.2e} exceeds 1e-10")
    return out


def reduce_to_dots(ops: OracleOperators, psi: np.ndarray) -> np.ndarray:
    """Partial trace over every bath mode; returns the dot-register density."""
    d_dot = 2 ** ops.n_dot_modes
    mat = psi.reshape(d_dot, -1)
    return mat @ mat.conj().T


def env1_b_outflow(ops: OracleOperators, states: np.ndarray) -> np.ndarray:
    """d<N_b,env1>/dt per output state, from the exact commutator."""
    current_op = 1j * (
        ops.hamiltonian @ ops.env1_b_number - ops.env1_b_number @ ops.hamiltonian
    )
    return np.real(np.einsum("ti,ti->t", states.conj(), (current_op @ states.T).T))
