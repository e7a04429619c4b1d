"""Superoperator assembly for the coefficient-driven master equations.

Every ME here has the shape

    drho/dt = -i[H, rho] + sum_z ( z(t) * S1_z + conj(z(t)) * S2_z ) rho,

where each complex coefficient z multiplies a fixed superoperator pair
generated from commutator templates [T rho, A] + H.c. or [A, T rho] + H.c.
Pairs are prebuilt as dense matrices on the vectorized (row-major) density,
so propagation reduces to assembling a small generator per step.
"""

from __future__ import annotations

import numpy as np

from .fermions import commutator_super, left_mul, right_mul, sandwich


def pair_q_rho_comm(t_op: np.ndarray, a_op: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Superoperator pair of z*[T rho, A] + conj(z)*H.c."""
    s1 = sandwich(t_op, a_op) - left_mul(a_op @ t_op)
    td, ad = t_op.conj().T, a_op.conj().T
    s2 = sandwich(ad, td) - right_mul(td @ ad)
    return s1, s2


def pair_a_q_rho(a_op: np.ndarray, t_op: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Superoperator pair of z*[A, T rho] + conj(z)*H.c."""
    s1 = left_mul(a_op @ t_op) - sandwich(t_op, a_op)
    td, ad = t_op.conj().T, a_op.conj().T
    s2 = right_mul(td @ ad) - sandwich(ad, td)
    return s1, s2


def hamiltonian_part(h_op: np.ndarray) -> np.ndarray:
    """-i[H, .] as a superoperator."""
    return -1j * commutator_super(h_op)


def assemble(
    base: np.ndarray,
    pairs: dict[str, tuple[np.ndarray, np.ndarray]],
    values: dict[str, complex],
) -> np.ndarray:
    """Generator at one instant from the coefficient values."""
    gen = base.copy()
    for name, (s1, s2) in pairs.items():
        z = values[name]
        gen += z * s1 + np.conj(z) * s2
    return gen


def trace_vector(dim: int) -> np.ndarray:
    """Covector extracting Tr(rho) from a vectorized density."""
    return np.eye(dim, dtype=complex).reshape(-1)
