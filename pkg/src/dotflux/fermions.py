"""Fermionic operators on an occupation-number register.

A fixed mode ordering maps n fermionic modes onto n qubits with sign
strings (Jordan-Wigner): mode 0 owns the most significant bit, and the
annihilator of mode i is  Z x ... x Z x a x 1 x ... x 1  with i leading Z
factors.  The dot modes always come first so that reduced density matrices
of the dots can be read off by reshaping the state vector.

Sign convention fixed by this ordering (used consistently by the model
basis maps and the oracle): for two modes, d0dag d1dag |vac> = +|11>.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

_A = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # annihilator, basis {|0>,|1>}
_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_I = np.eye(2, dtype=complex)


def annihilators_dense(n_modes: int) -> list[np.ndarray]:
    """Dense Jordan-Wigner annihilation operators for small registers."""
    ops = []
    for i in range(n_modes):
        factors = [_Z] * i + [_A] + [_I] * (n_modes - i - 1)
        out = factors[0]
        for f in factors[1:]:
            out = np.kron(out, f)
        ops.append(out)
    return ops


def annihilators_sparse(n_modes: int) -> list[sp.csr_matrix]:
    """Sparse Jordan-Wigner annihilation operators (register up to ~18 modes)."""
    a = sp.csr_matrix(_A)
    z = sp.csr_matrix(_Z)
    eye = sp.identity(2, format="csr", dtype=complex)
    ops = []
    for i in range(n_modes):
        out = None
        for j in range(n_modes):
            f = z if j < i else a if j == i else eye
            out = f if out is None else sp.kron(out, f, format="csr")
        ops.append(out)
    return ops


def left_mul(op: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> op @ rho on row-major vectorized densities."""
    d = op.shape[0]
    return np.kron(op, np.eye(d, dtype=complex))


def right_mul(op: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> rho @ op."""
    d = op.shape[0]
    return np.kron(np.eye(d, dtype=complex), op.T)


def sandwich(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> left @ rho @ right."""
    return np.kron(left, right.T)


def commutator_super(op: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> [op, rho]."""
    return left_mul(op) - right_mul(op)
