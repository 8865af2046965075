"""Dense linear algebra on qubit registers.

Conventions used throughout the package:

* qubits are indexed from 0; qubit 0 is the most significant bit of the
  computational-basis index;
* ``|up>`` is basis index 0 and ``|down>`` is basis index 1;
* a pure state is a 1-D complex array of length ``2**m``, a mixed state a
  2-D ``(2**m, 2**m)`` complex array. Stacks of either carry leading batch axes.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "UP",
    "DOWN",
    "SIGMA_X",
    "num_qubits",
    "projector",
    "tensor",
    "partial_trace",
    "reduce_operator",
    "embed_unitary",
    "pauli_string",
    "pauli_basis",
    "generator_matrix",
    "expi_hermitian",
    "exp_hermitian",
    "exp_hermitian_derivative",
    "exp_hermitian_pullback",
    "fidelity_pure",
    "is_density_matrix",
]

UP = np.array([1.0, 0.0], dtype=complex)
DOWN = np.array([0.0, 1.0], dtype=complex)

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
SIGMA_X = _PAULIS[1]

# |l_i - l_j| below this uses the analytic limit in divided differences.
DEGENERACY_TOL = 1e-8


def num_qubits(dim: int) -> int:
    """Number of qubits for a Hilbert-space dimension, rejecting non powers of two."""
    m = int(dim).bit_length() - 1
    if dim < 1 or 1 << m != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return m


def projector(psi: np.ndarray) -> np.ndarray:
    """``|psi><psi|``; works on stacks of state vectors."""
    psi = np.asarray(psi, dtype=complex)
    return psi[..., :, None] * psi[..., None, :].conj()


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two vectors or two matrices, ``a`` being the leading qubits."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != b.ndim or a.ndim not in (1, 2):
        raise TypeError("tensor() needs two state vectors or two matrices")
    return np.kron(a, b)


def reduce_operator(op: np.ndarray, n: int, keep: Sequence[int]) -> np.ndarray:
    """Partial trace of an arbitrary (possibly non-Hermitian) operator.

    ``keep`` is an ordered sequence; the reduced operator has its qubits in
    exactly that order. Leading batch axes of ``op`` are preserved.
    """
    keep = list(keep)
    batch = op.shape[:-2]
    nb = len(batch)
    traced = [q for q in range(n) if q not in keep]
    t = op.reshape(batch + (2,) * (2 * n))
    rows = [nb + q for q in keep]
    cols = [nb + n + q for q in keep]
    tr_rows = [nb + q for q in traced]
    tr_cols = [nb + n + q for q in traced]
    t = t.transpose(list(range(nb)) + rows + tr_rows + cols + tr_cols)
    k, r = 1 << len(keep), 1 << len(traced)
    t = t.reshape(batch + (k, r, k, r))
    return np.einsum("...arbr->...ab", t)


def partial_trace(rho: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix on the qubits in ``keep`` (kept in ascending order)."""
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho.shape[-1])
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep must name at least one qubit")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"qubit index out of range for {n} qubits: {keep}")
    return reduce_operator(rho, n, keep)


def embed_unitary(u: np.ndarray, targets: Sequence[int], total: int) -> np.ndarray:
    """Lift an operator on ``len(targets)`` qubits to ``total`` qubits.

    The i-th qubit of ``u`` is mapped to register qubit ``targets[i]``; all
    other qubits see the identity.
    """
    targets = list(targets)
    f = len(targets)
    if len(set(targets)) != f:
        raise ValueError(f"duplicate targets: {targets}")
    if f > total:
        raise ValueError(f"{f} targets exceed register of {total} qubits")
    if any(t < 0 or t >= total for t in targets):
        raise ValueError(f"target out of range: {targets}")
    u = np.asarray(u, dtype=complex)
    if u.shape != (1 << f, 1 << f):
        raise ValueError(f"operator shape {u.shape} does not act on {f} qubits")
    rest = [q for q in range(total) if q not in targets]
    full = np.kron(u, np.eye(1 << len(rest), dtype=complex))
    order = targets + rest
    # axis position of each register qubit inside ``full``
    inv = np.argsort(order)
    t = full.reshape((2,) * (2 * total))
    t = t.transpose(list(inv) + [total + i for i in inv])
    return t.reshape(1 << total, 1 << total)


def pauli_string(index: int, f: int) -> np.ndarray:
    """Pauli string selected by the base-4 digits of ``index`` (qubit 0 = leading digit).

    Digits map 0, 1, 2, 3 to Id, X, Y, Z.
    """
    if not 0 <= index < 4**f:
        raise ValueError(f"Pauli index {index} out of range for {f} qubits")
    out = np.ones((1, 1), dtype=complex)
    for q in range(f):
        digit = (index // 4 ** (f - 1 - q)) % 4
        out = np.kron(out, _PAULIS[digit])
    return out


@lru_cache(maxsize=None)
def pauli_basis(f: int) -> np.ndarray:
    """Stack of the ``4**f - 1`` non-identity Pauli strings on ``f`` qubits (read-only)."""
    basis = np.ones((1, 1, 1), dtype=complex)
    for _ in range(f):
        basis = np.einsum("aij,bkl->abikjl", basis, np.stack(_PAULIS))
        d = basis.shape[2] * basis.shape[3]
        basis = basis.reshape(-1, d, d)
    basis = np.ascontiguousarray(basis[1:])
    basis.setflags(write=False)
    return basis


def generator_matrix(coeffs: np.ndarray, f: int) -> np.ndarray:
    """Hermitian matrix ``sum_a coeffs[a] P_a`` over non-identity Pauli strings."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (4**f - 1,):
        raise ValueError(f"expected {4**f - 1} coefficients for {f} qubits, got {coeffs.shape}")
    k = np.tensordot(coeffs, pauli_basis(f), axes=1)
    # exact Hermiticity despite rounding in the sum
    return 0.5 * (k + k.conj().T)


def expi_hermitian(k: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``exp(iK)`` of Hermitian ``K`` by eigendecomposition.

    Returns ``(U, eigenvalues, eigenvectors)`` so that callers can reuse the
    decomposition for derivatives. Works on stacks.
    """
    evals, evecs = np.linalg.eigh(k)
    u = (evecs * np.exp(1j * evals)[..., None, :]) @ evecs.conj().swapaxes(-1, -2)
    return u, evals, evecs


def exp_hermitian(coeffs: np.ndarray, f: int) -> np.ndarray:
    """Unitary ``exp(iK)`` generated by Pauli coefficients on ``f`` qubits."""
    return expi_hermitian(generator_matrix(coeffs, f))[0]


def _divided_differences(evals: np.ndarray) -> np.ndarray:
    """Matrix of divided differences of ``exp(i x)`` over eigenvalue pairs."""
    li = evals[:, None]
    lk = evals[None, :]
    diff = li - lk
    close = np.abs(diff) < DEGENERACY_TOL
    safe = np.where(close, 1.0, diff)
    phi = (np.exp(1j * li) - np.exp(1j * lk)) / safe
    limit = 1j * np.exp(0.5j * (li + lk))
    return np.where(close, limit, phi)


def exp_hermitian_derivative(coeffs: np.ndarray, f: int, alpha: int) -> np.ndarray:
    """Derivative of ``exp(iK)`` along Pauli coefficient ``alpha`` (Daleckii-Krein)."""
    if not 0 <= alpha < 4**f - 1:
        raise ValueError(f"direction {alpha} out of range")
    _, evals, evecs = expi_hermitian(generator_matrix(coeffs, f))
    p = pauli_basis(f)[alpha]
    c = evecs.conj().T @ p @ evecs
    return evecs @ (_divided_differences(evals) * c) @ evecs.conj().T


def exp_hermitian_pullback(evals: np.ndarray, evecs: np.ndarray, f: int, z: np.ndarray) -> np.ndarray:
    """Vector ``g[a] = Re tr(Z dU/dtheta_a)`` for ``U = exp(iK)`` with the given eigensystem.

    This contracts a matrix cotangent ``Z`` with every Pauli direction at
    once, which is how the training gradient reaches the coefficients.
    """
    w = evecs.conj().T @ z @ evecs
    y = evecs @ (w * _divided_differences(evals).T) @ evecs.conj().T
    # tr(Y P) = sum_ab Y_ab P_ba
    return np.einsum("ab,nba->n", y, pauli_basis(f)).real


def fidelity_pure(rho: np.ndarray, psi: np.ndarray) -> float:
    """``<psi|rho|psi>`` clamped to [0, 1]."""
    rho = np.asarray(rho)
    psi = np.asarray(psi)
    if rho.shape != (psi.shape[0], psi.shape[0]):
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs psi {psi.shape}")
    val = np.vdot(psi, rho @ psi)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"fidelity has imaginary part {val.imag:.3e}; rho not Hermitian?")
    return float(min(1.0, max(0.0, val.real)))


def is_density_matrix(rho: np.ndarray, atol: float = 1e-10, psd_tol: float = 1e-9) -> bool:
    """Hermitian, unit trace and PSD up to the given tolerances."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not np.allclose(rho, rho.conj().T, atol=atol, rtol=0):
        return False
    if abs(np.trace(rho) - 1) > atol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -psd_tol)
