import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qae import linops
from qae.linops import (
    DOWN,
    SIGMA_X,
    UP,
    embed_unitary,
    exp_hermitian,
    exp_hermitian_derivative,
    fidelity_pure,
    generator_matrix,
    partial_trace,
    pauli_string,
    projector,
    tensor,
)

from conftest import random_density, random_state, random_unitary


def ghz(m, phi=0.0):
    v = np.zeros(2**m, dtype=complex)
    v[0] = 1 / np.sqrt(2)
    v[-1] = np.exp(1j * phi) / np.sqrt(2)
    return v


# --- tensor -----------------------------------------------------------------


def test_tensor_basis_ordering():
    np.testing.assert_array_equal(tensor(UP, DOWN), [0, 1, 0, 0])


def test_tensor_trace_and_norm(rng):
    rho = random_density(rng, 2)
    assert abs(np.trace(tensor(rho, np.eye(2) / 2)) - 1) < 1e-12
    a, b = random_state(rng, 1), random_state(rng, 1)
    assert abs(np.linalg.norm(tensor(a, b)) - 1) < 1e-12


def test_tensor_rejects_mixed_kinds():
    with pytest.raises(TypeError):
        tensor(UP, np.eye(2))


# --- partial trace ----------------------------------------------------------


def brute_partial_trace(rho, n, keep):
    """Explicit index summation over the traced qubits."""
    keep = sorted(keep)
    traced = [q for q in range(n) if q not in keep]
    k = len(keep)
    out = np.zeros((2**k, 2**k), dtype=complex)
    for a in itertools.product((0, 1), repeat=k):
        for b in itertools.product((0, 1), repeat=k):
            s = 0
            for r in itertools.product((0, 1), repeat=len(traced)):
                row = [0] * n
                col = [0] * n
                for q, v in zip(keep, a):
                    row[q] = v
                for q, v in zip(keep, b):
                    col[q] = v
                for q, v in zip(traced, r):
                    row[q] = col[q] = v
                i = int("".join(map(str, row)), 2)
                j = int("".join(map(str, col)), 2)
                s += rho[i, j]
            out[int("".join(map(str, a)), 2), int("".join(map(str, b)), 2)] = s
    return out


def test_partial_trace_product_state():
    rho = projector(tensor(UP, DOWN))
    np.testing.assert_allclose(partial_trace(rho, {0}), projector(UP), atol=1e-15)


def test_partial_trace_bell_pair():
    np.testing.assert_allclose(partial_trace(projector(ghz(2)), {0}), np.eye(2) / 2, atol=1e-15)


@pytest.mark.parametrize("keep", [{0, 1}, {0}, {2}, {0, 2}, {1, 2}])
def test_partial_trace_matches_index_summation(rng, keep):
    rho = random_density(rng, 3)
    np.testing.assert_allclose(partial_trace(rho, keep), brute_partial_trace(rho, 3, keep), atol=1e-12)


def test_partial_trace_of_tensor_recovers_factor(rng):
    for _ in range(10):
        a, b = random_density(rng, 2), random_density(rng, 1)
        np.testing.assert_allclose(partial_trace(tensor(a, b), {0, 1}), a, atol=1e-12)
        np.testing.assert_allclose(partial_trace(tensor(a, b), {2}), b, atol=1e-12)


@pytest.mark.parametrize("keep", [set(), {3}, {-1}])
def test_partial_trace_rejects_bad_keep(keep):
    with pytest.raises(ValueError):
        partial_trace(np.eye(8) / 8, keep)


def test_reduce_operator_respects_keep_order(rng):
    a, b = random_unitary(rng, 2), random_unitary(rng, 2)
    op = np.kron(a, b)
    np.testing.assert_allclose(linops.reduce_operator(op, 2, [1, 0]), np.kron(b, a), atol=1e-14)
    np.testing.assert_allclose(linops.reduce_operator(op, 2, [1]), np.trace(a) * b, atol=1e-14)


# --- embedding --------------------------------------------------------------


def permutation_matrix(order, n):
    """P with P|x_0..x_{n-1}> = |y> where y_{order[i]} = x_i."""
    d = 2**n
    p = np.zeros((d, d))
    for x in itertools.product((0, 1), repeat=n):
        y = [0] * n
        for i, q in enumerate(order):
            y[q] = x[i]
        p[int("".join(map(str, y)), 2), int("".join(map(str, x)), 2)] = 1
    return p


def test_embed_sigma_x_on_second_qubit():
    u = embed_unitary(SIGMA_X, [1], 2)
    np.testing.assert_array_equal(u @ tensor(UP, UP), tensor(UP, DOWN))


def test_embed_identity():
    np.testing.assert_array_equal(embed_unitary(np.eye(4), [2, 0], 3), np.eye(8))


def test_embed_matches_permutation_oracle(rng):
    u = random_unitary(rng, 4)
    targets = [2, 0]
    order = targets + [1]
    p = permutation_matrix(order, 3)
    expected = p @ np.kron(u, np.eye(2)) @ p.T
    got = embed_unitary(u, targets, 3)
    np.testing.assert_allclose(got, expected, atol=1e-12)
    np.testing.assert_allclose(got @ got.conj().T, np.eye(8), atol=1e-10)


@pytest.mark.parametrize("targets,total", [([0, 0], 3), ([0, 1, 2], 2)])
def test_embed_errors(targets, total):
    with pytest.raises(ValueError):
        embed_unitary(np.eye(2 ** len(targets)), targets, total)


# --- Pauli strings ----------------------------------------------------------


def test_pauli_identity_and_involution():
    np.testing.assert_array_equal(pauli_string(0, 2), np.eye(4))
    x = pauli_string(1, 1)
    np.testing.assert_array_equal(x, SIGMA_X)
    np.testing.assert_array_equal(x @ x, np.eye(2))


def test_pauli_orthogonality():
    f = 2
    mats = [pauli_string(i, f) for i in range(16)]
    gram = np.array([[np.trace(a @ b) for b in mats] for a in mats])
    np.testing.assert_allclose(gram, 4 * np.eye(16), atol=1e-14)


def test_pauli_basis_matches_strings():
    basis = linops.pauli_basis(3)
    assert basis.shape == (63, 8, 8)
    for i in range(1, 64):
        np.testing.assert_array_equal(basis[i - 1], pauli_string(i, 3))


def test_pauli_index_out_of_range():
    with pytest.raises(ValueError):
        pauli_string(16, 2)


# --- exponential ------------------------------------------------------------


def test_exp_zero_is_identity():
    np.testing.assert_allclose(exp_hermitian(np.zeros(15), 2), np.eye(4), atol=1e-15)


def test_exp_of_x_rotation():
    c = np.zeros(3)
    c[0] = np.pi / 2
    u = exp_hermitian(c, 1)
    np.testing.assert_allclose(u, 1j * SIGMA_X, atol=1e-14)
    np.testing.assert_allclose(u @ UP, 1j * DOWN, atol=1e-14)


def test_exp_inverse(rng):
    c = rng.normal(size=15)
    np.testing.assert_allclose(exp_hermitian(c, 2) @ exp_hermitian(-c, 2), np.eye(4), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=15, max_size=15))
def test_exp_unitary_for_large_coefficients(c):
    u = exp_hermitian(np.array(c), 2)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-10)


def fd_derivative(c, f, alpha, h=1e-5):
    e = np.zeros_like(c)
    e[alpha] = h
    return (exp_hermitian(c + e, f) - exp_hermitian(c - e, f)) / (2 * h)


def test_derivative_at_zero_is_i_pauli():
    for alpha in range(15):
        d = exp_hermitian_derivative(np.zeros(15), 2, alpha)
        np.testing.assert_allclose(d, 1j * pauli_string(alpha + 1, 2), atol=1e-14)


def test_derivative_matches_finite_differences(rng):
    for _ in range(100):
        f = int(rng.integers(1, 3))
        c = rng.normal(size=4**f - 1)
        alpha = int(rng.integers(4**f - 1))
        np.testing.assert_allclose(exp_hermitian_derivative(c, f, alpha), fd_derivative(c, f, alpha), atol=1e-7)


def test_derivative_degenerate_spectrum(rng):
    # K = a Z1 + b Z2 + a Z1Z2-free construction: Z⊗I + I⊗Z has eigenvalues 2,0,0,-2
    c = np.zeros(15)
    c[3 * 4 + 0 - 1] = 0.7  # Z on qubit 0
    c[0 * 4 + 3 - 1] = 0.7  # Z on qubit 1
    evals = np.linalg.eigvalsh(generator_matrix(c, 2))
    assert np.sum(np.abs(np.diff(np.sort(evals))) < 1e-12) >= 1
    for alpha in range(15):
        np.testing.assert_allclose(exp_hermitian_derivative(c, 2, alpha), fd_derivative(c, 2, alpha), atol=1e-7)


def test_pullback_matches_directional_derivatives(rng):
    f = 2
    c = rng.normal(size=15)
    z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    _, evals, evecs = linops.expi_hermitian(generator_matrix(c, f))
    g = linops.exp_hermitian_pullback(evals, evecs, f, z)
    expected = [np.trace(z @ exp_hermitian_derivative(c, f, a)).real for a in range(15)]
    np.testing.assert_allclose(g, expected, atol=1e-12)


# --- fidelity ---------------------------------------------------------------


def test_fidelity_values(rng):
    g0, gpi = ghz(3), ghz(3, np.pi)
    assert fidelity_pure(projector(g0), g0) == pytest.approx(1, abs=1e-14)
    assert fidelity_pure(projector(g0), gpi) == pytest.approx(0, abs=1e-14)
    psi = random_state(rng, 3)
    assert fidelity_pure(np.eye(8) / 8, psi) == pytest.approx(1 / 8, abs=1e-14)


def test_fidelity_global_phase_invariant(rng):
    rho, psi = random_density(rng, 2), random_state(rng, 2)
    assert fidelity_pure(rho, psi) == pytest.approx(fidelity_pure(rho, np.exp(0.3j) * psi), abs=1e-15)


def test_fidelity_dimension_mismatch():
    with pytest.raises(ValueError):
        fidelity_pure(np.eye(4) / 4, ghz(3))
