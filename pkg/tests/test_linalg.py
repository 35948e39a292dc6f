import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steerneg import linalg
from oracles import negativity_oracle, partial_transpose_loops, singlet_matrix, werner_pt_eigenvalues

X, Y, Z, I2 = (linalg.pauli(p) for p in "XYZI")


def test_pauli_definitions():
    assert np.array_equal(X, [[0, 1], [1, 0]])
    assert np.array_equal(Y, [[0, -1j], [1j, 0]])
    assert np.array_equal(Z @ Z, I2)


def test_hermitian_validation():
    m = linalg.hermitian([[1, 2 + 1j], [2 - 1j, 3]])
    assert np.array_equal(m, m.conj().T)
    with pytest.raises(ValueError, match="not Hermitian"):
        linalg.hermitian([[0, 1], [0, 0]])
    with pytest.raises(ValueError, match="square"):
        linalg.hermitian(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="non-finite"):
        linalg.hermitian([[np.nan, 0], [0, 1]])


def test_tensor_examples():
    assert np.array_equal(linalg.tensor(I2, I2), np.eye(4))
    assert np.array_equal(linalg.tensor(Z, Z), np.diag([1, -1, -1, 1]))
    xy = linalg.tensor(X, Y)
    assert np.trace(xy @ xy).real == pytest.approx(4)


def test_partial_trace_examples():
    rng = np.random.default_rng(3)
    ra, rb = linalg.random_density_matrix(2, rng), linalg.random_density_matrix(3, rng)
    ra = 0.7 * ra
    assert np.allclose(linalg.partial_trace_a(np.kron(ra, rb), (2, 3)), np.trace(ra) * rb)
    assert np.allclose(linalg.partial_trace_b(np.kron(ra, rb), (2, 3)), ra)
    s = singlet_matrix()
    assert np.allclose(linalg.partial_trace_a(s, (2, 2)), I2 / 2)
    # (Z (x) I)|psi-><psi-| written out: only the |01>,|10> block survives
    zs = np.kron(Z, I2) @ s
    assert np.allclose(linalg.partial_trace_a(zs, (2, 2)), np.diag([-0.5, 0.5]))


def test_partial_transpose_examples():
    rng = np.random.default_rng(4)
    a, b = linalg.random_hermitian(2, rng), linalg.random_hermitian(3, rng)
    assert np.allclose(linalg.partial_transpose_b(np.kron(a, b), (2, 3)), np.kron(a, b.T))
    ev = np.linalg.eigvalsh(linalg.partial_transpose_b(singlet_matrix(), (2, 2)))
    assert np.allclose(sorted(ev), [-0.5, 0.5, 0.5, 0.5])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_partial_transpose_matches_index_loops_and_is_involution(d_a, d_b, seed):
    m = linalg.random_hermitian(d_a * d_b, np.random.default_rng(seed))
    pt = linalg.partial_transpose_b(m, (d_a, d_b))
    assert np.allclose(pt, partial_transpose_loops(m, d_a, d_b))
    assert np.allclose(linalg.partial_transpose_b(pt, (d_a, d_b)), m)


def test_eigenvalue_examples():
    assert np.allclose(linalg.eigvalsh(Z), [-1, 1])
    assert np.allclose(linalg.eigvalsh(np.eye(3)), [1, 1, 1])
    assert np.allclose(linalg.eigvalsh(X + Z), [-np.sqrt(2), np.sqrt(2)])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_eigendecomposition_reconstructs(d, seed):
    m = linalg.random_hermitian(d, np.random.default_rng(seed))
    w, v = linalg.eig_hermitian(m)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(v @ np.diag(w) @ v.conj().T, m, atol=1e-10)
    assert np.allclose(v.conj().T @ v, np.eye(d), atol=1e-10)


def test_is_psd_examples():
    assert linalg.is_psd(I2, 0)
    assert not linalg.is_psd(Z, 1e-9)
    assert linalg.is_psd(np.zeros((2, 2)), 0)


def test_negativity_examples():
    assert linalg.negativity(singlet_matrix(), (2, 2)) == pytest.approx(0.5, abs=1e-12)
    rng = np.random.default_rng(5)
    prod = np.kron(linalg.random_density_matrix(2, rng), linalg.random_density_matrix(3, rng))
    assert linalg.negativity(prod, (2, 3)) == pytest.approx(0, abs=1e-12)
    w = 0.6 * singlet_matrix() + 0.1 * np.eye(4)
    assert linalg.negativity(w, (2, 2)) == pytest.approx(0.2, abs=1e-12)


def test_werner_oracle_values_frozen():
    # eigenvalues from the closed form and from the explicit loop-based partial transpose
    w = 0.6 * singlet_matrix() + 0.1 * np.eye(4)
    ev = np.linalg.eigvalsh(partial_transpose_loops(w, 2, 2))
    assert np.allclose(ev, werner_pt_eigenvalues(0.6))
    assert np.allclose(werner_pt_eigenvalues(0.6), [-0.2, 0.4, 0.4, 0.4])
    assert negativity_oracle(w, 2, 2) == pytest.approx(0.2, abs=1e-14)
    assert np.allclose(linalg.werner(0.6), w)


def test_negativity_warns_on_unnormalised_input():
    with pytest.warns(UserWarning, match="trace"):
        linalg.negativity(2 * singlet_matrix(), (2, 2))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_negativity_agrees_with_oracle_and_is_partial_transpose_invariant(d_a, d_b, seed):
    rho = linalg.random_density_matrix(d_a * d_b, np.random.default_rng(seed))
    n = linalg.negativity(rho, (d_a, d_b))
    assert n >= 0
    assert n == pytest.approx(negativity_oracle(rho, d_a, d_b), abs=1e-10)
    # the partially transposed state has unit trace and the same |spectrum|
    assert linalg.trace_norm(linalg.partial_transpose_b(rho, (d_a, d_b))) == pytest.approx(1 + 2 * n, abs=1e-10)


def test_random_objects_are_valid():
    rng = np.random.default_rng(6)
    u = linalg.random_unitary(4, rng)
    assert np.allclose(u @ u.conj().T, np.eye(4))
    rho = linalg.random_density_matrix(4, rng)
    assert linalg.is_psd(rho, 1e-12) and np.trace(rho).real == pytest.approx(1)
    proj = linalg.random_projective_measurement(4, 3, rng)
    assert np.allclose(sum(proj), np.eye(4))
    for p in proj:
        assert np.allclose(p @ p, p)
