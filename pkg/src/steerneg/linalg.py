"""Dense complex Hermitian linear algebra.

Operators are plain ``numpy`` arrays of dtype ``complex128``.  Bipartite
operators carry their local dimensions separately as ``dims=(dA, dB)`` and use
the Alice-major composite index ``i = iA * dB + iB`` throughout.
"""

from __future__ import annotations

import warnings

import numpy as np

HERMITIAN_TOL = 1e-12

_PAULI = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class EigenError(RuntimeError):
    """Raised when the Hermitian eigensolver fails to converge."""


def hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate ``m`` as a Hermitian matrix and return its exact Hermitian part.

    Raises ``ValueError`` for non-square input, non-finite entries or an
    anti-Hermitian residue larger than ``tol * (1 + max|m|)``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    resid = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if resid > tol * (1.0 + np.max(np.abs(m))):
        raise ValueError(f"matrix is not Hermitian (max |M - M^H| = {resid:.3e})")
    return (m + m.conj().T) / 2


def pauli(which: str) -> np.ndarray:
    """Return the Pauli matrix named by ``which`` (one of ``I``, ``X``, ``Y``, ``Z``)."""
    try:
        return _PAULI[which.upper()].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli matrix {which!r}") from None


def ket_projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def tensor(a, b) -> np.ndarray:
    """Kronecker product in the Alice-major convention."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def _check_dims(m: np.ndarray, dims: tuple[int, int]) -> tuple[int, int]:
    da, db = (int(d) for d in dims)
    if da < 1 or db < 1 or m.shape != (da * db, da * db):
        raise ValueError(f"operator of shape {m.shape} does not match dims {dims}")
    return da, db


def partial_trace_a(m, dims: tuple[int, int]) -> np.ndarray:
    """Trace out Alice: ``out[j, j'] = sum_i m[(i, j), (i, j')]``."""
    m = np.asarray(m, dtype=complex)
    da, db = _check_dims(m, dims)
    return np.einsum("ijik->jk", m.reshape(da, db, da, db))


def partial_trace_b(m, dims: tuple[int, int]) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    da, db = _check_dims(m, dims)
    return np.einsum("ijkj->ik", m.reshape(da, db, da, db))


def partial_transpose_b(m, dims: tuple[int, int]) -> np.ndarray:
    """Transpose every ``dB x dB`` block: ``out[(i, j), (i', j')] = m[(i, j'), (i', j)]``."""
    m = np.asarray(m, dtype=complex)
    da, db = _check_dims(m, dims)
    return m.reshape(da, db, da, db).transpose(0, 3, 2, 1).reshape(da * db, da * db)


def eig_hermitian(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) of ``m``."""
    m = hermitian(m, tol=np.inf)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"Hermitian eigendecomposition failed: {exc}") from exc
    return w, v


def eigvalsh(m) -> np.ndarray:
    return eig_hermitian(m)[0]


def min_eig(m) -> float:
    return float(eigvalsh(m)[0])


def is_psd(m, tol: float = 0.0) -> bool:
    """True iff the smallest eigenvalue of ``m`` is at least ``-tol``."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return min_eig(m) >= -tol


def negative_part_sum(m) -> float:
    """Total magnitude of the negative eigenvalues of a Hermitian matrix."""
    w = eigvalsh(m)
    return float(-np.sum(w[w < 0]))


def trace_norm(m) -> float:
    return float(np.sum(np.abs(eigvalsh(m))))


def negativity(rho, dims: tuple[int, int]) -> float:
    """Negativity of a bipartite state: sum of |negative eigenvalues| of ``rho^{T_B}``.

    The spectrum of the partial transpose does not depend on which side is
    transposed, so Bob's side is used.  A warning is emitted (but nothing
    fails) when ``tr rho`` differs from 1 by more than ``1e-9``.
    """
    rho = hermitian(rho, tol=1e-9)
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > 1e-9:
        warnings.warn(f"negativity of an operator with trace {tr:.6g}", stacklevel=2)
    return negative_part_sum(partial_transpose_b(rho, dims))


def psd_sqrt_pinv(m, cutoff: float = 1e-9) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spectral data of a PSD matrix restricted to eigenvalues above ``cutoff``.

    Returns ``(vals, vecs, inv_sqrt)`` where ``vecs`` spans the support and
    ``inv_sqrt`` is the pseudo-inverse square root.
    """
    w, v = eig_hermitian(m)
    keep = w > cutoff
    vals, vecs = w[keep], v[:, keep]
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.conj().T
    return vals, vecs, inv_sqrt


# --- states and random objects ------------------------------------------------

def singlet() -> np.ndarray:
    """``|psi_-><psi_-|`` with ``|psi_-> = (|01> - |10>)/sqrt(2)``."""
    psi = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
    return ket_projector(psi)


def werner(p: float) -> np.ndarray:
    """Two-qubit Werner state ``p |psi_-><psi_-| + (1 - p) I/4``."""
    return p * singlet() + (1 - p) * np.eye(4, dtype=complex) / 4


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Gaussian Hermitian matrix: independent N(0, 1) real and imaginary parts, then Hermitised."""
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (g + g.conj().T) / 2


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from a partial trace of a Ginibre matrix of the given rank."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_projective_measurement(d: int, n_outcomes: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Haar-rotated computational projectors grouped into ``n_outcomes`` outcomes.

    Basis vector ``k`` goes to outcome ``k % n_outcomes``; when ``d < n_outcomes``
    the trailing outcomes are zero projectors.
    """
    u = random_unitary(d, rng)
    projs = [np.zeros((d, d), dtype=complex) for _ in range(n_outcomes)]
    for k in range(d):
        projs[k % n_outcomes] += ket_projector(u[:, k])
    return projs
