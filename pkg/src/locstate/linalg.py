"""Dense complex linear algebra used throughout the package."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    orthonormal: float = 1e-12
    psd_floor: float = -1e-10
    rank: float = 1e-12
    measure_zero: float = 1e-12


TOL = Tolerances()


class RankDeficientError(np.linalg.LinAlgError):
    pass


def as_cmatrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def kron(a, b) -> np.ndarray:
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def dagger(a) -> np.ndarray:
    return as_cmatrix(a).conj().T


def matmul(a, b) -> np.ndarray:
    a, b = as_cmatrix(a), as_cmatrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def trace(a) -> complex:
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"trace of non-square matrix {a.shape}")
    return complex(np.trace(a))


def hermiticity_error(a) -> float:
    a = as_cmatrix(a)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def _fix_phase(vectors: np.ndarray) -> np.ndarray:
    # first entry of each column with |v| above noise made real positive
    out = vectors.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size:
            z = col[idx[0]]
            out[:, k] = col * (abs(z) / z)
    return out


def hermitian_eigensystem(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Eigenvalues are returned in descending order; each eigenvector has its
    first non-negligible component real and positive.
    """
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("eigensystem of non-square matrix")
    if hermiticity_error(a) > TOL.hermitian:
        raise ValueError("matrix is not Hermitian")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.conj().T))
    order = np.argsort(vals)[::-1]
    return vals[order], _fix_phase(vecs[:, order])


def thin_qr_orthonormalize(a) -> np.ndarray:
    """Q factor of a thin QR decomposition with non-negative real diag(R)."""
    a = as_cmatrix(a)
    if a.shape[0] < a.shape[1]:
        raise ValueError("need rows >= cols")
    q, r = np.linalg.qr(a)
    d = np.diag(r)
    if np.min(np.abs(d)) < TOL.rank:
        raise RankDeficientError("matrix is rank deficient")
    return q * (d / np.abs(d))


def permutation_matrix(perm) -> np.ndarray:
    """Unitary P with (P @ x)[i] == x[perm[i]]."""
    perm = np.asarray(perm, dtype=np.int64)
    m = perm.size
    if perm.ndim != 1 or not np.array_equal(np.sort(perm), np.arange(m)):
        raise ValueError("not a permutation of 0..m-1")
    p = np.zeros((m, m), dtype=np.complex128)
    p[np.arange(m), perm] = 1.0
    return p
