"""Points and tangent vectors on the complex Stiefel manifold V_l(C^n).

Points are plain ``(n, l)`` complex arrays with orthonormal columns.
"""
from __future__ import annotations

import numpy as np

from .linalg import as_cmatrix, thin_qr_orthonormalize

STIEFEL_TOL = 1e-10
TANGENT_TOL = 1e-10


def stiefel_error(s) -> float:
    """Max-abs deviation of S^H S from the identity."""
    s = as_cmatrix(s)
    return float(np.max(np.abs(s.conj().T @ s - np.eye(s.shape[1]))))


def is_stiefel(s, tol: float = STIEFEL_TOL) -> bool:
    s = np.asarray(s)
    return s.ndim == 2 and s.shape[0] >= s.shape[1] and stiefel_error(s) <= tol


def tangency_error(s, x) -> float:
    sx = as_cmatrix(s).conj().T @ as_cmatrix(x)
    return float(np.max(np.abs(sx + sx.conj().T)))


def project_to_tangent(s, x) -> np.ndarray:
    """Orthogonal projection of an ambient direction onto T_S."""
    s, x = as_cmatrix(s), as_cmatrix(x)
    if s.shape != x.shape:
        raise ValueError(f"shape mismatch {s.shape} vs {x.shape}")
    sx = s.conj().T @ x
    return x - 0.5 * s @ (sx + sx.conj().T)


def real_hs_inner(a, b) -> float:
    a, b = as_cmatrix(a), as_cmatrix(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.vdot(a, b).real)


def retract(s, step) -> np.ndarray:
    """QR retraction: orthonormalize ``s + step``."""
    s, step = as_cmatrix(s), as_cmatrix(step)
    if s.shape != step.shape:
        raise ValueError(f"shape mismatch {s.shape} vs {step.shape}")
    return thin_qr_orthonormalize(s + step)


def random_point(n: int, l: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed frame: QR of a standard complex Gaussian matrix."""
    if n < l:
        raise ValueError("need n >= l")
    g = rng.standard_normal((n, l)) + 1j * rng.standard_normal((n, l))
    return thin_qr_orthonormalize(g)
