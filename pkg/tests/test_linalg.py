import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from locstate.linalg import (
    RankDeficientError,
    dagger,
    hermitian_eigensystem,
    hermiticity_error,
    kron,
    matmul,
    permutation_matrix,
    thin_qr_orthonormalize,
    trace,
)

from conftest import cgauss

seeds = st.integers(0, 2**32 - 1)


def test_kron_matches_index_formula(rng):
    a, b = cgauss(rng, (2, 3)), cgauss(rng, (4, 2))
    k = kron(a, b)
    assert k.shape == (8, 6)
    for i in range(2):
        for j in range(3):
            for p in range(4):
                for q in range(2):
                    assert abs(k[i * 4 + p, j * 2 + q] - a[i, j] * b[p, q]) < 1e-14


def test_dagger_and_trace(rng):
    a = cgauss(rng, (3, 3))
    assert np.array_equal(dagger(a), a.conj().T)
    assert trace(a) == pytest.approx(np.trace(a))


def test_matmul_shape_mismatch():
    with pytest.raises(ValueError):
        matmul(np.eye(2), np.eye(3))


def test_trace_rejects_non_square():
    with pytest.raises(ValueError):
        trace(np.ones((2, 3)))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 6))
def test_eigensystem_reconstructs(seed, n):
    g = cgauss(np.random.default_rng(seed), (n, n))
    h = g + g.conj().T
    vals, vecs = hermitian_eigensystem(h)
    assert np.all(np.diff(vals) <= 1e-12)
    assert np.allclose(vecs @ np.diag(vals) @ vecs.conj().T, h, atol=1e-10)
    assert np.allclose(vecs.conj().T @ vecs, np.eye(n), atol=1e-10)


def test_eigensystem_phase_convention(rng):
    g = cgauss(rng, (4, 4))
    _, vecs = hermitian_eigensystem(g + g.conj().T)
    for k in range(4):
        first = vecs[np.flatnonzero(np.abs(vecs[:, k]) > 1e-12)[0], k]
        assert abs(first.imag) < 1e-14 and first.real > 0


def test_eigensystem_rejects_non_hermitian():
    with pytest.raises(ValueError):
        hermitian_eigensystem(np.array([[0, 1], [0, 0]]))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 5), st.integers(0, 6))
def test_qr_orthonormal_same_span(seed, l, extra):
    a = cgauss(np.random.default_rng(seed), (l + extra, l))
    q = thin_qr_orthonormalize(a)
    assert np.max(np.abs(q.conj().T @ q - np.eye(l))) <= 1e-12
    r = q.conj().T @ a
    # upper triangular with positive real diagonal
    assert np.allclose(np.tril(r, -1), 0, atol=1e-10)
    assert np.all(np.diag(r).real > 0) and np.allclose(np.diag(r).imag, 0, atol=1e-10)


def test_qr_rank_deficient():
    a = np.array([[1, 2], [2, 4], [3, 6]], dtype=complex)
    with pytest.raises(RankDeficientError):
        thin_qr_orthonormalize(a)


def test_permutation_matrix_convention():
    perm = [2, 0, 3, 1]
    x = np.arange(4.0)
    assert np.array_equal((permutation_matrix(perm) @ x).real, x[perm])
    p = permutation_matrix(perm)
    assert np.allclose(p @ p.conj().T, np.eye(4))
    with pytest.raises(ValueError):
        permutation_matrix([0, 0, 1])


def test_hermiticity_error():
    assert hermiticity_error(np.eye(3)) == 0.0
    assert hermiticity_error(np.array([[0, 1j], [1j, 0]])) == pytest.approx(2.0)
