"""Kraus families, their Stiefel stacking, and local (product) channels."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from .linalg import TOL, as_cmatrix, permutation_matrix
from .stiefel import STIEFEL_TOL, stiefel_error

TP_TOL = 1e-9


class PostSelectionError(ArithmeticError):
    """Raised when the kept outcomes have (numerically) zero probability."""


@dataclass(frozen=True)
class KrausSet:
    operators: np.ndarray  # (r, N, N)

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=np.complex128)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ValueError(f"expected (r, N, N) operators, got {ops.shape}")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    def completeness_error(self) -> float:
        total = np.einsum("kji,kjl->il", self.operators.conj(), self.operators)
        return float(np.max(np.abs(total - np.eye(self.dim))))


def kraus_to_stiefel(k: KrausSet | Iterable) -> np.ndarray:
    """Stack Kraus operators (zero-padded to N^2 of them) into an N^3 x N matrix."""
    if not isinstance(k, KrausSet):
        k = KrausSet(np.asarray(list(k)))
    n, r = k.dim, len(k.operators)
    if r > n * n:
        raise ValueError(f"at most {n * n} Kraus operators allowed, got {r}")
    if k.completeness_error() > TP_TOL:
        raise ValueError("Kraus operators are not trace preserving")
    s = np.zeros((n**3, n), dtype=np.complex128)
    s[: r * n] = k.operators.reshape(r * n, n)
    return s


def stiefel_to_kraus(s) -> KrausSet:
    s = as_cmatrix(s)
    n_rows, n = s.shape
    if n_rows != n**3:
        raise ValueError(f"a {n_rows}x{n} matrix does not stack {n * n} Kraus operators")
    return KrausSet(s.reshape(n * n, n, n).copy())


@lru_cache(maxsize=None)
def _sigma(na: int, nb: int) -> np.ndarray:
    big_na, big_nb = na**3, nb**3
    i, j, p, q = np.meshgrid(
        np.arange(na * na), np.arange(nb * nb), np.arange(na), np.arange(nb), indexing="ij"
    )
    stacked = (i * nb * nb + j) * na * nb + p * nb + q
    tensor = (i * na + p) * big_nb + j * nb + q
    perm = np.empty(big_na * big_nb, dtype=np.int64)
    perm[stacked.ravel()] = tensor.ravel()
    perm.setflags(write=False)
    return perm


def build_sigma(n_a: int, l_a: int, n_b: int, l_b: int) -> np.ndarray:
    """Row permutation taking S_A (x) S_B to the stacked family {K_i^A (x) K_j^B}.

    Row ``r`` of the stacked matrix is row ``sigma[r]`` of the tensor product;
    blocks are ordered lexicographically in (i, j).
    """
    if n_a != l_a**3 or n_b != l_b**3:
        raise ValueError("each side must be an N^3 x N stacked Kraus family")
    return _sigma(l_a, l_b)


@dataclass(frozen=True)
class LocalChannel:
    """Product channel Lambda_A (x) Lambda_B held as two Stiefel points."""

    s_a: np.ndarray
    s_b: np.ndarray
    sigma: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        s_a, s_b = as_cmatrix(self.s_a), as_cmatrix(self.s_b)
        object.__setattr__(self, "s_a", s_a)
        object.__setattr__(self, "s_b", s_b)
        object.__setattr__(self, "sigma", build_sigma(*s_a.shape, *s_b.shape))

    @property
    def dims(self) -> tuple[int, int]:
        return self.s_a.shape[1], self.s_b.shape[1]

    @property
    def dim(self) -> int:
        return self.s_a.shape[1] * self.s_b.shape[1]

    def tilde(self) -> np.ndarray:
        """S~ = S_A (x) S_B."""
        return np.kron(self.s_a, self.s_b)

    def stacked(self) -> np.ndarray:
        """S = U_sigma S~, the vertical stack of all product Kraus operators."""
        return self.tilde()[self.sigma]

    def kraus_a(self) -> np.ndarray:
        return stiefel_to_kraus(self.s_a).operators

    def kraus_b(self) -> np.ndarray:
        return stiefel_to_kraus(self.s_b).operators

    def product_kraus(self) -> np.ndarray:
        d = self.dim
        return self.stacked().reshape(-1, d, d)

    def feasibility_error(self) -> float:
        return max(stiefel_error(self.s_a), stiefel_error(self.s_b))

    @classmethod
    def from_kraus(cls, kraus_a, kraus_b) -> "LocalChannel":
        return cls(kraus_to_stiefel(kraus_a), kraus_to_stiefel(kraus_b))

    @classmethod
    def identity(cls, n_a: int = 2, n_b: int = 2) -> "LocalChannel":
        return cls.from_kraus([np.eye(n_a)], [np.eye(n_b)])


def sigma_matrix(c: LocalChannel) -> np.ndarray:
    return permutation_matrix(c.sigma)


@dataclass(frozen=True)
class Selector:
    """Diagonal 0/1 matrix keeping a subset of Kraus blocks."""

    total_blocks: int
    kept_blocks: frozenset
    block_dim: int

    def __post_init__(self):
        kept = frozenset(int(b) for b in self.kept_blocks)
        if any(b < 0 or b >= self.total_blocks for b in kept):
            raise ValueError("kept block index out of range")
        object.__setattr__(self, "kept_blocks", kept)

    @classmethod
    def keep(cls, c: LocalChannel, blocks: Iterable[int]) -> "Selector":
        na, nb = c.dims
        return cls((na * nb) ** 2, frozenset(blocks), na * nb)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.total_blocks, dtype=bool)
        m[list(self.kept_blocks)] = True
        return m

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(np.repeat(self.mask, self.block_dim).astype(np.complex128))


def apply_channel(k: KrausSet | np.ndarray, rho) -> np.ndarray:
    ops = k.operators if isinstance(k, KrausSet) else np.asarray(k, dtype=np.complex128)
    rho = as_cmatrix(rho)
    if ops.shape[-1] != rho.shape[0]:
        raise ValueError("dimension mismatch between channel and state")
    return np.einsum("kij,jl,kml->im", ops, rho, ops.conj())


def _block_outputs(c: LocalChannel, rho) -> np.ndarray:
    rho = as_cmatrix(rho)
    if rho.shape != (c.dim, c.dim):
        raise ValueError(f"state of shape {rho.shape} does not match channel dim {c.dim}")
    ks = c.product_kraus()
    return np.einsum("kij,jl,kml->kim", ks, rho, ks.conj())


def apply_local_channel(c: LocalChannel, rho) -> np.ndarray:
    return _block_outputs(c, rho).sum(axis=0)


def apply_postselected(c: LocalChannel, omega: Selector, rho) -> tuple[np.ndarray, float]:
    """Keep only the outcomes selected by ``omega``; return (state, probability)."""
    if omega.total_blocks != c.dim**2 or omega.block_dim != c.dim:
        raise ValueError("selector does not match the channel's block structure")
    tau = _block_outputs(c, rho)[omega.mask].sum(axis=0)
    prob = float(np.trace(tau).real)
    if prob < TOL.measure_zero:
        raise PostSelectionError(f"post-selection has measure zero (p={prob:.3e})")
    return tau / prob, prob


def _encode(m) -> list:
    m = np.asarray(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _decode(rows) -> np.ndarray:
    a = np.asarray(rows, dtype=np.float64)
    return a[..., 0] + 1j * a[..., 1]


def local_channel_to_json(c: LocalChannel) -> dict:
    return {"dims": list(c.dims), "s_a": _encode(c.s_a), "s_b": _encode(c.s_b)}


def local_channel_from_json(doc: dict | str) -> LocalChannel:
    if isinstance(doc, str):
        doc = json.loads(doc)
    c = LocalChannel(_decode(doc["s_a"]), _decode(doc["s_b"]))
    if list(c.dims) != list(doc["dims"]):
        raise ValueError("dims field disagrees with the stored matrices")
    if c.feasibility_error() > STIEFEL_TOL:
        raise ValueError("stored matrices are not on the Stiefel manifold")
    return c


def kraus_to_json(k: KrausSet) -> dict:
    return {"dim": k.dim, "operators": [_encode(op) for op in k.operators]}


def kraus_from_json(doc: dict | str) -> KrausSet:
    if isinstance(doc, str):
        doc = json.loads(doc)
    ops = np.array([_decode(op) for op in doc["operators"]])
    k = KrausSet(ops)
    if k.dim != doc["dim"]:
        raise ValueError("dim field disagrees with the stored operators")
    return k
