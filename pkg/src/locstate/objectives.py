"""Objective functionals on (local) Stiefel points and their gradients.

Two routes are provided.  The module-level functions work literally in the
coordinates of S~ = S_A (x) S_B with the lifted observable I (x) O and the
row permutation U_sigma.  The :class:`Objective` classes hold the same
functionals as per-Kraus-block observables, which is what the optimizer
kernel consumes; the two routes are checked against each other in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import LocalChannel, PostSelectionError, Selector, apply_local_channel
from .linalg import TOL, as_cmatrix, hermiticity_error, permutation_matrix
from .stiefel import project_to_tangent

SURROGATE_THRESHOLD = 1e-12

EXPECTATION, DISTANCE, POSTSELECTED = 0, 1, 2

_PAULI = [
    np.eye(2),
    np.array([[0, 1], [1, 0]]),
    np.array([[0, -1j], [1j, 0]]),
    np.array([[1, 0], [0, -1]]),
]


# --- observables -----------------------------------------------------------


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=np.complex128).ravel()
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def pauli_observables() -> np.ndarray:
    """The 15 normalized two-qubit Pauli products (s_mu (x) s_nu) / 2, mu nu != 00."""
    ops = [
        np.kron(_PAULI[m], _PAULI[n]) / 2
        for m in range(4)
        for n in range(4)
        if (m, n) != (0, 0)
    ]
    return np.array(ops, dtype=np.complex128)


def r_state_observables(sign: int = +1) -> np.ndarray:
    """Observables fixing an R-state: |11><11|, |Psi><Psi| and the two coherences."""
    ket11 = np.array([0, 0, 0, 1], dtype=np.complex128)
    psi = np.array([0, 1, sign, 0], dtype=np.complex128) / np.sqrt(2)
    cross = np.outer(psi, ket11.conj())
    ops = [
        np.outer(ket11, ket11.conj()),
        np.outer(psi, psi.conj()),
        1j * (cross - cross.conj().T) / np.sqrt(2),
        (cross + cross.conj().T) / np.sqrt(2),
    ]
    return np.array(ops)


def check_observable_set(ops, tol: float = 1e-12) -> None:
    ops = np.asarray(ops)
    if ops.ndim != 3 or len(ops) == 0:
        raise ValueError("observable set must be a non-empty stack of matrices")
    for m in ops:
        if hermiticity_error(m) > tol:
            raise ValueError("observable is not Hermitian")
        if abs(np.vdot(m, m).real - 1.0) > tol:
            raise ValueError("observable is not normalized to unit Hilbert-Schmidt norm")


@dataclass(frozen=True)
class LiftedObservable:
    base: np.ndarray
    lifted: np.ndarray


def lift(o, n_kraus: int) -> LiftedObservable:
    """O~ = I_{n_kraus} (x) O."""
    o = as_cmatrix(o)
    return LiftedObservable(o, np.kron(np.eye(n_kraus), o))


def _lifted_for(o, rho_dim: int) -> np.ndarray:
    if isinstance(o, LiftedObservable):
        return o.lifted
    o = as_cmatrix(o)
    if o.shape[0] == rho_dim:
        return lift(o, rho_dim * rho_dim).lifted
    return o


# --- literal route: nonlocal -------------------------------------------------


def expectation_value(s, o, rho) -> float:
    """Tr[S rho S^H O~]."""
    s, rho = as_cmatrix(s), as_cmatrix(rho)
    ol = _lifted_for(o, rho.shape[0])
    z = np.trace(s @ rho @ s.conj().T @ ol)
    if abs(z.imag) > 1e-10 * max(1.0, abs(z.real)):
        raise ValueError("expectation value has a non-negligible imaginary part")
    return float(z.real)


def expectation_gradient(s, o, rho) -> np.ndarray:
    """Ambient gradient 2 O~ S rho."""
    s, rho = as_cmatrix(s), as_cmatrix(rho)
    return 2.0 * _lifted_for(o, rho.shape[0]) @ s @ rho


# --- literal route: local --------------------------------------------------


def ambient_operator(c: LocalChannel, lifted) -> np.ndarray:
    """U_sigma^H X U_sigma for an operator X acting on stacked rows."""
    u = permutation_matrix(c.sigma)
    return u.conj().T @ lifted @ u


def local_expectation(c: LocalChannel, o, rho) -> float:
    rho = as_cmatrix(rho)
    st = c.tilde()
    q = ambient_operator(c, _lifted_for(o, rho.shape[0]))
    return float(np.trace(st @ rho @ st.conj().T @ q).real)


def local_gradient_raw(c: LocalChannel, o, rho) -> np.ndarray:
    """G_loc = 2 (U^H O~ U) S~ rho, shaped like S~."""
    rho = as_cmatrix(rho)
    q = ambient_operator(c, _lifted_for(o, rho.shape[0]))
    return 2.0 * q @ c.tilde() @ rho


def _grid(g, c: LocalChannel) -> np.ndarray:
    (n_a, l_a), (n_b, l_b) = c.s_a.shape, c.s_b.shape
    g = as_cmatrix(g)
    if g.shape != (n_a * n_b, l_a * l_b):
        raise ValueError(f"gradient of shape {g.shape} does not match S_A (x) S_B")
    return g.reshape(n_a, n_b, l_a, l_b)


def project_factor_b(g, c: LocalChannel) -> np.ndarray:
    """M_B with P_A(G) = S_A (x) M_B (projection onto S_A (x) C^{n_B x l_B})."""
    sa = c.s_a
    return np.einsum("prqs,pq->rs", _grid(g, c), sa.conj()) / np.vdot(sa, sa).real


def project_factor_a(g, c: LocalChannel) -> np.ndarray:
    """M_A with P_B(G) = M_A (x) S_B."""
    sb = c.s_b
    return np.einsum("prqs,rs->pq", _grid(g, c), sb.conj()) / np.vdot(sb, sb).real


def local_projected_gradients(c: LocalChannel, g) -> tuple[np.ndarray, np.ndarray]:
    """(pi_{S_A}(M_A), pi_{S_B}(M_B)): the two locality-preserving ascent directions."""
    step_a = project_to_tangent(c.s_a, project_factor_a(g, c))
    step_b = project_to_tangent(c.s_b, project_factor_b(g, c))
    return step_a, step_b


def distance_objective(c: LocalChannel, rho_in, rho_target, m) -> float:
    m = np.asarray(m)
    if m.ndim != 3 or len(m) == 0:
        raise ValueError("empty observable set")
    residual = _distance_residuals(c, rho_in, rho_target, m)
    return float(np.sqrt(np.sum(residual**2)))


def _distance_residuals(c, rho_in, rho_target, m) -> np.ndarray:
    rho_in, rho_target = as_cmatrix(rho_in), as_cmatrix(rho_target)
    values = [local_expectation(c, mi, rho_in) for mi in m]
    targets = [np.trace(rho_target @ mi).real for mi in m]
    return np.array(values) - np.array(targets)


def distance_gradient(c: LocalChannel, rho_in, rho_target, m) -> tuple[np.ndarray, bool]:
    """Chain-rule gradient of the distance; returns (gradient, used_surrogate).

    At D <= 1e-12 the square root is singular and the gradient of D^2 is
    returned instead, with ``used_surrogate`` set.
    """
    m = np.asarray(m)
    if m.ndim != 3 or len(m) == 0:
        raise ValueError("empty observable set")
    residual = _distance_residuals(c, rho_in, rho_target, m)
    dist = float(np.sqrt(np.sum(residual**2)))
    grads = [local_gradient_raw(c, mi, rho_in) for mi in m]
    total = sum(r * g for r, g in zip(residual, grads))
    if dist <= SURROGATE_THRESHOLD:
        return 2.0 * total, True
    return total / dist, False


def _selected_lifted(omega: Selector, lifted: np.ndarray) -> np.ndarray:
    w = omega.matrix
    return w.conj().T @ lifted @ w


def _postselected_parts(c, omega, o, rho):
    rho = as_cmatrix(rho)
    ol = _lifted_for(o, rho.shape[0])
    num = ambient_operator(c, _selected_lifted(omega, ol))
    den = ambient_operator(c, omega.matrix.conj().T @ omega.matrix)
    st = c.tilde()
    out = st @ rho @ st.conj().T
    j1 = float(np.trace(out @ num).real)
    j2 = float(np.trace(out @ den).real)
    if j2 < TOL.measure_zero:
        raise PostSelectionError(f"post-selection has measure zero (p={j2:.3e})")
    return j1, j2, num, den, st, rho


def postselected_objective(c: LocalChannel, omega: Selector, o, rho) -> tuple[float, float]:
    """(post-selected expectation J1/J2, success probability J2)."""
    j1, j2, *_ = _postselected_parts(c, omega, o, rho)
    return j1 / j2, j2


def postselected_gradient(c: LocalChannel, omega: Selector, o, rho) -> np.ndarray:
    j1, j2, num, den, st, rho = _postselected_parts(c, omega, o, rho)
    g1 = 2.0 * num @ st @ rho
    g2 = 2.0 * den @ st @ rho
    return g1 / j2 - j1 * g2 / j2**2


# --- block route used by the optimizer --------------------------------------


class Objective:
    """Scalar function of expectation values of per-Kraus-block observables.

    ``blocks[k, b]`` is the observable that block ``b`` of the stacked Kraus
    family contributes to the k-th linear functional
    ``J_k = sum_b Tr[K_b rho K_b^H W_kb]``.
    """

    kind: int = EXPECTATION
    maximize: bool = True

    def __init__(self, blocks, rho, targets=None):
        self.blocks = np.ascontiguousarray(blocks, dtype=np.complex128)
        self.rho = np.ascontiguousarray(rho, dtype=np.complex128)
        k, nb, d, _ = self.blocks.shape
        if nb != d * d or self.rho.shape != (d, d):
            raise ValueError("block observables do not match the state dimension")
        self.targets = np.zeros(k) if targets is None else np.asarray(targets, dtype=np.float64)

    def combine(self, j: np.ndarray) -> tuple[float, np.ndarray]:
        return float(j[0]), np.ones(1)

    def functionals(self, stacked) -> np.ndarray:
        d = self.rho.shape[0]
        ks = as_cmatrix(stacked).reshape(-1, d, d)
        out = np.einsum("bij,jl,bml->bim", ks, self.rho, ks.conj())
        return np.einsum("bij,kbji->k", out, self.blocks).real

    def stacked_of(self, point) -> np.ndarray:
        return point.stacked() if isinstance(point, LocalChannel) else as_cmatrix(point)

    def value(self, point) -> float:
        return self.combine(self.functionals(self.stacked_of(point)))[0]

    def gradient(self, point) -> np.ndarray:
        """Ambient gradient in S~ coordinates (local) or S coordinates (nonlocal)."""
        stacked = self.stacked_of(point)
        d = self.rho.shape[0]
        _, coeffs = self.combine(self.functionals(stacked))
        h = np.tensordot(coeffs, self.blocks, axes=1)
        ks = stacked.reshape(-1, d, d)
        g = (2.0 * np.einsum("bij,bjk,kl->bil", h, ks, self.rho)).reshape(stacked.shape)
        if isinstance(point, LocalChannel):
            gt = np.empty_like(g)
            gt[point.sigma] = g
            return gt
        return g

    def diagnostics(self, point) -> tuple[float, float]:
        """(fidelity, success probability) for trajectory records."""
        return self.value(point), 1.0


class ExpectationObjective(Objective):
    kind = EXPECTATION

    def __init__(self, observable, rho, maximize: bool = True):
        rho = as_cmatrix(rho)
        d = rho.shape[0]
        o = as_cmatrix(observable)
        super().__init__(np.broadcast_to(o, (1, d * d, d, d)), rho)
        self.maximize = maximize


class DistanceObjective(Objective):
    """sqrt(sum_i (Tr[Lambda(rho_in) M_i] - Tr[rho_target M_i])^2), minimized."""

    kind = DISTANCE
    maximize = False

    def __init__(self, observables, rho_in, rho_target):
        check_observable_set(observables)
        rho_in, rho_target = as_cmatrix(rho_in), as_cmatrix(rho_target)
        m = np.asarray(observables, dtype=np.complex128)
        d = rho_in.shape[0]
        targets = np.einsum("ij,kji->k", rho_target, m).real
        super().__init__(np.broadcast_to(m[:, None], (len(m), d * d, d, d)), rho_in, targets)
        self.observables = m
        self.rho_target = rho_target

    def combine(self, j):
        r = j - self.targets
        dist = float(np.sqrt(np.sum(r**2)))
        if dist <= SURROGATE_THRESHOLD:
            return dist, 2.0 * r
        return dist, r / dist

    def diagnostics(self, point):
        return float("nan"), 1.0


class PostselectedObjective(Objective):
    """J1 / J2 with J1 = <Omega^H O~ Omega>, J2 = <Omega^H Omega>."""

    kind = POSTSELECTED

    def __init__(self, observable, kept_blocks, rho):
        rho = as_cmatrix(rho)
        d = rho.shape[0]
        o = as_cmatrix(observable)
        mask = np.zeros(d * d, dtype=bool)
        mask[list(kept_blocks)] = True
        blocks = np.zeros((2, d * d, d, d), dtype=np.complex128)
        blocks[0, mask] = o
        blocks[1, mask] = np.eye(d)
        super().__init__(blocks, rho)
        self.kept_blocks = frozenset(int(b) for b in kept_blocks)

    @classmethod
    def from_selector(cls, observable, omega: Selector, rho):
        return cls(observable, omega.kept_blocks, rho)

    def combine(self, j):
        j1, j2 = float(j[0]), float(j[1])
        if not j2 >= TOL.measure_zero:
            raise PostSelectionError(f"post-selection has measure zero (p={j2:.3e})")
        return j1 / j2, np.array([1.0 / j2, -j1 / j2**2])

    def diagnostics(self, point):
        j = self.functionals(self.stacked_of(point))
        return float(j[0] / j[1]), float(j[1])
