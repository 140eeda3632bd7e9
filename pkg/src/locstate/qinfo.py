"""Two-qubit states, entanglement quantifiers and random-state ensembles."""
from __future__ import annotations

import json

import numpy as np

from .channels import LocalChannel, apply_local_channel
from .linalg import as_cmatrix, hermiticity_error

DENSITY_TOL = 1e-10

_S2 = np.sqrt(2.0)
# columns are the magic basis vectors
MAGIC_BASIS = np.array(
    [
        [1, 1j, 0, 0],
        [0, 0, 1j, 1],
        [0, 0, 1j, -1],
        [1, -1j, 0, 0],
    ],
    dtype=np.complex128,
) / _S2

_BELL = {
    "phi+": [1, 0, 0, 1],
    "phi-": [1, 0, 0, -1],
    "psi+": [0, 1, 1, 0],
    "psi-": [0, 1, -1, 0],
}

_SIGMA_YY = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])


class SamplingBudgetError(RuntimeError):
    pass


def density_violations(rho, tol: float = DENSITY_TOL) -> list[str]:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return ["not a square matrix"]
    problems = []
    if hermiticity_error(rho) > tol:
        problems.append("not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        problems.append("trace differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -tol:
        problems.append("not positive semidefinite")
    return problems


def is_density_matrix(rho, tol: float = DENSITY_TOL) -> bool:
    return not density_violations(rho, tol)


def check_density(rho, tol: float = DENSITY_TOL) -> np.ndarray:
    rho = as_cmatrix(rho)
    problems = density_violations(rho, tol)
    if problems:
        raise ValueError("invalid density matrix: " + ", ".join(problems))
    return rho


def density_to_json(rho) -> dict:
    rho = as_cmatrix(rho)
    return {
        "dim": rho.shape[0],
        "entries": [[float(z.real), float(z.imag)] for z in rho.ravel()],
    }


def density_from_json(doc: dict | str) -> np.ndarray:
    if isinstance(doc, str):
        doc = json.loads(doc)
    n = int(doc["dim"])
    entries = np.asarray(doc["entries"], dtype=np.float64)
    if entries.shape != (n * n, 2):
        raise ValueError(f"expected {n * n} [re, im] pairs")
    rho = (entries[:, 0] + 1j * entries[:, 1]).reshape(n, n)
    return check_density(rho, tol=1e-8)


def ket(bits: str) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=np.complex128)
    v[int(bits, 2)] = 1.0
    return v


def bell_vector(which: str) -> np.ndarray:
    try:
        return np.asarray(_BELL[which.lower()], dtype=np.complex128) / _S2
    except KeyError:
        raise ValueError(f"unknown Bell state {which!r}") from None


def bell_state(which: str) -> np.ndarray:
    v = bell_vector(which)
    return np.outer(v, v.conj())


def r_state(p: float, sign: int = +1) -> np.ndarray:
    """p |Psi+-><Psi+-| + (1 - p) |11><11|."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    psi = bell_state("psi+" if sign > 0 else "psi-")
    return p * psi + (1 - p) * np.diag([0, 0, 0, 1]).astype(np.complex128)


def rho_s(p: float) -> np.ndarray:
    """p |Psi+><Psi+| + (1 - p) |01><01|."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return p * bell_state("psi+") + (1 - p) * np.diag([0, 1, 0, 0]).astype(np.complex128)


def paper_test_states() -> tuple[np.ndarray, np.ndarray]:
    """The two fixed test states: rho_star (FEF 0.5) and rho_star_ab (low-FEF entangled)."""
    rho_star = 0.5 * np.array(
        [
            [0, 0, 0, 0],
            [0, 3 - 2 * _S2, 1 - _S2, 0],
            [0, 1 - _S2, 1, 0],
            [0, 0, 0, 2 * _S2 - 2],
        ],
        dtype=np.complex128,
    )
    rho_star_ab = np.array(
        [
            [0.30, -0.11, 0.19, 0.14],
            [-0.11, 0.24, -0.11, 0.15],
            [0.19, -0.11, 0.14, 0.03],
            [0.14, 0.15, 0.03, 0.32],
        ],
        dtype=np.complex128,
    )
    return check_density(rho_star), check_density(rho_star_ab)


def fidelity_with_pure(rho, psi) -> float:
    """<psi|rho|psi>; ``psi`` may be a state vector or a rank-1 projector."""
    rho = as_cmatrix(rho)
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.ndim == 1:
        v = psi / np.linalg.norm(psi)
        proj = np.outer(v, v.conj())
    else:
        proj = psi
        if (hermiticity_error(proj) > 1e-10 or np.max(np.abs(proj @ proj - proj)) > 1e-10
                or abs(np.trace(proj) - 1) > 1e-10):
            raise ValueError("psi is not a rank-1 projector")
    if proj.shape != rho.shape:
        raise ValueError("dimension mismatch")
    return float(np.trace(rho @ proj).real)


def _require_two_qubit(rho) -> np.ndarray:
    rho = as_cmatrix(rho)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a two-qubit (4x4) state, got {rho.shape}")
    return rho


def fef(rho) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Fully entangled fraction and local unitaries (U_a, U_b) attaining it.

    The maximum of <Phi+|(U_a^H (x) U_b^H) rho (U_a (x) U_b)|Phi+> equals the
    largest eigenvalue of Re(B^H rho B) with B the magic basis, because the
    maximally entangled states are exactly the real combinations of magic
    vectors (up to a global phase).
    """
    rho = _require_two_qubit(rho)
    m = MAGIC_BASIS.conj().T @ rho @ MAGIC_BASIS
    vals, vecs = np.linalg.eigh(m.real)
    phi = MAGIC_BASIS @ vecs[:, -1]
    # |Phi> = (I (x) U)|Phi+>  <=>  U = sqrt(2) C^T with C the coefficient matrix
    u_b = _S2 * phi.reshape(2, 2).T
    return float(vals[-1]), (np.eye(2, dtype=np.complex128), u_b)


def fef_value(rho) -> float:
    return fef(rho)[0]


def concurrence(rho) -> float:
    """Wootters concurrence max(0, l1 - l2 - l3 - l4)."""
    rho = _require_two_qubit(rho)
    flipped = _SIGMA_YY @ rho.conj() @ _SIGMA_YY
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    r = root @ flipped @ root
    lam = np.sqrt(np.clip(np.linalg.eigvalsh(0.5 * (r + r.conj().T)), 0, None))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def random_density_matrix(dim: int, rng: np.random.Generator, real: bool = False) -> np.ndarray:
    """Hilbert-Schmidt (square Wishart) ensemble: G G^H / Tr[G G^H]."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    g = rng.standard_normal((dim, dim))
    if not real:
        g = g + 1j * rng.standard_normal((dim, dim))
    w = g @ g.conj().T
    return np.asarray(w / np.trace(w).real, dtype=np.complex128)


def sample_weakly_entangled(count: int, rng: np.random.Generator, entangled: bool = True,
                            fef_below: float = 0.5, real_valued: bool = False,
                            budget: int = 10**6) -> list[np.ndarray]:
    """Rejection-sample two-qubit Wishart states with FEF below a threshold."""
    if count < 1:
        raise ValueError("count must be >= 1")
    found = []
    for _ in range(budget):
        rho = random_density_matrix(4, rng, real=real_valued)
        if entangled and concurrence(rho) <= 1e-6:
            continue
        if fef_value(rho) >= fef_below:
            continue
        found.append(rho)
        if len(found) == count:
            return found
    raise SamplingBudgetError(f"only {len(found)} of {count} states found in {budget} draws")


def amplitude_damping_kraus(gamma: float) -> np.ndarray:
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    return np.array(
        [
            [[1, 0], [0, np.sqrt(1 - gamma)]],
            [[0, np.sqrt(gamma)], [0, 0]],
        ],
        dtype=np.complex128,
    )


def amplitude_damping_local(gamma: float, side: str = "B") -> LocalChannel:
    """Amplitude damping on one qubit, identity on the other."""
    damp = amplitude_damping_kraus(gamma)
    ident = [np.eye(2)]
    if side.upper() == "A":
        return LocalChannel.from_kraus(damp, ident)
    if side.upper() == "B":
        return LocalChannel.from_kraus(ident, damp)
    raise ValueError("side must be 'A' or 'B'")


def best_amplitude_damping(rho, gammas=None) -> tuple[float, float, str]:
    """Grid search of one-sided damping maximizing the output FEF: (fef, gamma, side)."""
    if gammas is None:
        gammas = np.linspace(0.0, 1.0, 10001)
    best = (-np.inf, 0.0, "A")
    for side in ("A", "B"):
        for g in gammas:
            value = fef_value(apply_local_channel(amplitude_damping_local(g, side), rho))
            if value > best[0]:
                best = (value, float(g), side)
    return best

