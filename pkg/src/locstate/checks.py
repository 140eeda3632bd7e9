"""Fast invariant suite behind the ``validate`` command."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channels import LocalChannel
from .distillation import epl, epl_reference
from .objectives import (
    DistanceObjective,
    ExpectationObjective,
    PostselectedObjective,
    project_factor_a,
    project_factor_b,
    projector,
    r_state_observables,
)
from .optimizer import random_local_channel
from .qinfo import bell_state, ket, random_density_matrix, r_state
from .stiefel import project_to_tangent, random_point, real_hs_inner, retract, stiefel_error, tangency_error


@dataclass
class Check:
    name: str
    passed: bool
    detail: float


def _raw_step(s, step):
    return s + step


def _basis_sum_b(g, c: LocalChannel) -> np.ndarray:
    """Least-squares factor for S_B, summed over the real basis of the S_B space."""
    n, l = c.s_b.shape
    out = np.zeros((n, l), dtype=np.complex128)
    for r in range(n):
        for s in range(l):
            for phase in (1.0, 1j):
                e = np.zeros((n, l), dtype=np.complex128)
                e[r, s] = phase
                out += real_hs_inner(np.kron(c.s_a, e), g) * e
    return out / np.vdot(c.s_a, c.s_a).real


def _basis_sum_a(g, c: LocalChannel) -> np.ndarray:
    n, l = c.s_a.shape
    out = np.zeros((n, l), dtype=np.complex128)
    for r in range(n):
        for s in range(l):
            for phase in (1.0, 1j):
                e = np.zeros((n, l), dtype=np.complex128)
                e[r, s] = phase
                out += real_hs_inner(np.kron(e, c.s_b), g) * e
    return out / np.vdot(c.s_b, c.s_b).real


def _geometry(rng, retraction: Callable) -> list[Check]:
    s = random_point(64, 4, rng)
    x = rng.normal(size=s.shape) + 1j * rng.normal(size=s.shape)
    t = project_to_tangent(s, x)
    moved = retraction(s, 0.1 * t)
    return [
        Check("projection_annihilates_point", *_le(np.abs(project_to_tangent(s, s)).max(), 1e-12)),
        Check("projection_is_tangent", *_le(tangency_error(s, t), 1e-10)),
        Check("projection_idempotent", *_le(np.abs(project_to_tangent(s, t) - t).max(), 1e-12)),
        Check("retraction_feasible", *_le(stiefel_error(moved), 1e-12)),
    ]


def _factor_projections(rng) -> list[Check]:
    worst = 0.0
    for _ in range(3):
        c = random_local_channel((2, 2), rng)
        g = rng.normal(size=(64, 4)) + 1j * rng.normal(size=(64, 4))
        worst = max(worst,
                    np.abs(project_factor_b(g, c) - _basis_sum_b(g, c)).max(),
                    np.abs(project_factor_a(g, c) - _basis_sum_a(g, c)).max())
    return [Check("factor_projection_basis_sum", *_le(worst, 1e-12))]


def _directional_fd(objective, c: LocalChannel, rng, h: float = 1e-6) -> float:
    """Relative error between analytic and central-difference directional derivatives."""
    g = objective.gradient(c)
    da = project_to_tangent(c.s_a, rng.normal(size=c.s_a.shape) + 1j * rng.normal(size=c.s_a.shape))
    db = project_to_tangent(c.s_b, rng.normal(size=c.s_b.shape) + 1j * rng.normal(size=c.s_b.shape))
    analytic = real_hs_inner(g, np.kron(da, c.s_b) + np.kron(c.s_a, db))
    plus = LocalChannel(retract(c.s_a, h * da), retract(c.s_b, h * db))
    minus = LocalChannel(retract(c.s_a, -h * da), retract(c.s_b, -h * db))
    numeric = (objective.value(plus) - objective.value(minus)) / (2 * h)
    return abs(analytic - numeric) / max(abs(numeric), 1e-8)


def _gradients(rng) -> list[Check]:
    rho = random_density_matrix(4, rng)
    objectives = {
        "expectation": ExpectationObjective(projector(ket("00")), rho),
        "distance": DistanceObjective(r_state_observables(+1), rho, r_state(0.4, +1)),
        "postselected": PostselectedObjective(bell_state("psi+"), [0], rho),
    }
    checks = []
    for name, obj in objectives.items():
        worst = max(_directional_fd(obj, random_local_channel((2, 2), rng), rng) for _ in range(3))
        checks.append(Check(f"gradient_fd_{name}", *_le(worst, 1e-5)))
    return checks


def _epl(rng) -> list[Check]:
    worst = 0.0
    for _ in range(5):
        rho = random_density_matrix(4, rng)
        fast = epl(rho)
        tau, prob = epl_reference(rho)
        worst = max(worst, abs(prob - fast.success_prob),
                    np.abs(tau / prob - fast.output_state).max())
    return [Check("epl_matches_reference", *_le(worst, 1e-12))]


def _le(value: float, bound: float) -> tuple[bool, float]:
    value = float(value)
    return bool(value <= bound), value


def run_checks(seed: int = 0, break_retraction: bool = False) -> list[Check]:
    """Run every check; ``break_retraction`` swaps in a raw additive step as a negative control."""
    rng = np.random.default_rng(seed)
    retraction = _raw_step if break_retraction else retract
    return _geometry(rng, retraction) + _factor_projections(rng) + _gradients(rng) + _epl(rng)
