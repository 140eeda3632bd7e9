"""Projected gradient ascent/descent on Stiefel points and local channels."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernel
from .channels import LocalChannel, PostSelectionError
from .objectives import Objective, local_projected_gradients
from .stiefel import random_point

log = logging.getLogger(__name__)


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    step_a: float = 1e-3
    step_b: float = 1e-3
    tol: float = 1e-7
    max_iters: int = 200_000
    restarts: int = 8
    mode: str = "maximize"
    record_trajectory: bool = False
    trajectory_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (self.step_a > 0 and self.step_b > 0 and self.tol > 0):
            raise ValueError("step sizes and tol must be positive")
        if self.max_iters < 1 or self.restarts < 1 or self.trajectory_stride < 1:
            raise ValueError("max_iters, restarts and trajectory_stride must be >= 1")
        if self.mode not in ("maximize", "minimize"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def sign(self) -> float:
        return 1.0 if self.mode == "maximize" else -1.0

    def with_(self, **changes) -> "OptimizerConfig":
        return replace(self, **changes)


@dataclass
class Trajectory:
    """Samples (iteration, objective, fidelity, success probability)."""

    samples: np.ndarray = field(default_factory=lambda: np.empty((0, 4)))

    def __len__(self):
        return len(self.samples)

    @property
    def iterations(self) -> np.ndarray:
        return self.samples[:, 0].astype(np.int64)

    @property
    def objective(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def fidelity(self) -> np.ndarray:
        return self.samples[:, 2]

    @property
    def success_prob(self) -> np.ndarray:
        return self.samples[:, 3]


@dataclass
class OptimizationResult:
    best_point: object  # LocalChannel or ndarray
    best_value: float
    iterations_used: int
    converged: bool
    trajectory: Optional[Trajectory] = None
    restart_index: int = 0
    failed: bool = False


_STATUS_ERRORS = {
    _kernel.NON_FINITE: "objective became non-finite (step size too large?)",
    _kernel.RANK_DEFICIENT: "retraction hit a rank-deficient iterate",
    _kernel.INFEASIBLE: "iterate drifted off the Stiefel manifold",
}


def _check_status(status: int, objective: Objective):
    if status == _kernel.MEASURE_ZERO:
        raise PostSelectionError("post-selection probability vanished during optimization")
    if status in _STATUS_ERRORS:
        raise OptimizationError(_STATUS_ERRORS[status])


def _finish(status, best_point, best_value, iters, traj, dips, cfg, restart_index):
    if dips:
        log.debug("restart %d: %d objective dips larger than 10*tol", restart_index, dips)
    return OptimizationResult(
        best_point=best_point,
        best_value=float(best_value),
        iterations_used=int(iters),
        converged=status == _kernel.OK,
        trajectory=Trajectory(np.array(traj)) if cfg.record_trajectory else None,
        restart_index=restart_index,
    )


def ascend_nonlocal(objective: Objective, start, cfg: OptimizerConfig,
                    restart_index: int = 0) -> OptimizationResult:
    """Iterate S <- retract(S, +-alpha pi_S(G(S))) until the objective settles."""
    s = np.ascontiguousarray(start, dtype=np.complex128)
    _, best, best_val, iters, status, traj, dips = _kernel.ascend_nonlocal_loop(
        s, objective.rho, objective.blocks, objective.kind, objective.targets,
        cfg.step_a, cfg.sign, cfg.tol, cfg.max_iters,
        cfg.record_trajectory, cfg.trajectory_stride, 1000,
    )
    _check_status(status, objective)
    return _finish(status, best, best_val, iters, traj, dips, cfg, restart_index)


def ascend_local(objective: Objective, start: LocalChannel, cfg: OptimizerConfig,
                 restart_index: int = 0) -> OptimizationResult:
    """Alternate locality-preserving steps on S_A (step_a) and S_B (step_b).

    One iteration is a full (A, B) pair; the stopping rule compares the
    objective across consecutive pairs.
    """
    sa = np.ascontiguousarray(start.s_a)
    sb = np.ascontiguousarray(start.s_b)
    _, _, best_a, best_b, best_val, iters, status, traj, dips = _kernel.ascend_local_loop(
        sa, sb, objective.rho, objective.blocks, objective.kind, objective.targets,
        cfg.step_a, cfg.step_b, cfg.sign, cfg.tol, cfg.max_iters,
        cfg.record_trajectory, cfg.trajectory_stride, 1000,
    )
    _check_status(status, objective)
    return _finish(status, LocalChannel(best_a, best_b), best_val, iters, traj, dips,
                   cfg, restart_index)


def random_local_channel(dims: tuple[int, int], rng: np.random.Generator) -> LocalChannel:
    na, nb = dims
    return LocalChannel(random_point(na**3, na, rng), random_point(nb**3, nb, rng))


def _better(a: OptimizationResult, b: OptimizationResult, maximize: bool) -> bool:
    if a.best_value == b.best_value:
        return a.restart_index < b.restart_index
    return (a.best_value > b.best_value) == maximize


def multi_restart(objective: Objective, dims: tuple[int, int], cfg: OptimizerConfig,
                  warm_starts: Sequence[LocalChannel] = (),
                  on_result: Optional[Callable[[OptimizationResult], None]] = None,
                  ) -> OptimizationResult:
    """Best of ``cfg.restarts`` seeded random starts plus any warm starts.

    Random start ``r`` draws from ``default_rng(cfg.seed + r)``; warm starts
    follow with indices ``cfg.restarts, cfg.restarts + 1, ...``.  Runs whose
    post-selection collapses are skipped.
    """
    starts = [
        (r, random_local_channel(dims, np.random.default_rng(cfg.seed + r)))
        for r in range(cfg.restarts)
    ]
    starts += [(cfg.restarts + k, w) for k, w in enumerate(warm_starts)]
    best = None
    failures = []
    for index, start in starts:
        try:
            res = ascend_local(objective, start, cfg, restart_index=index)
        except (PostSelectionError, OptimizationError) as exc:
            log.info("restart %d abandoned: %s", index, exc)
            failures.append(exc)
            continue
        if on_result is not None:
            on_result(res)
        if best is None or _better(res, best, cfg.mode == "maximize"):
            best = res
    if best is None:
        raise OptimizationError(f"all {len(starts)} restarts failed: {failures[-1]}")
    return best


def projected_gradient_norm(objective: Objective, c: LocalChannel) -> float:
    """Norm of the locality-preserving ascent directions at ``c``."""
    step_a, step_b = local_projected_gradients(c, objective.gradient(c))
    return float(np.sqrt(np.linalg.norm(step_a) ** 2 + np.linalg.norm(step_b) ** 2))
