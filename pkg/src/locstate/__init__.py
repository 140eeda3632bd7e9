"""Optimization of locality-constrained quantum channels on Stiefel manifolds.

Local channels are parametrized by stacked Kraus operators of each party;
objectives (expectation values, state distances, post-selected fidelities)
are ascended with alternating projected-gradient steps.  The distillation
module builds two entanglement distillation pipelines on top.
"""
from .channels import (
    KrausSet,
    LocalChannel,
    PostSelectionError,
    Selector,
    apply_channel,
    apply_local_channel,
    apply_postselected,
)
from .distillation import approach1, approach2, batch_experiment, epl, epl_reference
from .objectives import DistanceObjective, ExpectationObjective, PostselectedObjective
from .optimizer import OptimizationError, OptimizerConfig, ascend_local, ascend_nonlocal, multi_restart
from .qinfo import concurrence, fef, fef_value, paper_test_states, r_state, rho_s

__all__ = [
    "KrausSet", "LocalChannel", "PostSelectionError", "Selector", "apply_channel",
    "apply_local_channel", "apply_postselected", "approach1", "approach2", "batch_experiment",
    "epl", "epl_reference", "DistanceObjective", "ExpectationObjective", "PostselectedObjective",
    "OptimizationError", "OptimizerConfig", "ascend_local", "ascend_nonlocal", "multi_restart",
    "concurrence", "fef", "fef_value", "paper_test_states", "r_state", "rho_s",
]
