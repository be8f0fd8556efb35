"""Magnitude pruning on a cubic polynomial-decay sparsity schedule.

Sparsity ramps from 50% to 80% as ``s(t) = s_f + (s_i - s_f)(1 - t/n)^3``.
At each step weights are ranked by absolute magnitude across all
prunable tensors; everything below the s(t)-quantile of |W| is zeroed.
Masks persist through fine-tuning so pruned weights stay dead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch


@dataclass(frozen=True)
class PruneSchedule:
    s_initial: float = 0.50
    s_final: float = 0.80
    n_steps: int = 4
    fine_tune_epochs_per_step: int = 1

    def __post_init__(self):
        if not 0.0 <= self.s_initial <= self.s_final < 1.0:
            raise ValueError("need 0 <= s_initial <= s_final < 1")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")


def sparsity_at_step(step: int | float, schedule: PruneSchedule) -> float:
    """Target sparsity at pruning step ``step`` in [0, n_steps]."""
    if not 0 <= step <= schedule.n_steps:
        raise ValueError("step must lie in [0, n_steps]")
    frac = 1.0 - step / schedule.n_steps
    return schedule.s_final + (schedule.s_initial - schedule.s_final) * frac**3


def _flat_abs(tensors: list[torch.Tensor]) -> np.ndarray:
    return np.concatenate(
        [t.detach().abs().reshape(-1).cpu().numpy() for t in tensors]
    )


def global_magnitude_masks(
    tensors: list[torch.Tensor], target_sparsity: float
) -> list[torch.Tensor]:
    """Boolean keep-masks zeroing all weights below the global
    ``target_sparsity``-quantile of |W|."""
    if not 0.0 <= target_sparsity < 1.0:
        raise ValueError("target_sparsity must lie in [0, 1)")
    threshold = float(np.quantile(_flat_abs(tensors), target_sparsity))
    return [(t.detach().abs() >= threshold) for t in tensors]


def apply_masks(tensors: list[torch.Tensor], masks: list[torch.Tensor]) -> None:
    """Zero masked-out entries in place (no grad tracking)."""
    with torch.no_grad():
        for t, m in zip(tensors, masks):
            t.mul_(m.to(t.dtype))


def achieved_sparsity(tensors: list[torch.Tensor]) -> float:
    total = sum(t.numel() for t in tensors)
    nonzero = sum(int((t != 0).sum()) for t in tensors)
    return 1.0 - nonzero / total


def prune_step(
    weights: torch.Tensor | list[torch.Tensor],
    step: int,
    schedule: PruneSchedule,
) -> tuple[list[torch.Tensor], float]:
    """One pruning event: mask to the step's target sparsity.

    Returns the masked weight tensors and the achieved sparsity, which
    lands within 0.5% of the target for weights without heavy ties.
    """
    tensors = [weights] if isinstance(weights, torch.Tensor) else list(weights)
    target = sparsity_at_step(step, schedule)
    masks = global_magnitude_masks(tensors, target)
    masked = [t * m.to(t.dtype) for t, m in zip(tensors, masks)]
    return masked, achieved_sparsity(masked)
