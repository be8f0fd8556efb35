"""Quantization-aware training via 8-bit fake quantization of weights.

Weights are snapped to a symmetric per-tensor 8-bit grid in the forward
pass while the straight-through estimator keeps gradients flowing, so
the model adapts to reduced precision during training.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn.utils import parametrize

Q_LEVELS = 127  # symmetric int8 grid: -127 .. 127


def fake_quantize8(weight: torch.Tensor) -> torch.Tensor:
    """Snap to the 8-bit grid with a straight-through gradient."""
    scale = weight.detach().abs().max() / Q_LEVELS
    if scale == 0:
        return weight
    q = torch.clamp(torch.round(weight / scale), -Q_LEVELS, Q_LEVELS) * scale
    return weight + (q - weight).detach()


class _FakeQuant8(nn.Module):
    def forward(self, weight: torch.Tensor) -> torch.Tensor:
        return fake_quantize8(weight)


def enable_weight_qat(model: nn.Module) -> int:
    """Register fake quantization on every conv/linear weight.

    Returns the number of parametrized modules.
    """
    count = 0
    for module in model.modules():
        if isinstance(module, (nn.Conv2d, nn.Linear)):
            parametrize.register_parametrization(module, "weight", _FakeQuant8())
            count += 1
    return count


def disable_weight_qat(model: nn.Module) -> None:
    """Remove the parametrizations, baking quantized values into weights."""
    for module in model.modules():
        if parametrize.is_parametrized(module, "weight"):
            parametrize.remove_parametrizations(module, "weight", leave_parametrized=True)
