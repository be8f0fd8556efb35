"""Knowledge-distillation loss and curriculum ordering.

The composite loss balances a temperature-softened KL term against
plain cross-entropy:

    L = alpha * T^2 * KL(softmax(z_s/T) || softmax(z_t/T))
        + (1 - alpha) * CE(z_s, y)

The T^2 factor keeps gradient magnitudes roughly constant across
temperatures.  Curriculum ordering sorts training samples by the
teacher's own cross-entropy, easiest first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class KDConfig:
    alpha_kd: float = 0.5
    temperature: float = 4.0
    epochs: int = 3
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha_kd <= 1.0:
            raise ValueError("alpha_kd must lie in [0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def softmax_t(logits: torch.Tensor, temperature: float) -> torch.Tensor:
    """Temperature-softened softmax."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return F.softmax(logits / temperature, dim=-1)


def kd_loss(
    student_logits: torch.Tensor,
    teacher_logits: torch.Tensor,
    labels: torch.Tensor,
    cfg: KDConfig,
) -> torch.Tensor:
    """Composite distillation loss (mean over the batch)."""
    if student_logits.shape != teacher_logits.shape:
        raise ValueError(
            f"logit shapes disagree: {tuple(student_logits.shape)} vs "
            f"{tuple(teacher_logits.shape)}"
        )
    if not bool(torch.isfinite(student_logits).all()) or not bool(
        torch.isfinite(teacher_logits).all()
    ):
        raise ValueError("logits must be finite")
    T = cfg.temperature
    log_p_s = F.log_softmax(student_logits / T, dim=-1)
    log_p_t = F.log_softmax(teacher_logits / T, dim=-1)
    p_s = log_p_s.exp()
    kl = (p_s * (log_p_s - log_p_t)).sum(dim=-1).mean()
    ce = F.cross_entropy(student_logits, labels)
    return cfg.alpha_kd * (T * T) * kl + (1.0 - cfg.alpha_kd) * ce


def difficulty_scores(teacher_logits: torch.Tensor, labels: torch.Tensor) -> np.ndarray:
    """Per-sample difficulty: the teacher's cross-entropy on that sample."""
    with torch.no_grad():
        scores = F.cross_entropy(teacher_logits, labels, reduction="none")
    return scores.double().cpu().numpy()


def difficulty_sort(
    images: np.ndarray,
    labels: np.ndarray,
    teacher: torch.nn.Module,
    batch_size: int = 256,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Order samples easiest-first by teacher loss; the sort is stable,
    so equal scores keep their original order.

    Returns (images, labels, order).
    """
    teacher.eval()
    scores = []
    with torch.no_grad():
        for i in range(0, len(images), batch_size):
            x = torch.as_tensor(images[i : i + batch_size], dtype=torch.float32)
            y = torch.as_tensor(labels[i : i + batch_size], dtype=torch.long)
            logits = teacher(x.unsqueeze(1))
            scores.append(difficulty_scores(logits, y))
    order = np.argsort(np.concatenate(scores), kind="stable")
    return images[order], labels[order], order
