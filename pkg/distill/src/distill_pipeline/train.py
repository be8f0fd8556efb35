"""Desk-scale training pipeline: teacher, distilled student, pruning, QAT,
and feature-map export.

Stages run in the published order: train the teacher, sort the training
set by teacher difficulty (curriculum, applied once), distill into the
student, ramp magnitude pruning 50% -> 80% on the cubic schedule with
fine-tuning between steps, adapt to 8-bit weights, then export the
student's 784-wide penultimate feature maps for both splits.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch.nn.utils import parametrize

from .data import load_dataset
from .export import save_fmap_f32, write_arch_json, write_manifest
from .kd import KDConfig, difficulty_sort, kd_loss
from .models import N_FEATURES, StudentNet, TeacherNet, student_arch_descriptor
from .prune import (
    PruneSchedule,
    achieved_sparsity,
    apply_masks,
    global_magnitude_masks,
    sparsity_at_step,
)
from .qat import enable_weight_qat


@dataclass(frozen=True)
class RunConfig:
    dataset: str = "synthetic"
    data_dir: str | None = None
    train_per_class: int = 200
    test_per_class: int = 50
    teacher_epochs: int = 3
    teacher_blocks: int = 1
    kd: KDConfig = field(default_factory=KDConfig)
    prune: PruneSchedule = field(default_factory=PruneSchedule)
    qat_epochs: int = 1
    curriculum: bool = True
    seed: int = 0
    out_dir: str = "runs/latest"


def _check_finite(loss: torch.Tensor, stage: str, epoch: int) -> None:
    if not bool(torch.isfinite(loss)):
        raise RuntimeError(
            f"training diverged: non-finite loss {loss.item()!r} "
            f"during {stage}, epoch {epoch}"
        )


def _batches(n: int, batch_size: int, rng: np.random.Generator | None):
    """Index batches; shuffled when a generator is given, in order otherwise."""
    order = np.arange(n) if rng is None else rng.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i : i + batch_size]


CURRICULUM_START_FRAC = 0.4


def _curriculum_pool(n: int, epoch: int, epochs: int) -> int:
    """Admitted-pool size for easiest-first data: grows linearly from
    CURRICULUM_START_FRAC of the samples to all of them by the last epoch.

    Batches are shuffled inside the pool, so difficulty gates when a
    sample enters training without freezing the batch order (strictly
    sequential epochs degenerate when difficulty correlates with class).
    """
    if epochs <= 1:
        return n
    frac = CURRICULUM_START_FRAC + (1.0 - CURRICULUM_START_FRAC) * epoch / (epochs - 1)
    return max(1, min(n, int(round(frac * n))))


def _prunable(student: StudentNet) -> list[torch.Tensor]:
    """Trainable conv weight tensors, resolving QAT parametrization originals."""
    modules = (student.conv1, student.conv2, student.conv3, student.reduce)
    out = []
    for m in modules:
        if parametrize.is_parametrized(m, "weight"):
            out.append(m.parametrizations.weight.original)
        else:
            out.append(m.weight)
    return out


def train_teacher(
    teacher: TeacherNet,
    images: np.ndarray,
    labels: np.ndarray,
    epochs: int,
    batch_size: int = 64,
    lr: float = 1e-3,
    seed: int = 0,
) -> list[float]:
    """Plain cross-entropy training; returns per-epoch mean losses."""
    rng = np.random.default_rng(seed)
    optimizer = torch.optim.Adam(teacher.parameters(), lr=lr)
    x_all = torch.as_tensor(images, dtype=torch.float32).unsqueeze(1)
    y_all = torch.as_tensor(labels, dtype=torch.long)
    history = []
    teacher.train()
    for epoch in range(epochs):
        losses = []
        for idx in _batches(len(y_all), batch_size, rng):
            optimizer.zero_grad()
            loss = F.cross_entropy(teacher(x_all[idx]), y_all[idx])
            _check_finite(loss, "teacher training", epoch)
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        history.append(float(np.mean(losses)))
    return history


def train_student_kd(
    student: StudentNet,
    teacher: TeacherNet,
    images: np.ndarray,
    labels: np.ndarray,
    cfg: KDConfig,
    epochs: int | None = None,
    masks: list[torch.Tensor] | None = None,
    stage: str = "distillation",
    curriculum: bool = False,
) -> list[float]:
    """Distill the teacher into the student.

    With ``curriculum`` on, ``images`` must already be sorted
    easiest-first; each epoch shuffles within a growing easiest prefix.
    ``masks``, when given, are re-applied after every optimizer step so
    pruned weights stay zero.
    """
    rng = np.random.default_rng(cfg.seed)
    optimizer = torch.optim.Adam(student.parameters(), lr=cfg.lr)
    x_all = torch.as_tensor(images, dtype=torch.float32).unsqueeze(1)
    y_all = torch.as_tensor(labels, dtype=torch.long)
    teacher.eval()
    student.train()
    history = []
    n_epochs = epochs if epochs is not None else cfg.epochs
    for epoch in range(n_epochs):
        pool = _curriculum_pool(len(y_all), epoch, n_epochs) if curriculum else len(y_all)
        losses = []
        for idx in _batches(pool, cfg.batch_size, rng):
            with torch.no_grad():
                teacher_logits = teacher(x_all[idx])
            optimizer.zero_grad()
            loss = kd_loss(student(x_all[idx]), teacher_logits, y_all[idx], cfg)
            _check_finite(loss, stage, epoch)
            loss.backward()
            optimizer.step()
            if masks is not None:
                apply_masks(_prunable(student), masks)
            losses.append(loss.item())
        history.append(float(np.mean(losses)))
    return history


def evaluate_accuracy(
    model: torch.nn.Module, images: np.ndarray, labels: np.ndarray, batch_size: int = 256
) -> float:
    model.eval()
    x_all = torch.as_tensor(images, dtype=torch.float32).unsqueeze(1)
    correct = 0
    with torch.no_grad():
        for i in range(0, len(images), batch_size):
            preds = model(x_all[i : i + batch_size]).argmax(dim=1).numpy()
            correct += int((preds == labels[i : i + batch_size]).sum())
    return correct / len(labels)


def export_features(
    student: StudentNet,
    images: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    path: str,
    batch_size: int = 256,
) -> np.ndarray:
    """Run the feature extractor and write the FMAP file; returns features."""
    student.eval()
    x_all = torch.as_tensor(images, dtype=torch.float32).unsqueeze(1)
    blocks = []
    with torch.no_grad():
        for i in range(0, len(images), batch_size):
            blocks.append(student.features(x_all[i : i + batch_size]).numpy())
    features = np.concatenate(blocks).astype(np.float32)
    save_fmap_f32(features, labels, n_classes, path)
    return features


def train_and_export(cfg: RunConfig) -> dict:
    """Run the full pipeline and write train.fmap, test.fmap, arch.json,
    and manifest.json into ``cfg.out_dir``; returns the manifest."""
    torch.manual_seed(cfg.seed)
    data = load_dataset(
        cfg.dataset,
        data_dir=cfg.data_dir,
        train_per_class=cfg.train_per_class,
        test_per_class=cfg.test_per_class,
        seed=cfg.seed,
    )
    train_images, train_labels = data["train_images"], data["train_labels"]
    test_images, test_labels = data["test_images"], data["test_labels"]
    n_classes = data["n_classes"]

    teacher = TeacherNet(n_classes=n_classes, blocks_per_stage=cfg.teacher_blocks)
    teacher_history = train_teacher(
        teacher, train_images, train_labels,
        epochs=cfg.teacher_epochs, batch_size=cfg.kd.batch_size,
        lr=cfg.kd.lr, seed=cfg.seed,
    )
    teacher_acc = evaluate_accuracy(teacher, test_images, test_labels)

    if cfg.curriculum:
        train_images, train_labels, _ = difficulty_sort(
            train_images, train_labels, teacher
        )

    student = StudentNet(n_classes=n_classes)
    kd_history = train_student_kd(
        student, teacher, train_images, train_labels, cfg.kd,
        curriculum=cfg.curriculum,
    )

    sparsity_targets, masks = [], None
    for step in range(cfg.prune.n_steps + 1):
        masks = global_magnitude_masks(
            _prunable(student), sparsity_at_step(step, cfg.prune)
        )
        apply_masks(_prunable(student), masks)
        sparsity_targets.append(sparsity_at_step(step, cfg.prune))
        if step < cfg.prune.n_steps and cfg.prune.fine_tune_epochs_per_step:
            train_student_kd(
                student, teacher, train_images, train_labels, cfg.kd,
                epochs=cfg.prune.fine_tune_epochs_per_step,
                masks=masks, stage=f"prune fine-tune step {step}",
            )

    if cfg.qat_epochs:
        enable_weight_qat(student)
        apply_masks(_prunable(student), masks)
        train_student_kd(
            student, teacher, train_images, train_labels, cfg.kd,
            epochs=cfg.qat_epochs, masks=masks, stage="8-bit adaptation",
        )

    final_sparsity = achieved_sparsity(_prunable(student))
    student_acc = evaluate_accuracy(student, test_images, test_labels)

    os.makedirs(cfg.out_dir, exist_ok=True)
    train_path = os.path.join(cfg.out_dir, "train.fmap")
    test_path = os.path.join(cfg.out_dir, "test.fmap")
    arch_path = os.path.join(cfg.out_dir, "arch.json")
    train_features = export_features(
        student, train_images, train_labels, n_classes, train_path
    )
    export_features(student, test_images, test_labels, n_classes, test_path)
    write_arch_json(student_arch_descriptor(), arch_path)

    manifest = {
        "dataset": data["name"],
        "seed": cfg.seed,
        "hyperparameters": {
            "teacher_epochs": cfg.teacher_epochs,
            "teacher_blocks": cfg.teacher_blocks,
            "kd": asdict(cfg.kd),
            "prune": asdict(cfg.prune),
            "qat_epochs": cfg.qat_epochs,
            "curriculum": cfg.curriculum,
        },
        "sparsity_targets": sparsity_targets,
        "achieved_sparsity": final_sparsity,
        "n_features": int(train_features.shape[1]),
        "teacher_test_accuracy": teacher_acc,
        "student_test_accuracy": student_acc,
        "teacher_loss_history": teacher_history,
        "student_loss_history": kd_history,
        "files": {
            "train": train_path,
            "test": test_path,
            "arch": arch_path,
        },
    }
    write_manifest(manifest, os.path.join(cfg.out_dir, "manifest.json"))
    assert train_features.shape[1] == N_FEATURES
    return manifest
