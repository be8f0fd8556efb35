"""Training pipeline that produces real feature maps for the back-end classifier.

Grayscale image prep, teacher/student training with knowledge
distillation and curriculum ordering, polynomial-decay magnitude
pruning, 8-bit quantization-aware training, and export of
penultimate-layer feature maps in the FMAP wire format consumed by the
``acam-edge`` package.
"""

from .data import grayscale, load_cifar10, load_dataset, normalize01, synthetic_images
from .kd import KDConfig, difficulty_scores, difficulty_sort, kd_loss, softmax_t
from .models import STUDENT_LAYER_SPECS, StudentNet, TeacherNet, student_arch_descriptor
from .prune import PruneSchedule, apply_masks, global_magnitude_masks, prune_step, sparsity_at_step
from .qat import enable_weight_qat, fake_quantize8
from .export import save_fmap_f32, write_arch_json, write_manifest
from .train import RunConfig, train_and_export

__version__ = "0.1.0"

__all__ = [
    "KDConfig",
    "PruneSchedule",
    "RunConfig",
    "STUDENT_LAYER_SPECS",
    "StudentNet",
    "TeacherNet",
    "apply_masks",
    "difficulty_scores",
    "difficulty_sort",
    "enable_weight_qat",
    "fake_quantize8",
    "global_magnitude_masks",
    "grayscale",
    "kd_loss",
    "load_cifar10",
    "load_dataset",
    "normalize01",
    "prune_step",
    "save_fmap_f32",
    "softmax_t",
    "sparsity_at_step",
    "student_arch_descriptor",
    "synthetic_images",
    "train_and_export",
    "write_arch_json",
    "write_manifest",
]
