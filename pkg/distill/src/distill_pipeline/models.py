"""Teacher and student architectures.

The teacher is a three-stage residual network starting at 16 channels
and doubling per stage, ending in global average pooling and one
classifier layer.  The student is a compact all-convolutional feature
extractor (32 -> 128 -> 256 filters, batch-norm and max-pooling after
the first two convs, then a 16-filter reduction conv) whose flattened
penultimate activations are the 784-wide feature maps consumed by the
template-matching back-end; its softmax classifier head exists only for
training and is the layer the back-end replaces.
"""

from __future__ import annotations

import torch
from torch import nn

N_FEATURES = 784  # 7 x 7 x 16 after the reduction conv
N_CLASSES = 10

# output geometry / kernel / channels per student conv, for cost accounting
STUDENT_LAYER_SPECS = (
    {"h_out": 32, "w_out": 32, "k_h": 3, "k_w": 3, "c_in": 1, "c_out": 32},
    {"h_out": 16, "w_out": 16, "k_h": 3, "k_w": 3, "c_in": 32, "c_out": 128},
    {"h_out": 8, "w_out": 8, "k_h": 3, "k_w": 3, "c_in": 128, "c_out": 256},
    {"h_out": 7, "w_out": 7, "k_h": 2, "k_w": 2, "c_in": 256, "c_out": 16},
)

# multiplies + bias adds of the dropped classifier head (784 x 10 + 10)
REMOVED_HEAD_OPS = N_FEATURES * N_CLASSES + N_CLASSES


def student_arch_descriptor() -> dict:
    """Conv layer list plus declared totals, as written to arch.json."""
    total = sum(
        s["h_out"] * s["w_out"] * s["k_h"] * s["k_w"] * s["c_in"] * s["c_out"]
        for s in STUDENT_LAYER_SPECS
    )
    return {
        "layers": [dict(s) for s in STUDENT_LAYER_SPECS],
        "total_macs": total,
        "removed_head_ops": REMOVED_HEAD_OPS,
        "n_features": N_FEATURES,
    }


class StudentNet(nn.Module):
    """Compact all-conv feature extractor with a detachable softmax head."""

    def __init__(self, n_classes: int = N_CLASSES):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 32, 3, padding=1)
        self.bn1 = nn.BatchNorm2d(32)
        self.conv2 = nn.Conv2d(32, 128, 3, padding=1)
        self.bn2 = nn.BatchNorm2d(128)
        self.conv3 = nn.Conv2d(128, 256, 3, padding=1)
        self.reduce = nn.Conv2d(256, 16, 2)  # 8x8 -> 7x7, 784 flat features
        self.pool = nn.MaxPool2d(2)
        self.relu = nn.ReLU()
        self.head = nn.Linear(N_FEATURES, n_classes)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Flattened penultimate activations, shape (batch, 784)."""
        x = self.pool(self.relu(self.bn1(self.conv1(x))))
        x = self.pool(self.relu(self.bn2(self.conv2(x))))
        x = self.relu(self.conv3(x))
        x = self.relu(self.reduce(x))
        return x.flatten(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))

    def prunable_weights(self) -> list[nn.Parameter]:
        """Weight tensors subject to magnitude pruning (biases excluded).

        The classifier head is exempt: it is the layer the back-end
        replaces at deployment, and its small weights would otherwise be
        wiped out by the global magnitude ranking.
        """
        return [
            self.conv1.weight,
            self.conv2.weight,
            self.conv3.weight,
            self.reduce.weight,
        ]


class _ResidualBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.relu = nn.ReLU()
        if stride != 1 or c_in != c_out:
            self.shortcut = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, stride=stride, bias=False),
                nn.BatchNorm2d(c_out),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


class TeacherNet(nn.Module):
    """Three-stage residual network: 16 -> 32 -> 64 channels, GAP head."""

    def __init__(self, n_classes: int = N_CLASSES, blocks_per_stage: int = 2):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(1, 16, 3, padding=1, bias=False), nn.BatchNorm2d(16), nn.ReLU()
        )
        stages = []
        c_in = 16
        for stage, c_out in enumerate((16, 32, 64)):
            for b in range(blocks_per_stage):
                stride = 2 if stage > 0 and b == 0 else 1
                stages.append(_ResidualBlock(c_in, c_out, stride))
                c_in = c_out
        self.stages = nn.Sequential(*stages)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc = nn.Linear(64, n_classes)

    def forward(self, x):
        x = self.stages(self.stem(x))
        return self.fc(self.pool(x).flatten(1))
