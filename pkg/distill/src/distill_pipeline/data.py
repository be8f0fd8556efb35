"""Dataset preparation: grayscale conversion, normalization, and loaders.

CIFAR-10 is read from a local copy of the standard python pickle
batches (this environment cannot download it).  A deterministic
synthetic 10-class grayscale task is provided so the full pipeline runs
end to end without external data.
"""

from __future__ import annotations

import os
import pickle
import tarfile

import numpy as np

GRAY_R, GRAY_G, GRAY_B = 0.2989, 0.5870, 0.1140


def grayscale(images: np.ndarray) -> np.ndarray:
    """Luminance plane of channels-last RGB data.

    ``Y = 0.2989 R + 0.5870 G + 0.1140 B``, keeping the input's value
    scale ([0, 255] or [0, 1]).
    """
    images = np.asarray(images, dtype=np.float64)
    if images.shape[-1] != 3:
        raise ValueError(f"expected channels-last RGB, got shape {images.shape}")
    return (
        GRAY_R * images[..., 0] + GRAY_G * images[..., 1] + GRAY_B * images[..., 2]
    )


def normalize01(images: np.ndarray) -> np.ndarray:
    """Scale [0, 255] pixel data to [0, 1] float32."""
    return (np.asarray(images, dtype=np.float32) / 255.0).astype(np.float32)


# ---------------------------------------------------------------------------
# CIFAR-10 (local files only)
# ---------------------------------------------------------------------------

_CIFAR_DIRNAME = "cifar-10-batches-py"


def _cifar_batch(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        entry = pickle.load(fh, encoding="bytes")
    data = entry[b"data"].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    return data, np.asarray(entry[b"labels"], dtype=np.int64)


def load_cifar10(root: str) -> dict:
    """Load the standard CIFAR-10 python batches from a local directory.

    ``root`` may be the extracted ``cifar-10-batches-py`` directory, its
    parent, or the distribution tarball.  Returns channels-last uint8
    images and integer labels for both splits.
    """
    root = os.fspath(root)
    if root.endswith((".tar.gz", ".tgz")):
        target = os.path.join(os.path.dirname(root), _CIFAR_DIRNAME)
        if not os.path.isdir(target):
            with tarfile.open(root) as tar:
                tar.extractall(os.path.dirname(root))
        root = target
    if os.path.isdir(os.path.join(root, _CIFAR_DIRNAME)):
        root = os.path.join(root, _CIFAR_DIRNAME)
    if not os.path.isfile(os.path.join(root, "test_batch")):
        raise FileNotFoundError(
            f"no CIFAR-10 batches under {root!r}; expected the "
            f"'{_CIFAR_DIRNAME}' python-version files"
        )
    train_parts = [
        _cifar_batch(os.path.join(root, f"data_batch_{i}")) for i in range(1, 6)
    ]
    test_images, test_labels = _cifar_batch(os.path.join(root, "test_batch"))
    return {
        "train_images": np.concatenate([p[0] for p in train_parts]),
        "train_labels": np.concatenate([p[1] for p in train_parts]),
        "test_images": test_images,
        "test_labels": test_labels,
        "n_classes": 10,
    }


# ---------------------------------------------------------------------------
# synthetic grayscale task
# ---------------------------------------------------------------------------


def synthetic_images(
    per_class: int,
    n_classes: int = 10,
    size: int = 32,
    noise: float = 0.25,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic 10-class grayscale task: oriented gratings plus a
    class-placed blob, under additive Gaussian noise.

    Returns float32 images in [0, 1], shape (n, size, size), and labels.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    images = np.empty((n_classes * per_class, size, size), dtype=np.float32)
    labels = np.repeat(np.arange(n_classes), per_class)
    for c in range(n_classes):
        theta = np.pi * c / n_classes
        freq = 2.0 + (c % 5)
        phase = 2 * np.pi * ((c * 37) % 11) / 11
        grating = np.sin(2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
        cx, cy = (0.2 + 0.6 * ((c * 3) % 7) / 6, 0.2 + 0.6 * ((c * 5) % 7) / 6)
        blob = np.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2) / 0.02))
        pattern = 0.5 + 0.25 * grating + 0.5 * blob
        block = pattern[None, :, :] + rng.normal(0.0, noise, size=(per_class, size, size))
        images[c * per_class : (c + 1) * per_class] = np.clip(block, 0.0, 1.0)
    return images, labels


def load_dataset(
    name: str,
    data_dir: str | None = None,
    train_per_class: int = 200,
    test_per_class: int = 50,
    seed: int = 0,
) -> dict:
    """One entry point for both data sources.

    Returns grayscale float32 images in [0, 1] (train/test) plus labels.
    CIFAR subsets are drawn per class with a seeded generator.
    """
    if name == "synthetic":
        train_images, train_labels = synthetic_images(
            train_per_class, seed=seed
        )
        test_images, test_labels = synthetic_images(
            test_per_class, seed=seed + 1
        )
        return {
            "train_images": train_images,
            "train_labels": train_labels,
            "test_images": test_images,
            "test_labels": test_labels,
            "n_classes": 10,
            "name": name,
        }
    if name == "cifar10":
        if data_dir is None:
            data_dir = os.environ.get("CIFAR_DIR", "")
        raw = load_cifar10(data_dir)
        rng = np.random.default_rng(seed)

        def subset(images, labels, per_class):
            keep = []
            for c in range(10):
                idx = np.nonzero(labels == c)[0]
                keep.append(rng.choice(idx, size=min(per_class, idx.size), replace=False))
            keep = np.concatenate(keep)
            return images[keep], labels[keep]

        tr_img, tr_lab = subset(raw["train_images"], raw["train_labels"], train_per_class)
        te_img, te_lab = subset(raw["test_images"], raw["test_labels"], test_per_class)
        return {
            "train_images": normalize01(grayscale(tr_img)),
            "train_labels": tr_lab,
            "test_images": normalize01(grayscale(te_img)),
            "test_labels": te_lab,
            "n_classes": 10,
            "name": name,
        }
    raise ValueError(f"unknown dataset {name!r}; use 'synthetic' or 'cifar10'")
