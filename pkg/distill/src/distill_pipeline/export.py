"""Writers for the artifacts the back-end package ingests.

The FMAP container layout is written here byte for byte (magic ``FMAP``,
version u16, dtype u8, reserved u8, n_classes u32, n_samples u64,
n_features u64, little-endian; u16 labels; row-major float32 data);
interop tests parse these files with the consumer package.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

_HEADER = struct.Struct("<4sHBBIQQ")
_MAGIC = b"FMAP"
_VERSION = 1
_DTYPE_F32 = 0


def _atomic_write(path: str | os.PathLike, payload: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_fmap_f32(
    features: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    path: str | os.PathLike,
) -> None:
    """Write a float32 feature-map set in the FMAP wire format."""
    features = np.ascontiguousarray(features, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if features.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    if labels.shape[0] != features.shape[0]:
        raise ValueError(
            f"{labels.shape[0]} labels for {features.shape[0]} samples"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    if n_classes > 0xFFFF:
        raise ValueError("labels are stored as u16; too many classes")
    header = _HEADER.pack(
        _MAGIC, _VERSION, _DTYPE_F32, 0, n_classes, features.shape[0], features.shape[1]
    )
    payload = header + labels.astype("<u2").tobytes() + features.astype("<f4").tobytes()
    _atomic_write(path, payload)


def write_arch_json(descriptor: dict, path: str | os.PathLike) -> None:
    """Architecture descriptor consumed by the cost-model tooling."""
    _atomic_write(path, (json.dumps(descriptor, indent=2) + "\n").encode())


def write_manifest(manifest: dict, path: str | os.PathLike) -> None:
    """Run manifest: seeds, hyperparameters, achieved sparsity, metrics."""
    _atomic_write(path, (json.dumps(manifest, indent=2) + "\n").encode())
