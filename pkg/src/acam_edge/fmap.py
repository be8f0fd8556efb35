"""Feature-map datasets, template banks, and their on-disk formats.

Two formats live here.  Feature maps use a compact binary layout (magic
``FMAP``) because datasets are large; template banks use a JSON document
because banks are small and benefit from being human-auditable.  Both are
versioned and loaders round-trip savers bit-exactly.
"""

from __future__ import annotations

import enum
import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

MAGIC = b"FMAP"
FORMAT_VERSION = 1
BANK_SCHEMA_VERSION = 1
MAX_CLASSES = 0xFFFF

_HEADER = struct.Struct("<4sHBBIQQ")  # magic, version, dtype, reserved, classes, samples, features


class FormatError(ValueError):
    """A file does not conform to the expected binary layout.

    ``offset`` is the byte position where parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TruncationError(FormatError):
    """A file's payload is shorter (or longer) than its header declares."""


class ValidationError(ValueError):
    """A document or in-memory value violates its schema.

    ``field`` names the offending field when one can be identified.
    """

    def __init__(self, message: str, field: str | None = None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class FmapDType(enum.IntEnum):
    """Value space of a feature-map matrix; the enum value is the wire code."""

    F32 = 0
    U8 = 1
    BIT = 2

    @property
    def numpy_dtype(self) -> np.dtype:
        return np.dtype(np.float32) if self is FmapDType.F32 else np.dtype(np.uint8)


class TemplateMode(str, enum.Enum):
    """How template bounds encode a class representative."""

    BINARY = "binary"  # degenerate windows, lower == upper in {0, 1}
    WINDOW = "window"  # per-feature [lower, upper] matching windows


class ThresholdMethod(str, enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"


# ---------------------------------------------------------------------------
# atomic writes
# ---------------------------------------------------------------------------


def atomic_write_bytes(path: str | os.PathLike, payload: bytes) -> None:
    """Write ``payload`` to ``path`` via a temp file + rename, so a failed
    write never leaves a partial file behind."""
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


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureMapSet:
    """Labeled collection of fixed-width feature vectors.

    ``data`` is a row-major (n_samples, n_features) matrix in the value
    space named by ``dtype``; BIT data is kept unpacked in memory (one
    uint8 per feature, values 0/1).  Instances are immutable after
    construction and safe for concurrent readers.
    """

    data: np.ndarray
    labels: np.ndarray
    n_classes: int
    dtype: FmapDType

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValidationError("expected a 2-D matrix", field="data")
        data = np.ascontiguousarray(data.astype(self.dtype.numpy_dtype, copy=False))
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != data.shape[0]:
            raise ValidationError(
                f"{labels.shape[0]} labels for {data.shape[0]} samples", field="labels"
            )
        if self.n_classes < 1:
            raise ValidationError("need at least one class", field="n_classes")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValidationError(
                f"labels must lie in [0, {self.n_classes})", field="labels"
            )
        if self.dtype is FmapDType.BIT and data.size and not np.isin(data, (0, 1)).all():
            raise ValidationError("BIT data may contain only 0/1", field="data")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureMapSet):
            return NotImplemented
        if self.dtype is not other.dtype or self.n_classes != other.n_classes:
            return False
        if self.data.shape != other.data.shape:
            return False
        if not np.array_equal(self.labels, other.labels):
            return False
        if self.dtype is FmapDType.F32:
            # bit-pattern equality, so NaN payloads and signed zeros round-trip
            return np.array_equal(
                self.data.view(np.uint32), other.data.view(np.uint32)
            )
        return np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class Template:
    """Per-class stored pattern: a vector of per-feature matching windows.

    Binary templates are the degenerate case ``lower == upper`` with
    values in {0, 1}.
    """

    class_id: int
    lower: np.ndarray
    upper: np.ndarray
    member_count: int

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64).reshape(-1)
        upper = np.asarray(self.upper, dtype=np.float64).reshape(-1)
        if lower.shape != upper.shape:
            raise ValidationError(
                f"lower has {lower.size} features, upper has {upper.size}",
                field="lower/upper",
            )
        bad = np.nonzero(lower > upper)[0]
        if bad.size:
            i = int(bad[0])
            raise ValidationError(
                f"lower[{i}]={lower[i]} exceeds upper[{i}]={upper[i]}", field="lower"
            )
        if self.class_id < 0:
            raise ValidationError("negative class_id", field="class_id")
        if self.member_count < 0:
            raise ValidationError("negative member_count", field="member_count")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n_features(self) -> int:
        return self.lower.shape[0]

    def is_binary(self) -> bool:
        return bool(
            np.array_equal(self.lower, self.upper) and np.isin(self.lower, (0, 1)).all()
        )


@dataclass(frozen=True)
class TemplateBank:
    """Every class's templates plus the provenance needed to rebuild them.

    ``thresholds`` optionally carries the per-feature binarization
    thresholds the bank was built with, so query feature maps can be
    quantized the same way at classification time.
    """

    n_classes: int
    n_features: int
    templates: tuple
    mode: TemplateMode
    threshold_method: ThresholdMethod
    seed: int
    thresholds: np.ndarray | None = None

    def __post_init__(self):
        if self.thresholds is not None:
            thresholds = np.asarray(self.thresholds, dtype=np.float64).reshape(-1)
            if thresholds.shape[0] != self.n_features:
                raise ValidationError(
                    f"{thresholds.shape[0]} thresholds for {self.n_features} features",
                    field="thresholds",
                )
            object.__setattr__(self, "thresholds", thresholds)
        templates = tuple(self.templates)
        if not templates:
            raise ValidationError("bank holds no templates", field="templates")
        owned = set()
        for i, t in enumerate(templates):
            if not isinstance(t, Template):
                raise ValidationError(f"templates[{i}] is not a Template", field="templates")
            if t.n_features != self.n_features:
                raise ValidationError(
                    f"templates[{i}] has {t.n_features} features, bank declares {self.n_features}",
                    field=f"templates[{i}]",
                )
            if not 0 <= t.class_id < self.n_classes:
                raise ValidationError(
                    f"templates[{i}].class_id={t.class_id} outside [0, {self.n_classes})",
                    field=f"templates[{i}].class_id",
                )
            if self.mode is TemplateMode.BINARY and not t.is_binary():
                raise ValidationError(
                    f"templates[{i}] is not binary (lower==upper in {{0,1}})",
                    field=f"templates[{i}]",
                )
            owned.add(t.class_id)
        missing = sorted(set(range(self.n_classes)) - owned)
        if missing:
            raise ValidationError(
                f"classes {missing} own no template", field="templates"
            )
        object.__setattr__(self, "templates", templates)

    @property
    def n_templates(self) -> int:
        return len(self.templates)

    def templates_for(self, class_id: int) -> tuple:
        return tuple(t for t in self.templates if t.class_id == class_id)

    def stacked_bounds(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Stack bounds into (T, N) matrices.

        Returns (lowers, uppers, class_ids, template_ords) where
        ``template_ords[i]`` is template i's ordinal within its class.
        """
        lowers = np.stack([t.lower for t in self.templates])
        uppers = np.stack([t.upper for t in self.templates])
        class_ids = np.array([t.class_id for t in self.templates], dtype=np.int64)
        ords = np.zeros(len(self.templates), dtype=np.int64)
        seen: dict[int, int] = {}
        for i, c in enumerate(class_ids):
            ords[i] = seen.get(int(c), 0)
            seen[int(c)] = ords[i] + 1
        return lowers, uppers, class_ids, ords


# ---------------------------------------------------------------------------
# bit packing
# ---------------------------------------------------------------------------


def pack_bit_rows(rows: np.ndarray) -> np.ndarray:
    """Pack a (n, width) 0/1 matrix MSB-first, each row padded to a whole byte."""
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.ndim != 2:
        raise ValueError("expected a 2-D bit matrix")
    return np.packbits(rows, axis=1)


def unpack_bit_rows(packed: np.ndarray, n_features: int) -> np.ndarray:
    """Inverse of :func:`pack_bit_rows` for a known row width."""
    packed = np.asarray(packed, dtype=np.uint8)
    return np.unpackbits(packed, axis=1, count=n_features)


# ---------------------------------------------------------------------------
# FMAP binary format
# ---------------------------------------------------------------------------


def save_fmap(fset: FeatureMapSet, path: str | os.PathLike) -> None:
    """Serialize a feature-map set to the FMAP binary layout.

    Layout: magic ``FMAP``, version u16, dtype u8 (0=F32-LE, 1=U8, 2=BIT),
    reserved u8, n_classes u32, n_samples u64, n_features u64 (all
    little-endian), labels as u16 per sample, then row-major data.  BIT
    rows are MSB-first bit-packed with per-row byte padding.
    """
    if fset.n_classes > MAX_CLASSES:
        raise ValidationError(
            f"format stores labels as u16; n_classes={fset.n_classes} exceeds {MAX_CLASSES}",
            field="n_classes",
        )
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        int(fset.dtype),
        0,
        fset.n_classes,
        fset.n_samples,
        fset.n_features,
    )
    labels = fset.labels.astype("<u2").tobytes()
    if fset.dtype is FmapDType.F32:
        body = fset.data.astype("<f4", copy=False).tobytes()
    elif fset.dtype is FmapDType.U8:
        body = fset.data.tobytes()
    else:
        body = pack_bit_rows(fset.data).tobytes()
    atomic_write_bytes(path, header + labels + body)


def load_fmap(path: str | os.PathLike) -> FeatureMapSet:
    """Parse an FMAP file back into a :class:`FeatureMapSet`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise TruncationError(
            f"file holds {len(blob)} bytes, header needs {_HEADER.size}"
        )
    magic, version, dtype_code, _reserved, n_classes, n_samples, n_features = (
        _HEADER.unpack_from(blob, 0)
    )
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    try:
        dtype = FmapDType(dtype_code)
    except ValueError:
        raise FormatError(f"unknown dtype code {dtype_code}", offset=6) from None

    label_bytes = 2 * n_samples
    if dtype is FmapDType.F32:
        row_bytes = 4 * n_features
    elif dtype is FmapDType.U8:
        row_bytes = n_features
    else:
        row_bytes = (n_features + 7) // 8
    expected = _HEADER.size + label_bytes + n_samples * row_bytes
    if len(blob) != expected:
        raise TruncationError(
            f"file holds {len(blob)} bytes, header declares {expected}"
        )

    labels = np.frombuffer(blob, dtype="<u2", count=n_samples, offset=_HEADER.size)
    body = blob[_HEADER.size + label_bytes :]
    if dtype is FmapDType.F32:
        data = np.frombuffer(body, dtype="<f4").reshape(n_samples, n_features)
        data = data.astype(np.float32)
    elif dtype is FmapDType.U8:
        data = np.frombuffer(body, dtype=np.uint8).reshape(n_samples, n_features).copy()
    else:
        packed = np.frombuffer(body, dtype=np.uint8).reshape(n_samples, row_bytes)
        data = (
            unpack_bit_rows(packed, n_features)
            if n_features
            else np.zeros((n_samples, 0), dtype=np.uint8)
        )
    return FeatureMapSet(data=data, labels=labels, n_classes=n_classes, dtype=dtype)


# ---------------------------------------------------------------------------
# template-bank document format
# ---------------------------------------------------------------------------


def save_template_bank(bank: TemplateBank, path: str | os.PathLike) -> None:
    """Write a bank as a human-auditable JSON document."""
    doc = {
        "schema_version": BANK_SCHEMA_VERSION,
        "mode": bank.mode.value,
        "threshold_method": bank.threshold_method.value,
        "seed": bank.seed,
        "n_classes": bank.n_classes,
        "n_features": bank.n_features,
        "thresholds": None if bank.thresholds is None else bank.thresholds.tolist(),
        "templates": [
            {
                "class_id": t.class_id,
                "lower": t.lower.tolist(),
                "upper": t.upper.tolist(),
                "member_count": t.member_count,
            }
            for t in bank.templates
        ],
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def _require(doc: dict, field: str, path: str = ""):
    if field not in doc:
        raise ValidationError("missing required field", field=path + field)
    return doc[field]


def load_template_bank(path: str | os.PathLike) -> TemplateBank:
    """Parse and validate a bank document; exact inverse of the saver."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"not a valid JSON document: {exc}") from exc
    version = _require(doc, "schema_version")
    if version != BANK_SCHEMA_VERSION:
        raise ValidationError(
            f"unsupported schema_version {version}", field="schema_version"
        )
    try:
        mode = TemplateMode(_require(doc, "mode"))
        method = ThresholdMethod(_require(doc, "threshold_method"))
    except ValueError as exc:
        raise ValidationError(str(exc), field="mode/threshold_method") from exc
    entries = _require(doc, "templates")
    templates = []
    for i, entry in enumerate(entries):
        prefix = f"templates[{i}]."
        try:
            templates.append(
                Template(
                    class_id=int(_require(entry, "class_id", prefix)),
                    lower=np.asarray(_require(entry, "lower", prefix), dtype=np.float64),
                    upper=np.asarray(_require(entry, "upper", prefix), dtype=np.float64),
                    member_count=int(_require(entry, "member_count", prefix)),
                )
            )
        except ValidationError as exc:
            if exc.field and not exc.field.startswith("templates["):
                raise ValidationError(str(exc), field=f"templates[{i}]") from exc
            raise
    thresholds = doc.get("thresholds")
    return TemplateBank(
        n_classes=int(_require(doc, "n_classes")),
        n_features=int(_require(doc, "n_features")),
        templates=tuple(templates),
        mode=mode,
        threshold_method=method,
        seed=int(_require(doc, "seed")),
        thresholds=None if thresholds is None else np.asarray(thresholds, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# synthetic fixtures
# ---------------------------------------------------------------------------


def synth_fixture(
    n_classes: int,
    n_features: int,
    per_class: int,
    spread: float,
    seed: int,
) -> FeatureMapSet:
    """Deterministic synthetic dataset: one random binary center per class.

    Each sample starts as its class center, has every bit flipped
    independently with probability ``spread``, and then receives additive
    Gaussian jitter with sigma ``spread``.  ``spread=0`` reproduces the
    centers exactly.  Pure function of its arguments.
    """
    if min(n_classes, n_features, per_class) < 1:
        raise ValueError("n_classes, n_features and per_class must all be >= 1")
    if spread < 0:
        raise ValueError("spread must be non-negative")
    rng = np.random.default_rng(seed)
    centers = rng.integers(0, 2, size=(n_classes, n_features)).astype(np.float64)
    blocks = []
    for c in range(n_classes):
        flips = rng.random((per_class, n_features)) < spread
        jitter = rng.normal(0.0, spread, size=(per_class, n_features))
        blocks.append(np.abs(centers[c] - flips) + jitter)
    data = np.concatenate(blocks).astype(np.float32)
    labels = np.repeat(np.arange(n_classes), per_class)
    return FeatureMapSet(data=data, labels=labels, n_classes=n_classes, dtype=FmapDType.F32)


def synth_bimodal_fixture(
    n_classes: int,
    n_features: int,
    per_class: int,
    spread: float,
    seed: int,
) -> FeatureMapSet:
    """Synthetic dataset where every class mixes two distinct sub-centers.

    Useful for exercising multi-template generation: a single centroid
    blends the sub-clusters while k=2 recovers them.  Sample noise follows
    the same flip+jitter model as :func:`synth_fixture`.
    """
    if min(n_classes, n_features, per_class) < 1:
        raise ValueError("n_classes, n_features and per_class must all be >= 1")
    if spread < 0:
        raise ValueError("spread must be non-negative")
    rng = np.random.default_rng(seed)
    centers = rng.integers(0, 2, size=(n_classes, 2, n_features)).astype(np.float64)
    blocks = []
    for c in range(n_classes):
        # alternate the two sub-clusters so any contiguous split sees both
        subs = np.arange(per_class) % 2
        flips = rng.random((per_class, n_features)) < spread
        jitter = rng.normal(0.0, spread, size=(per_class, n_features))
        blocks.append(np.abs(centers[c, subs] - flips) + jitter)
    data = np.concatenate(blocks).astype(np.float32)
    labels = np.repeat(np.arange(n_classes), per_class)
    return FeatureMapSet(data=data, labels=labels, n_classes=n_classes, dtype=FmapDType.F32)
