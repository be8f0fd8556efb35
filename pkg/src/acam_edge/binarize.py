"""Per-feature thresholding, binarization, and 8-bit affine quantization.

Thresholds are computed once on the training split and reused for test
data.  Binarization is strict: a value equal to its threshold maps to 0,
so a constant column thresholded at its own mean comes out all-zero,
mirroring the sparsity of rectified activations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .fmap import FeatureMapSet, FmapDType, ThresholdMethod


@dataclass(frozen=True)
class ThresholdVector:
    """One binarization threshold per feature column."""

    values: np.ndarray
    method: ThresholdMethod

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.size and not np.isfinite(values).all():
            raise ValueError("thresholds must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n_features(self) -> int:
        return self.values.shape[0]


def _column_thresholds(data: np.ndarray, method: ThresholdMethod) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.shape[0] < 1:
        raise ValueError("cannot compute thresholds over an empty set")
    if method is ThresholdMethod.MEAN:
        return data.mean(axis=0)
    return np.median(data, axis=0)


def column_thresholds(
    train: FeatureMapSet, method: ThresholdMethod | str = ThresholdMethod.MEAN
) -> ThresholdVector:
    """Per-column mean or interpolated-median thresholds over a training set."""
    method = ThresholdMethod(method)
    return ThresholdVector(values=_column_thresholds(train.data, method), method=method)


def binarize(fset: FeatureMapSet, thresholds: ThresholdVector) -> FeatureMapSet:
    """Map each value to 1 iff strictly above its column threshold.

    Labels are preserved; the result is a BIT set of the same shape.
    """
    if fset.n_features != thresholds.n_features:
        raise ValueError(
            f"set has {fset.n_features} features, thresholds have {thresholds.n_features}"
        )
    bits = (np.asarray(fset.data, dtype=np.float64) > thresholds.values).astype(np.uint8)
    return FeatureMapSet(
        data=bits, labels=fset.labels, n_classes=fset.n_classes, dtype=FmapDType.BIT
    )


def binarize_vector(values: np.ndarray, thresholds: ThresholdVector) -> np.ndarray:
    """Strict-threshold binarization for a single feature vector."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.shape[0] != thresholds.n_features:
        raise ValueError(
            f"vector has {values.shape[0]} features, thresholds have {thresholds.n_features}"
        )
    return (values > thresholds.values).astype(np.float64)


def affine_quantize8(fset: FeatureMapSet) -> tuple[FeatureMapSet, float, int]:
    """Quantize an F32 set to 8-bit with a single affine (scale, zero_point).

    ``q = clamp(round(v / scale) + zero_point, 0, 255)`` with
    ``scale = (max - min) / 255`` and ``zero_point = round(-min / scale)``.
    Constant input degenerates to scale 1, zero_point 0.  Dequantization
    error is at most scale/2 per element.
    """
    data = np.asarray(fset.data, dtype=np.float64)
    if data.size and not np.isfinite(data).all():
        raise ValueError("cannot quantize non-finite values")
    vmin = float(data.min()) if data.size else 0.0
    vmax = float(data.max()) if data.size else 0.0
    if vmax == vmin:
        scale, zero_point = 1.0, 0
    else:
        scale = (vmax - vmin) / 255.0
        zero_point = int(np.rint(-vmin / scale))
    q = np.clip(np.rint(data / scale) + zero_point, 0, 255).astype(np.uint8)
    quantized = FeatureMapSet(
        data=q, labels=fset.labels, n_classes=fset.n_classes, dtype=FmapDType.U8
    )
    return quantized, scale, zero_point


def dequantize8(fset: FeatureMapSet, scale: float, zero_point: int) -> np.ndarray:
    """Inverse mapping for :func:`affine_quantize8` output."""
    return (np.asarray(fset.data, dtype=np.float64) - zero_point) * scale


class FeatureBinarizer(TransformerMixin, BaseEstimator):
    """Binarize features against per-column thresholds learned from fit data.

    Parameters
    ----------
    method : {'mean', 'median'}, default='mean'
        Per-column statistic used as the threshold.  Mean thresholds sit
        below the median for sparse non-negative activations, which keeps
        low-magnitude active features discriminative.

    Attributes
    ----------
    thresholds_ : ndarray of shape (n_features,)
        Learned per-column thresholds.
    n_features_in_ : int
    """

    def __init__(self, method: str = "mean"):
        self.method = method

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.thresholds_ = _column_thresholds(X, ThresholdMethod(self.method))
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "thresholds_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, fitted for {self.n_features_in_}"
            )
        return (X > self.thresholds_).astype(np.uint8)
