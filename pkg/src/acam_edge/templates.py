"""Template-bank construction: per-class clustering plus bound derivation.

Clustering runs in the continuous feature space and centroids are
binarized (or widened into windows) afterwards, which preserves more
geometry than clustering already-binarized rows.  Each class clusters
independently with a generator seeded ``seed ^ class_id``, so per-class
work can be farmed out without shared state.
"""

from __future__ import annotations

import numpy as np

from .binarize import ThresholdVector, column_thresholds
from .cluster import kmeans, silhouette
from .fmap import FeatureMapSet, Template, TemplateBank, TemplateMode, ThresholdMethod

AUTO_K = "auto"
K_CHOICES = (1, 2, 3)


def _pick_k(points: np.ndarray, class_seed: int, min_silhouette: float,
            max_iter: int, tol: float) -> int:
    """Silhouette-driven choice among k in {1, 2, 3}.

    Silhouette is undefined at k=1, so only k=2 and k=3 compete; if the
    winner's score is below ``min_silhouette`` the class is treated as
    unimodal and k=1 wins.
    """
    candidates = [k for k in K_CHOICES if k >= 2 and k <= points.shape[0]]
    best_k, best_score = 1, -np.inf
    for k in candidates:
        result = kmeans(points, k, seed=class_seed, max_iter=max_iter, tol=tol)
        if np.unique(result.assignments).size < 2:
            continue
        score = silhouette(points, result.assignments)
        if score > best_score:
            best_k, best_score = k, score
    if best_score < min_silhouette:
        return 1
    return best_k


def make_templates(
    train: FeatureMapSet,
    k_per_class: int | str = AUTO_K,
    mode: TemplateMode | str = TemplateMode.BINARY,
    threshold_method: ThresholdMethod | str = ThresholdMethod.MEAN,
    gamma: float = 1.0,
    seed: int = 0,
    *,
    window_bounds: str = "std",
    auto_min_silhouette: float = 0.05,
    max_iter: int = 100,
    tol: float = 1e-4,
) -> TemplateBank:
    """Build one bank from a labeled training set.

    Parameters
    ----------
    train : FeatureMapSet
        Continuous (or 8-bit) training features; every class in
        ``[0, n_classes)`` must contribute at least one sample.
    k_per_class : int or 'auto'
        Fixed template count per class, or silhouette-driven selection
        among {1, 2, 3}.
    mode : {'binary', 'window'}
        Binary banks binarize each cluster centroid against the global
        per-feature thresholds; window banks derive per-feature bounds
        ``centroid +/- gamma * std`` over the cluster members.
    threshold_method : {'mean', 'median'}
        Statistic behind the global thresholds (binary mode).
    gamma : float
        Window half-width in cluster standard deviations (window mode).
    seed : int
        Base seed; class ``c`` clusters with ``seed ^ c``.
    window_bounds : {'std', 'minmax'}
        Alternative window derivation from the cluster's min/max.
    auto_min_silhouette : float
        Score below which 'auto' falls back to a single template.
    """
    mode = TemplateMode(mode)
    threshold_method = ThresholdMethod(threshold_method)
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if window_bounds not in ("std", "minmax"):
        raise ValueError("window_bounds must be 'std' or 'minmax'")
    if train.n_samples < 1:
        raise ValueError("training set is empty")

    data = np.asarray(train.data, dtype=np.float64)
    counts = np.bincount(train.labels, minlength=train.n_classes)
    empty = np.nonzero(counts == 0)[0]
    if empty.size:
        raise ValueError(f"classes {empty.tolist()} have zero training samples")

    thresholds: ThresholdVector | None = None
    if mode is TemplateMode.BINARY:
        thresholds = column_thresholds(train, threshold_method)

    templates: list[Template] = []
    for c in range(train.n_classes):
        points = data[train.labels == c]
        class_seed = seed ^ c
        if k_per_class == AUTO_K:
            k = _pick_k(points, class_seed, auto_min_silhouette, max_iter, tol)
        else:
            k = int(k_per_class)
            if k < 1:
                raise ValueError("k_per_class must be >= 1")
            if k > points.shape[0]:
                raise ValueError(
                    f"class {c} has {points.shape[0]} samples, fewer than k={k}"
                )
        result = kmeans(points, k, seed=class_seed, max_iter=max_iter, tol=tol)
        for j in range(k):
            member_mask = result.assignments == j
            member_count = int(member_mask.sum())
            centroid = result.centroids[j]
            if mode is TemplateMode.BINARY:
                bits = (centroid > thresholds.values).astype(np.float64)
                lower = upper = bits
            elif window_bounds == "std":
                std = (
                    points[member_mask].std(axis=0)
                    if member_count
                    else np.zeros_like(centroid)
                )
                lower = centroid - gamma * std
                upper = centroid + gamma * std
            else:
                span = points[member_mask] if member_count else centroid[None, :]
                lower = span.min(axis=0)
                upper = span.max(axis=0)
            templates.append(
                Template(
                    class_id=c,
                    lower=lower,
                    upper=upper,
                    member_count=member_count,
                )
            )

    return TemplateBank(
        n_classes=train.n_classes,
        n_features=train.n_features,
        templates=tuple(templates),
        mode=mode,
        threshold_method=threshold_method,
        seed=seed,
        thresholds=None if thresholds is None else thresholds.values,
    )
