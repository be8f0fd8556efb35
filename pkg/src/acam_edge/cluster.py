"""Seeded Lloyd k-means and silhouette scoring for per-class clustering.

A private implementation (rather than an off-the-shelf one) keeps the
contract tight: deterministic farthest-point seeding from a seeded
generator, per-iteration inertia history for monotonicity checks, and a
fixed empty-cluster policy (re-seed to the point currently farthest from
its assigned centroid).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ClusterResult:
    centroids: np.ndarray  # (k, n_features)
    assignments: np.ndarray  # (n_points,)
    inertia: float
    iterations: int
    inertia_history: tuple  # one entry per iteration, non-increasing

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (n_points, n_centers)."""
    # ||x||^2 - 2 x.c + ||c||^2; clip tiny negatives from cancellation
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _farthest_point_seeds(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """First seed random, then repeatedly the point farthest from all seeds."""
    n = points.shape[0]
    seeds = np.empty(k, dtype=np.int64)
    seeds[0] = rng.integers(n)
    min_d2 = _sq_dists(points, points[seeds[:1]])[:, 0]
    for j in range(1, k):
        seeds[j] = int(np.argmax(min_d2))
        min_d2 = np.minimum(min_d2, _sq_dists(points, points[seeds[j : j + 1]])[:, 0])
    return seeds


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-4,
) -> ClusterResult:
    """Lloyd iterations with squared-Euclidean distance.

    Stops when the largest centroid shift falls below ``tol`` or after
    ``max_iter`` rounds.  Deterministic for a fixed seed.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D matrix")
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} available points")
    rng = np.random.default_rng(seed)
    centroids = points[_farthest_point_seeds(points, k, rng)].copy()

    history: list[float] = []
    assign = np.zeros(n, dtype=np.int64)
    for iteration in range(1, max_iter + 1):
        d2 = _sq_dists(points, centroids)
        assign = np.argmin(d2, axis=1)

        counts = np.bincount(assign, minlength=k)
        if (counts == 0).any():
            taken: set[int] = set()
            for j in np.nonzero(counts == 0)[0]:
                worst_order = np.argsort(-d2[np.arange(n), assign], kind="stable")
                worst = next(int(i) for i in worst_order if int(i) not in taken)
                taken.add(worst)
                centroids[j] = points[worst]
            d2 = _sq_dists(points, centroids)
            assign = np.argmin(d2, axis=1)
            counts = np.bincount(assign, minlength=k)

        history.append(float(d2[np.arange(n), assign].sum()))

        new_centroids = centroids.copy()
        for j in range(k):
            if counts[j]:
                new_centroids[j] = points[assign == j].mean(axis=0)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break

    return ClusterResult(
        centroids=centroids,
        assignments=assign,
        inertia=history[-1],
        iterations=iteration,
        inertia_history=tuple(history),
    )


def silhouette(points: np.ndarray, assignments: np.ndarray) -> float:
    """Mean silhouette score over all samples, in [-1, 1].

    Per sample, ``s = (b - a) / max(a, b)`` with ``a`` the mean Euclidean
    distance to the sample's own cluster (excluding itself) and ``b`` the
    smallest mean distance to any other cluster.  Samples in singleton
    clusters score 0, as does the all-identical degenerate case.
    """
    points = np.asarray(points, dtype=np.float64)
    assignments = np.asarray(assignments, dtype=np.int64).reshape(-1)
    if points.shape[0] != assignments.shape[0]:
        raise ValueError("points and assignments disagree on sample count")
    labels = np.unique(assignments)
    if labels.size < 2:
        raise ValueError("silhouette needs at least 2 non-empty clusters")

    dists = np.sqrt(_sq_dists(points, points))
    members = {int(c): np.nonzero(assignments == c)[0] for c in labels}
    scores = np.zeros(points.shape[0])
    for i in range(points.shape[0]):
        own = members[int(assignments[i])]
        if own.size == 1:
            continue  # singleton: s = 0
        a = dists[i, own].sum() / (own.size - 1)
        b = min(
            dists[i, members[int(c)]].mean() for c in labels if c != assignments[i]
        )
        m = max(a, b)
        scores[i] = 0.0 if m == 0.0 else (b - a) / m
    return float(scores.mean())
