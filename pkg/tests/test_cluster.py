import itertools

import numpy as np
import pytest
from sklearn.metrics import silhouette_score

from acam_edge import kmeans, silhouette


def exhaustive_best_2partition(points):
    """Oracle: best k=2 clustering by trying every 2-partition."""
    n = len(points)
    best_cost, best_centroids = np.inf, None
    for bits in itertools.product((0, 1), repeat=n):
        bits = np.array(bits)
        if bits.sum() in (0, n):
            continue
        cost = 0.0
        cents = []
        for j in (0, 1):
            members = points[bits == j]
            c = members.mean(axis=0)
            cents.append(c)
            cost += ((members - c) ** 2).sum()
        if cost < best_cost:
            best_cost, best_centroids = cost, np.array(cents)
    return best_cost, best_centroids


class TestKMeans:
    def test_two_well_separated_pairs(self):
        points = np.array([[0.0], [0.2], [10.0], [10.2]])
        result = kmeans(points, 2, seed=0)
        assert sorted(np.round(result.centroids[:, 0], 6)) == [0.1, 10.1]
        # oracle agreement on inertia and centroid set
        cost, cents = exhaustive_best_2partition(points)
        assert result.inertia == pytest.approx(cost)
        assert sorted(cents[:, 0]) == pytest.approx(sorted(result.centroids[:, 0]))

    def test_k1_is_column_mean(self, rng):
        points = rng.standard_normal((20, 3))
        result = kmeans(points, 1, seed=4)
        np.testing.assert_allclose(result.centroids[0], points.mean(axis=0))

    def test_k_equals_n(self, rng):
        points = rng.standard_normal((6, 2))
        result = kmeans(points, 6, seed=0)
        assert result.inertia == pytest.approx(0.0)
        assert np.unique(result.assignments).size == 6

    def test_k_above_n_rejected(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((3, 2)), 4, seed=0)

    def test_deterministic_per_seed(self, rng):
        points = rng.standard_normal((40, 5))
        a = kmeans(points, 3, seed=9)
        b = kmeans(points, 3, seed=9)
        np.testing.assert_array_equal(a.assignments, b.assignments)
        np.testing.assert_array_equal(a.centroids, b.centroids)

    def test_inertia_never_increases(self, rng):
        for trial in range(10):
            points = rng.standard_normal((50, 4))
            result = kmeans(points, 4, seed=trial)
            history = np.array(result.inertia_history)
            assert (np.diff(history) <= 1e-9).all()
            assert result.inertia == history[-1]

    def test_matches_exhaustive_on_random_small_inputs(self, rng):
        # Lloyd can stop in a local optimum; it must never beat the oracle,
        # and on well-separated data it should match it.
        for trial in range(10):
            points = rng.standard_normal((7, 2))
            cost, _ = exhaustive_best_2partition(points)
            result = kmeans(points, 2, seed=trial)
            assert result.inertia >= cost - 1e-9

    def test_empty_cluster_reseeded(self):
        # duplicated points easily strand a centroid
        points = np.array([[0.0, 0.0]] * 5 + [[5.0, 5.0]] * 5 + [[5.0, 5.1]])
        result = kmeans(points, 3, seed=2)
        assert np.bincount(result.assignments, minlength=3).min() >= 1


class TestSilhouette:
    def test_hand_evaluated_example(self):
        points = np.array([[0.0], [0.1], [10.0], [10.1]])
        assignments = np.array([0, 0, 1, 1])
        expected = (9.95 / 10.05 + 9.85 / 9.95) / 2  # hand evaluation
        assert silhouette(points, assignments) == pytest.approx(expected)
        assert round(silhouette(points, assignments), 3) == 0.990

    def test_identical_points_score_zero(self):
        points = np.zeros((6, 2))
        assert silhouette(points, np.array([0, 0, 0, 1, 1, 1])) == 0.0

    def test_single_cluster_rejected(self):
        with pytest.raises(ValueError):
            silhouette(np.zeros((4, 1)), np.zeros(4, dtype=int))

    def test_singleton_cluster_scores_zero(self):
        points = np.array([[0.0], [0.1], [99.0]])
        score = silhouette(points, np.array([0, 0, 1]))
        # singleton contributes 0; the pair scores positively
        assert 0 < score < 1

    def test_matches_sklearn_on_random_data(self, rng):
        for trial in range(5):
            points = rng.standard_normal((30, 4))
            assignments = rng.integers(0, 3, size=30)
            if np.bincount(assignments, minlength=3).min() < 2:
                continue
            ours = silhouette(points, assignments)
            theirs = silhouette_score(points, assignments)
            assert ours == pytest.approx(theirs, abs=1e-9)
