import itertools
import unittest

import numpy as np

from errors import InvalidInputError
from geometry import (cosine_similarity, hac_average_linkage, kmeans, kmeans_pp_seeding,
                      nearest_to_centroids, pairwise_sq_dist, pca)


class DistanceTests(unittest.TestCase):
    def test_one_dimensional_values(self):
        np.testing.assert_allclose(pairwise_sq_dist([[0.0], [3.0]], [[4.0]]), [[16.0], [1.0]])

    def test_self_distances_symmetric_with_zero_diagonal(self):
        A = np.random.default_rng(0).normal(size=(6, 3))
        D = pairwise_sq_dist(A, A)
        np.testing.assert_allclose(np.diag(D), 0.0, atol=1e-12)
        np.testing.assert_allclose(D, D.T)

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(1)
        A, B = rng.normal(size=(4, 5)), rng.normal(size=(3, 5))
        direct = np.array([[np.sum((a - b) ** 2) for b in B] for a in A])
        np.testing.assert_allclose(pairwise_sq_dist(A, B), direct, atol=1e-9)

    def test_cosine_similarity_handles_zero_vectors(self):
        sim = cosine_similarity(np.array([[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]]))
        np.testing.assert_allclose(sim[0], [1.0, 0.0, 0.0])


class SeedingTests(unittest.TestCase):
    def test_all_points_when_k_equals_n(self):
        points = np.random.default_rng(2).normal(size=(7, 2))
        self.assertEqual(sorted(kmeans_pp_seeding(points, 7, seed=0)), list(range(7)))

    def test_duplicate_point_never_chosen_twice(self):
        points = np.array([[0.0], [0.0], [5.0]])
        for seed in range(20):
            chosen = kmeans_pp_seeding(points, 2, seed=seed)
            if chosen[0] in (0, 1):
                self.assertEqual(chosen[1], 2)

    def test_second_seed_follows_squared_distance(self):
        points = np.array([[0.0], [1.0], [100.0]])
        hits = trials = 0
        for seed in range(6000):
            chosen = kmeans_pp_seeding(points, 2, seed=seed)
            if chosen[0] == 0:
                trials += 1
                hits += chosen[1] == 2
        self.assertGreater(trials, 1500)
        self.assertAlmostEqual(hits / trials, 10000 / 10001, delta=0.01)

    def test_too_many_seeds(self):
        with self.assertRaises(InvalidInputError):
            kmeans_pp_seeding(np.zeros((2, 2)), 3, seed=0)


class KMeansTests(unittest.TestCase):
    def test_k_equals_n_has_zero_inertia(self):
        points = np.random.default_rng(3).normal(size=(5, 2))
        self.assertAlmostEqual(kmeans(points, 5, seed=0).inertia, 0.0)

    def test_two_pairs_recover_optimal_centroids(self):
        points = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
        result = kmeans(points, 2, seed=0)
        centroids = sorted(map(tuple, np.round(result.centroids, 9)))
        self.assertEqual(centroids, [(0.0, 0.5), (10.0, 0.5)])

        # brute force over every 2-partition agrees
        best = min(
            sum(np.sum((points[list(group)] - points[list(group)].mean(axis=0)) ** 2)
                for group in (part, tuple(set(range(4)) - set(part))))
            for size in (1, 2) for part in itertools.combinations(range(4), size))
        self.assertAlmostEqual(result.inertia, best)

    def test_objective_never_increases(self):
        points = np.random.default_rng(4).normal(size=(60, 2))
        history = kmeans(points, 5, seed=1).objective_history
        for before, after in zip(history, history[1:]):
            self.assertLessEqual(after, before + 1e-9)

    def test_every_point_assigned_to_nearest_centroid(self):
        points = np.random.default_rng(5).normal(size=(40, 3))
        result = kmeans(points, 4, seed=2)
        nearest = np.argmin(pairwise_sq_dist(points, result.centroids), axis=1)
        np.testing.assert_array_equal(result.assignment, nearest)

    def test_fixed_seed_reproducible(self):
        points = np.random.default_rng(6).normal(size=(30, 2))
        a, b = kmeans(points, 3, seed=7), kmeans(points, 3, seed=7)
        np.testing.assert_array_equal(a.centroids, b.centroids)

    def test_nearest_to_centroids_resolves_collisions(self):
        points = np.array([[0.0], [0.1], [5.0]])
        self.assertEqual(nearest_to_centroids(points, np.array([[0.0], [0.0]])), [0, 1])


class HierarchicalTests(unittest.TestCase):
    def test_boundaries(self):
        points = np.random.default_rng(7).normal(size=(6, 2))
        self.assertEqual(len(set(hac_average_linkage(points, 6))), 6)
        self.assertEqual(set(hac_average_linkage(points, 1)), {0})

    def test_five_point_fixture(self):
        assignment = hac_average_linkage(np.array([[0.0], [0.1], [0.2], [5.0], [5.1]]), 2)
        self.assertEqual(list(assignment), [0, 0, 0, 1, 1])

    def test_permutation_invariance(self):
        points = np.random.default_rng(8).normal(size=(9, 2))
        order = np.random.default_rng(9).permutation(9)
        base = hac_average_linkage(points, 3)
        permuted = hac_average_linkage(points[order], 3)
        as_sets = lambda labels, idx: {frozenset(idx[labels == c]) for c in set(labels)}
        self.assertEqual(as_sets(base, np.arange(9)), as_sets(permuted, order))

    def test_target_out_of_range(self):
        with self.assertRaises(InvalidInputError):
            hac_average_linkage(np.zeros((3, 1)), 4)


class PcaTests(unittest.TestCase):
    def test_analytic_covariance(self):
        rng = np.random.default_rng(10)
        L = np.linalg.cholesky(np.array([[2.0, 1.0], [1.0, 2.0]]))
        raw = rng.normal(size=(4000, 2))
        raw = (raw - raw.mean(axis=0))
        # whiten so the sample covariance is exactly the target
        raw = raw @ np.linalg.inv(np.linalg.cholesky(np.cov(raw.T))).T
        points = raw @ L.T
        result = pca(points, 1)
        self.assertAlmostEqual(result.eigenvalues[0], 3.0, places=6)
        np.testing.assert_allclose(result.basis[:, 0], np.array([1.0, 1.0]) / np.sqrt(2.0), atol=1e-6)

    def test_affine_subspace_reconstructs_exactly(self):
        rng = np.random.default_rng(11)
        coords = rng.normal(size=(50, 2))
        directions = rng.normal(size=(2, 5))
        points = coords @ directions + rng.normal(size=5)
        result = pca(points, 2)
        rebuilt = result.mean + result.projected @ result.basis.T
        np.testing.assert_allclose(rebuilt, points, atol=1e-9)

    def test_component_variances_non_increasing(self):
        points = np.random.default_rng(12).normal(size=(80, 4)) * [4.0, 3.0, 2.0, 1.0]
        variances = pca(points, 4).projected.var(axis=0)
        self.assertTrue(np.all(np.diff(variances) <= 1e-9))

    def test_dimension_clamped(self):
        self.assertEqual(pca(np.random.default_rng(13).normal(size=(10, 3)), 32).projected.shape, (10, 3))


if __name__ == '__main__':
    unittest.main()
