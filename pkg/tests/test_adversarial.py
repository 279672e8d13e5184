import math
import unittest

import numpy as np
from scipy.stats import spearmanr

import learner
from adversarial import NO_FLIP, bim_distance, bim_distances
from errors import NumericalError
from experiment_config import BimConfig, LearnerConfig
from learner import LearnerSnapshot


def boundary_at_zero():
    cfg = LearnerConfig(layer_sizes=[1, 2], dropout_rate=0.0, standardize=False)
    return LearnerSnapshot(weights=(np.array([[-1.0, 1.0]]),), biases=(np.zeros(2),), config=cfg)


class BimDistanceTests(unittest.TestCase):
    def test_constant_classifier_never_flips(self):
        cfg = LearnerConfig(layer_sizes=[3, 2], dropout_rate=0.0, standardize=False)
        snap = LearnerSnapshot(weights=(np.zeros((3, 2)),), biases=(np.array([0.5, 0.0]),), config=cfg)
        result = bim_distance(snap, np.array([0.2, -1.0, 3.0]), BimConfig(step=0.1, max_steps=10))
        self.assertFalse(result.flipped)
        self.assertEqual(result.r_norm, NO_FLIP)
        self.assertTrue(math.isinf(result.r_norm))

    def test_one_dimensional_boundary(self):
        result = bim_distance(boundary_at_zero(), np.array([0.35]), BimConfig(step=0.1, max_steps=50))
        self.assertTrue(result.flipped)
        self.assertEqual(result.steps, 4)
        self.assertAlmostEqual(result.r_norm, 0.4, places=9)
        self.assertLessEqual(abs(result.r_norm - 0.35), 0.1)

    def test_steps_grow_with_distance_to_boundary(self):
        starts = np.linspace(0.05, 0.95, 10).reshape(-1, 1)
        results = bim_distances(boundary_at_zero(), starts, BimConfig(step=0.1, max_steps=50))
        steps = [r.steps for r in results]
        self.assertEqual(steps, sorted(steps))
        self.assertTrue(all(r.flipped for r in results))

    def test_perturbation_bounded_by_step_budget(self):
        cfg = LearnerConfig(layer_sizes=[4, 6, 3], dropout_rate=0.0, standardize=False)
        X = np.random.default_rng(0).normal(size=(40, 4))
        y = np.arange(40) % 3
        snap = learner.train(cfg.model_copy(update={"epochs": 5}), X, y, seed=1)
        bim = BimConfig(step=0.05, max_steps=60)
        for result in bim_distances(snap, X, bim):
            if result.flipped:
                self.assertLessEqual(result.r_norm, bim.step * result.steps * math.sqrt(4) + 1e-9)

    def test_l2_steps_have_fixed_length(self):
        result = bim_distance(boundary_at_zero(), np.array([0.35]), BimConfig(step=0.1, max_steps=50, norm="l2"))
        self.assertEqual(result.steps, 4)
        self.assertAlmostEqual(result.r_norm, 0.4, places=9)

    def test_non_finite_start_rejected(self):
        with self.assertRaises(NumericalError):
            bim_distance(boundary_at_zero(), np.array([np.nan]), BimConfig())


class BoundaryConsistencyTests(unittest.TestCase):
    def test_perturbation_ranks_match_analytic_distance(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(-2.0, 2.0, size=(200, 2))
        y = (X[:, 0] + X[:, 1] > 0).astype(int)
        cfg = LearnerConfig(layer_sizes=[2, 2], dropout_rate=0.0, standardize=False,
                            epochs=50, learning_rate=0.1)
        snap = learner.train(cfg, X, y, seed=0)

        normal = snap.weights[0][:, 1] - snap.weights[0][:, 0]
        offset = snap.biases[0][1] - snap.biases[0][0]
        analytic = np.abs(X @ normal + offset) / np.linalg.norm(normal)

        results = bim_distances(snap, X, BimConfig(step=0.01, max_steps=2000))
        self.assertTrue(all(r.flipped for r in results))
        scores = np.array([-r.r_norm for r in results])
        rho, _ = spearmanr(scores, analytic)
        self.assertLessEqual(rho, -0.95)


if __name__ == '__main__':
    unittest.main()
