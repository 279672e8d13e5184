"""
Desk-scale reproductions of the directional benchmark results

Slow: only run with AL_ENGINE_SLOW_TESTS=1. The MNIST smoke run also needs
AL_ENGINE_MNIST_DIR pointing at the four IDX files.
"""

import os
import unittest

import numpy as np

from data_loader import build_dataset
from experiment_config import StrategyKind, config_from_dict
from experiment_engine import run_experiment
from metrics import aubc, paired_t_test

SLOW = os.getenv("AL_ENGINE_SLOW_TESTS") == "1"
MNIST_DIR = os.getenv("AL_ENGINE_MNIST_DIR")

OVERLAP_DATASET = {"kind": "synthetic_gaussians", "n_per_class": 1250,
                   "means": [[0.0, 0.0], [2.0, 0.0]], "shared_std": 1.0,
                   "test_fraction": 0.2, "split_seed": 0, "name": "gaussians-overlap"}


def overlap_config(kind, epochs=30, **extra):
    return config_from_dict({
        "name": f"{kind}-e{epochs}",
        "dataset": OVERLAP_DATASET,
        "learner": {"hidden_layers": [32], "epochs": epochs},
        "strategy": {"kind": kind, **extra},
        "m_init": 20, "b": 20, "budget": 400,
    })


def aubc_over_seeds(config, dataset, seeds):
    return [aubc(run_experiment(config, dataset, seed=s).curve) for s in seeds]


@unittest.skipUnless(SLOW, "set AL_ENGINE_SLOW_TESTS=1 to run benchmark reproductions")
class UncertaintyBeatsRandomTests(unittest.TestCase):
    def test_uncertainty_strategies_above_random(self):
        dataset = build_dataset(overlap_config("random").dataset, seed=0)
        self.assertEqual(dataset.n_train, 2000)
        seeds = range(10)
        random_aubc = aubc_over_seeds(overlap_config("random"), dataset, seeds)
        for kind in ("entropy", "margin", "least_conf"):
            with self.subTest(kind=kind):
                scores = aubc_over_seeds(overlap_config(kind), dataset, seeds)
                self.assertGreaterEqual(np.mean(scores) - np.mean(random_aubc), 0.005)
                _, p = paired_t_test(scores, random_aubc)
                self.assertLess(p, 0.1)


@unittest.skipUnless(SLOW, "set AL_ENGINE_SLOW_TESTS=1 to run benchmark reproductions")
class EpochAblationTests(unittest.TestCase):
    def test_more_epochs_with_diminishing_returns(self):
        dataset = build_dataset(overlap_config("random").dataset, seed=0)
        means = [np.mean(aubc_over_seeds(overlap_config("random", epochs=e), dataset, range(10)))
                 for e in (5, 15, 30)]
        self.assertLessEqual(means[0], means[1])
        self.assertLessEqual(means[1], means[2])
        self.assertLess(means[2] - means[1], means[1] - means[0])


@unittest.skipUnless(SLOW, "set AL_ENGINE_SLOW_TESTS=1 to run benchmark reproductions")
class CealPseudoLabelTests(unittest.TestCase):
    def test_pseudo_labels_are_accurate_on_separable_data(self):
        config = config_from_dict({
            "name": "ceal-separable",
            "dataset": {"kind": "synthetic_gaussians", "n_per_class": 300,
                        "means": [[0.0, 0.0], [8.0, 8.0]], "split_seed": 0},
            "learner": {"hidden_layers": [32], "epochs": 50, "dropout_rate": 0.0},
            "strategy": {"kind": "ceal_entropy"},
            "m_init": 20, "b": 20, "budget": 100,
        })
        dataset = build_dataset(config.dataset, seed=0)
        for seed in range(5):
            result = run_experiment(config, dataset, seed=seed)
            self.assertEqual(result.final_pool.spent, 100)
            self.assertLess(result.pseudo_error_rate, 0.01)


@unittest.skipUnless(SLOW and MNIST_DIR, "needs AL_ENGINE_SLOW_TESTS=1 and AL_ENGINE_MNIST_DIR")
class MnistSmokeTests(unittest.TestCase):
    def config(self, kind):
        return config_from_dict({
            "name": f"mnist-{kind}",
            "dataset": {"kind": "idx",
                        "train_images": os.path.join(MNIST_DIR, "train-images-idx3-ubyte.gz"),
                        "train_labels": os.path.join(MNIST_DIR, "train-labels-idx1-ubyte.gz"),
                        "test_images": os.path.join(MNIST_DIR, "t10k-images-idx3-ubyte.gz"),
                        "test_labels": os.path.join(MNIST_DIR, "t10k-labels-idx1-ubyte.gz"),
                        "subsample": 5000},
            "learner": {"hidden_layers": [128], "epochs": 10,
                        "loss_head": kind == StrategyKind.LPL.value},
            "strategy": {"kind": kind},
            "m_init": 100, "b": 100, "budget": 1000,
        })

    def test_every_strategy_completes_and_margin_beats_random(self):
        dataset = build_dataset(self.config("random").dataset, seed=0)
        for kind in StrategyKind:
            with self.subTest(kind=kind.value):
                result = run_experiment(self.config(kind.value), dataset, seed=0)
                self.assertEqual(result.final_pool.spent, 1000)
        margin = aubc_over_seeds(self.config("margin"), dataset, range(3))
        random_ = aubc_over_seeds(self.config("random"), dataset, range(3))
        self.assertGreaterEqual(np.mean(margin), np.mean(random_))


if __name__ == '__main__':
    unittest.main()
