import gzip
import os
import struct
import tempfile
import unittest

import numpy as np

import learner
from data_loader import (build_dataset, describe_split, load_csv, load_idx, make_imbalanced,
                         split, stratified_head, synth_gaussians, synth_rings, synth_xor)
from errors import ConsistencyError, FormatError, InvalidConfigError, InvalidInputError
from experiment_config import CsvSource, GaussianSource, LearnerConfig, XorSource


def idx_images(pixels, rows, cols, magic=0x803):
    count = len(pixels) // (rows * cols)
    return struct.pack(">IIII", magic, count, rows, cols) + bytes(pixels)


def idx_labels(labels, magic=0x801):
    return struct.pack(">II", magic, len(labels)) + bytes(labels)


class TempDirTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name, data, compress=False):
        path = os.path.join(self.dir, name)
        mode = "wb" if isinstance(data, bytes) else "w"
        if compress:
            with gzip.open(path, "wb") as f:
                f.write(data)
        else:
            with open(path, mode) as f:
                f.write(data)
        return path


class IdxTests(TempDirTestCase):
    def test_two_image_fixture(self):
        images = self.write("img", idx_images([0, 255, 0, 255, 255, 0, 51, 0], 2, 2))
        labels = self.write("lbl", idx_labels([3, 7]))
        X, y = load_idx(images, labels)
        self.assertEqual(X.shape, (2, 4))
        np.testing.assert_allclose(X[0], [0.0, 1.0, 0.0, 1.0])
        np.testing.assert_allclose(X[1], [1.0, 0.0, 0.2, 0.0])
        self.assertEqual(list(y), [3, 7])

    def test_gzip_is_transparent(self):
        images = self.write("img.gz", idx_images([0, 255, 0, 255], 2, 2), compress=True)
        labels = self.write("lbl.gz", idx_labels([1]), compress=True)
        X, y = load_idx(images, labels)
        self.assertEqual(X.shape, (1, 4))
        self.assertEqual(list(y), [1])

    def test_wrong_image_magic(self):
        images = self.write("img", idx_images([0] * 4, 2, 2, magic=0x801))
        labels = self.write("lbl", idx_labels([0]))
        with self.assertRaises(FormatError):
            load_idx(images, labels)

    def test_count_mismatch(self):
        images = self.write("img", idx_images([0] * 9 * 4, 2, 2))
        labels = self.write("lbl", idx_labels(list(range(10))))
        with self.assertRaises(ConsistencyError):
            load_idx(images, labels)

    def test_missing_file(self):
        with self.assertRaises(InvalidInputError):
            load_idx(os.path.join(self.dir, "nope"), os.path.join(self.dir, "nope2"))


class CsvTests(TempDirTestCase):
    def test_three_row_fixture(self):
        path = self.write("pets.csv", "weight,height,label\n4.0,20,cat\n30.5,60,dog\n3.5,22,cat\n")
        table = load_csv(path, "label")
        self.assertEqual(table.features.shape, (3, 2))
        self.assertEqual(list(table.labels), [0, 1, 0])
        self.assertEqual(table.class_names, ["cat", "dog"])

    def test_malformed_cell_names_row_and_column(self):
        path = self.write("bad.csv", "a,b,label\n1,2,cat\n1,x,dog\n")
        with self.assertRaises(FormatError) as ctx:
            load_csv(path, "label")
        self.assertIn("row 2", str(ctx.exception))
        self.assertIn("'b'", str(ctx.exception))

    def test_missing_label_column(self):
        path = self.write("nolabel.csv", "a,b\n1,2\n")
        with self.assertRaises(FormatError):
            load_csv(path, "label")

    def test_groups_indexed_by_first_appearance(self):
        path = self.write("grouped.csv", "f,label,site\n1,a,west\n2,b,east\n3,a,west\n")
        table = load_csv(path, "label", group_column="site")
        self.assertEqual(list(table.groups), [0, 1, 0])
        self.assertEqual(table.group_names, ["west", "east"])
        self.assertEqual(table.features.shape, (3, 1))

    def test_known_names_keep_ids_stable(self):
        path = self.write("test.csv", "f,label\n1,dog\n2,bird\n")
        table = load_csv(path, "label", class_names=["cat", "dog"])
        self.assertEqual(list(table.labels), [1, 2])
        self.assertEqual(table.class_names, ["cat", "dog", "bird"])

    def test_csv_source_with_test_file(self):
        train = self.write("train.csv", "f,label,site\n1,a,x\n2,b,y\n3,a,x\n4,b,y\n")
        test = self.write("test.csv", "f,label,site\n5,b,y\n6,a,z\n")
        source = CsvSource(kind="csv", path=train, label_column="label", group_column="site", test_path=test)
        dataset = build_dataset(source, seed=0)
        self.assertEqual(dataset.name, "train")
        self.assertEqual(dataset.n_train, 4)
        self.assertEqual(list(dataset.test_labels), [1, 0])
        self.assertEqual(list(dataset.groups), [1, 2])
        self.assertEqual(dataset.group_names, ["x", "y", "z"])


class ImbalanceTests(unittest.TestCase):
    def test_ratio_arithmetic(self):
        labels = np.repeat(np.arange(10), 5000)
        features = np.arange(len(labels), dtype=float).reshape(-1, 1)
        ratios = [round(0.1 * (c + 1), 1) for c in range(10)]
        X, y = make_imbalanced(features, labels, ratios, seed=0)
        self.assertEqual(list(np.bincount(y)), [500 * (c + 1) for c in range(10)])
        self.assertEqual(len(y), 27500)
        # rows survive verbatim
        np.testing.assert_array_equal(labels[X[:, 0].astype(int)], y)

    def test_default_ratio_ladder(self):
        labels = np.repeat(np.arange(10), 100)
        features = np.arange(len(labels), dtype=float).reshape(-1, 1)
        _, y = make_imbalanced(features, labels, seed=2)
        self.assertEqual(list(np.bincount(y)), [10 * (c + 1) for c in range(10)])

    def test_all_ones_is_identity(self):
        features = np.random.default_rng(0).normal(size=(12, 3))
        labels = np.arange(12) % 3
        X, y = make_imbalanced(features, labels, [1.0, 1.0, 1.0], seed=4)
        np.testing.assert_array_equal(X, features)
        np.testing.assert_array_equal(y, labels)

    def test_same_seed_same_subsample(self):
        features = np.arange(40, dtype=float).reshape(-1, 1)
        labels = np.arange(40) % 2
        a = make_imbalanced(features, labels, [0.5, 0.3], seed=9)
        b = make_imbalanced(features, labels, [0.5, 0.3], seed=9)
        np.testing.assert_array_equal(a[0], b[0])

    def test_empty_class_rejected(self):
        with self.assertRaises(InvalidConfigError):
            make_imbalanced(np.zeros((6, 1)), [0, 0, 0, 1, 1, 1], [1.0, 0.1], seed=0)

    def test_ratio_count_must_match(self):
        with self.assertRaises(InvalidConfigError):
            make_imbalanced(np.zeros((4, 1)), [0, 1, 0, 1], [1.0], seed=0)

    def test_stratified_head(self):
        labels = np.array([0] * 80 + [1] * 20)
        rows = stratified_head(labels, 10)
        self.assertEqual(list(np.bincount(labels[rows])), [8, 2])
        self.assertEqual(list(rows[:8]), list(range(8)))


class SyntheticTests(unittest.TestCase):
    def test_gaussian_class_counts_exact(self):
        X, y = synth_gaussians(25, [[0, 0], [5, 5], [0, 5]], 1.0, seed=0)
        self.assertEqual(X.shape, (75, 2))
        self.assertEqual(list(np.bincount(y)), [25, 25, 25])

    def test_well_separated_gaussians_are_linearly_separable(self):
        X, y = synth_gaussians(200, [[0.0, 0.0], [6.0, 0.0]], 1.0, seed=1)
        cfg = LearnerConfig(hidden_layers=[], epochs=30, dropout_rate=0.0)
        snap = learner.train(cfg, X, y, seed=0)
        self.assertGreater(learner.accuracy(snap, X, y), 0.99)

    def test_zero_per_class_rejected(self):
        with self.assertRaises(InvalidConfigError):
            synth_gaussians(0, [[0, 0], [1, 1]], 1.0, seed=0)

    def test_xor_labels(self):
        X, y = synth_xor(200, 0.0, seed=2)
        np.testing.assert_array_equal(y, (X[:, 0] * X[:, 1] > 0).astype(int))

    def test_rings_sizes_and_radii(self):
        X, y = synth_rings(101, [1.0, 3.0], 0.0, seed=3)
        self.assertEqual(list(np.bincount(y)), [51, 50])
        np.testing.assert_allclose(np.linalg.norm(X[y == 1], axis=1), 3.0)

    def test_seeded(self):
        np.testing.assert_array_equal(synth_xor(50, 0.1, seed=4)[0], synth_xor(50, 0.1, seed=4)[0])


class SplitTests(unittest.TestCase):
    def setUp(self):
        self.features = np.random.default_rng(5).normal(size=(100, 2))
        self.labels = np.array([0] * 70 + [1] * 30)

    def test_zero_fraction_has_empty_test(self):
        result = split(self.features, self.labels, 0.0, seed=0)
        self.assertEqual(len(result.test_labels), 0)
        self.assertEqual(result.n_train, 100)

    def test_test_set_is_stratified(self):
        result = split(self.features, self.labels, 0.2, seed=0)
        counts = np.bincount(result.test_labels)
        self.assertLessEqual(abs(counts[0] - 14), 1)
        self.assertLessEqual(abs(counts[1] - 6), 1)
        self.assertEqual(result.n_train + len(result.test_labels), 100)

    def test_same_seed_same_split(self):
        a = split(self.features, self.labels, 0.3, seed=8)
        b = split(self.features, self.labels, 0.3, seed=8)
        np.testing.assert_array_equal(a.test_features, b.test_features)

    def test_describe(self):
        info = describe_split(split(self.features, self.labels, 0.2, seed=0, name="toy"), m_init=10)
        self.assertEqual(info["name"], "toy")
        self.assertEqual(info["initial"], 10)
        self.assertEqual(info["unlabeled"], 70)
        self.assertEqual(info["test"], 20)
        self.assertEqual(info["train_class_counts"], [56, 24])

    def test_split_seed_pins_every_trial_to_one_split(self):
        source = GaussianSource(kind="synthetic_gaussians", n_per_class=30,
                                means=[[0, 0], [3, 3]], split_seed=11)
        a, b = build_dataset(source, seed=1), build_dataset(source, seed=2)
        np.testing.assert_array_equal(a.train_features, b.train_features)

    def test_imbalance_applied_before_split(self):
        source = XorSource(kind="synthetic_xor", n=400, imbalance_ratios=[1.0, 0.5], test_fraction=0.0)
        dataset = build_dataset(source, seed=0)
        counts = np.bincount(dataset.train_labels)
        self.assertLess(counts[1], counts[0])
        self.assertEqual(dataset.name, "synthetic_xor")


if __name__ == '__main__':
    unittest.main()
