import json
import os
import tempfile
import unittest

from errors import InvalidConfigError
from experiment_config import (StrategyKind, config_from_dict, emit_config, expand_ablation,
                               parse_config, parse_suite)

MINIMAL = {
    "dataset": {"kind": "synthetic_gaussians", "n_per_class": 50, "means": [[0, 0], [3, 3]]},
    "strategy": {"kind": "entropy"},
    "m_init": 10,
    "b": 10,
    "budget": 20,
}


def with_changes(**changes):
    data = json.loads(json.dumps(MINIMAL))
    data.update(changes)
    return data


class ConfigParsingTests(unittest.TestCase):
    def test_minimal_config_gets_defaults(self):
        config = config_from_dict(MINIMAL)
        self.assertEqual(config.trials, 3)
        self.assertEqual(config.strategy.mc_passes, 10)
        self.assertEqual(config.strategy.ceal_delta, 1e-5)
        self.assertEqual(config.strategy.pca_dim, 32)
        self.assertEqual(config.strategy.prefilter_rho, 10)
        self.assertTrue(config.include_round0)
        self.assertEqual(config.strategy.kind, StrategyKind.ENTROPY)

    def test_missing_strategy_named(self):
        data = with_changes()
        del data["strategy"]
        with self.assertRaises(InvalidConfigError) as ctx:
            config_from_dict(data)
        self.assertIn("strategy", str(ctx.exception))

    def test_unknown_key_rejected(self):
        with self.assertRaises(InvalidConfigError) as ctx:
            config_from_dict(with_changes(batchsize=5))
        self.assertIn("batchsize", str(ctx.exception))

    def test_type_mismatch_reports_json_path(self):
        data = with_changes(learner={"epochs": "many"})
        with self.assertRaises(InvalidConfigError) as ctx:
            config_from_dict(data)
        self.assertIn("learner.epochs", str(ctx.exception))

    def test_unknown_strategy_kind(self):
        with self.assertRaises(InvalidConfigError):
            config_from_dict(with_changes(strategy={"kind": "waal"}))

    def test_round_trip(self):
        config = config_from_dict(with_changes(strategy={"kind": "bald", "mc_passes": 4}))
        self.assertEqual(config_from_dict(emit_config(config)), config)

    def test_emitted_config_holds_every_default(self):
        emitted = emit_config(config_from_dict(MINIMAL))
        self.assertEqual(emitted["learner"]["dropout_rate"], 0.3)
        self.assertIn("bim", emitted["strategy"])
        self.assertEqual(emitted["trials"], 3)

    def test_trial_seeds(self):
        config = config_from_dict(with_changes(base_seed=100))
        self.assertEqual([config.trial_seed(i) for i in range(3)], [100, 101, 102])

    def test_bad_layer_sizes(self):
        with self.assertRaises(InvalidConfigError):
            config_from_dict(with_changes(learner={"layer_sizes": [2, 1]}))


class AblationTests(unittest.TestCase):
    def test_grid_expands(self):
        config = config_from_dict(with_changes(name="abl", ablation={"epochs": [5, 15], "b": [10, 20]}))
        expanded = expand_ablation(config)
        self.assertEqual(len(expanded), 4)
        self.assertEqual(expanded[0].name, "abl-e5-b10")
        self.assertEqual((expanded[3].learner.epochs, expanded[3].b), (15, 20))
        self.assertTrue(all(c.ablation is None for c in expanded))

    def test_no_ablation_passes_through(self):
        config = config_from_dict(MINIMAL)
        self.assertEqual(expand_ablation(config), [config])


class FileParsingTests(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def write_json(self, name, data):
        path = os.path.join(self.dir, name)
        with open(path, "w") as f:
            json.dump(data, f)
        return path

    def test_relative_dataset_paths_resolve_against_config(self):
        data = with_changes(dataset={"kind": "csv", "path": "table.csv", "label_column": "y"})
        config = parse_config(self.write_json("exp.json", data))
        self.assertEqual(config.dataset.path, os.path.realpath(os.path.join(self.dir, "table.csv")))

    def test_suite_mixes_paths_and_inline_configs(self):
        self.write_json("a.json", with_changes(name="a"))
        suite = self.write_json("suite.json", {"configs": ["a.json", with_changes(name="b")]})
        self.assertEqual([c.name for c in parse_suite(suite)], ["a", "b"])

    def test_single_config_file_is_a_suite_of_one(self):
        path = self.write_json("one.json", MINIMAL)
        self.assertEqual(len(parse_suite(path)), 1)

    def test_invalid_json(self):
        path = os.path.join(self.dir, "broken.json")
        with open(path, "w") as f:
            f.write("{not json")
        with self.assertRaises(InvalidConfigError):
            parse_config(path)

    def test_missing_file(self):
        with self.assertRaises(InvalidConfigError):
            parse_config(os.path.join(self.dir, "absent.json"))


if __name__ == '__main__':
    unittest.main()
