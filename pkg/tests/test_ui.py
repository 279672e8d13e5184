import os
import tempfile
import unittest
import xml.etree.ElementTree as ET

from errors import InvalidInputError
from models import BudgetCurve, WinTieLossTable
from ui.plots import CURVE_GID_PREFIX, REFERENCE_GID_PREFIX, emit_budget_svg
from ui.reports import ReportBuilder

SVG_NS = "{http://www.w3.org/2000/svg}"


def curve(*accuracies, step=10):
    return BudgetCurve.from_rows([(i * step, a) for i, a in enumerate(accuracies)])


def groups_with_prefix(path, prefix):
    root = ET.parse(path).getroot()
    return [g for g in root.iter(f"{SVG_NS}g") if g.get("id", "").startswith(prefix)]


class BudgetSvgTests(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self._tmp.name, "plots", "curves.svg")

    def tearDown(self):
        self._tmp.cleanup()

    def test_single_curve_single_line(self):
        emit_budget_svg({"random": [curve(0.5, 0.6, 0.7)]}, self.path)
        self.assertEqual(len(groups_with_prefix(self.path, CURVE_GID_PREFIX)), 1)

    def test_legend_shows_aubc_mean_and_std(self):
        emit_budget_svg({"random": [curve(0.5, 0.5), curve(0.7, 0.7)]}, self.path)
        texts = [t.text for t in ET.parse(self.path).getroot().iter(f"{SVG_NS}text")]
        self.assertIn("random (0.6000 ± 0.1000)", texts)

    def test_one_line_per_method(self):
        emit_budget_svg({"a": [curve(0.5, 0.6)], "b": [curve(0.4, 0.8)], "c": [curve(0.6, 0.6)]}, self.path)
        self.assertEqual(len(groups_with_prefix(self.path, CURVE_GID_PREFIX)), 3)

    def test_reference_line(self):
        emit_budget_svg({"a": [curve(0.5, 0.6)]}, self.path, references={"blobs": 0.95})
        self.assertEqual(len(groups_with_prefix(self.path, REFERENCE_GID_PREFIX)), 1)
        self.assertEqual(len(groups_with_prefix(self.path, CURVE_GID_PREFIX)), 1)

    def test_output_is_byte_identical_across_runs(self):
        curves = {"a": [curve(0.5, 0.6, 0.65)], "b": [curve(0.4, 0.8, 0.9), curve(0.5, 0.7, 0.9)]}
        other = os.path.join(self._tmp.name, "again.svg")
        emit_budget_svg(curves, self.path)
        emit_budget_svg(curves, other)
        with open(self.path, "rb") as f, open(other, "rb") as g:
            self.assertEqual(f.read(), g.read())

    def test_mismatched_grids_rejected(self):
        with self.assertRaises(InvalidInputError):
            emit_budget_svg({"a": [curve(0.5, 0.6), curve(0.5, 0.6, step=20)]}, self.path)

    def test_nothing_to_plot(self):
        with self.assertRaises(InvalidInputError):
            emit_budget_svg({}, self.path)


class ReportBuilderTests(unittest.TestCase):
    def test_accuracy_bar(self):
        self.assertEqual(ReportBuilder.accuracy_bar(0.5, segments=4), "██░░")
        self.assertEqual(ReportBuilder.accuracy_bar(1.7, segments=2), "██")

    def test_config_summary(self):
        line = ReportBuilder.config_summary("margin-run", {
            "aubc_mean": 0.8123, "aubc_std": 0.01, "final_accuracy_mean": 0.9, "failed_trials": [2]})
        self.assertIn("AUBC 0.8123 ± 0.0100", line)
        self.assertIn("failed trials [2]", line)

    def test_all_failed_summary(self):
        line = ReportBuilder.config_summary("bad", {"failed_trials": [0, 1, 2]})
        self.assertTrue(line.startswith(ReportBuilder.FAIL))

    def test_dataset_and_reference_lines(self):
        line = ReportBuilder.dataset_summary({"name": "blobs", "initial": 6, "unlabeled": 58,
                                              "test": 16, "classes": 2, "train_class_counts": [32, 32]})
        self.assertIn("blobs: 6 initial, 58 unlabeled, 16 test, 2 classes (32, 32)", line)
        self.assertIn("full training set accuracy 0.9500", ReportBuilder.full_reference("blobs", 0.95))

    def test_league_lines(self):
        lines = ReportBuilder.league_table(WinTieLossTable(counts={"a": (1, 0, 0), "b": (0, 0, 1)}))
        self.assertEqual(len(lines), 3)
        self.assertIn("score 2", lines[1])


if __name__ == '__main__':
    unittest.main()
