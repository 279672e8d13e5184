"""
Metrics - Budget curves, AUBC, grouped accuracy and method comparison
"""

import io
import itertools
import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from config import defaults
from errors import InvalidInputError
from models import BudgetCurve, GroupedAccuracy, WinTieLossTable

logger = logging.getLogger(__name__)


def _as_curve(curve) -> BudgetCurve:
    if isinstance(curve, BudgetCurve):
        return curve
    return BudgetCurve.from_rows(curve)


def aubc(curve) -> float:
    """
    Area under the budget curve, normalized by the labeled-count range

    Trapezoid rule over raw labeled counts; a one-point curve returns its
    accuracy.
    """
    curve = _as_curve(curve)
    if len(curve.points) == 1:
        return curve.points[0][1]
    x = np.array(curve.labeled_counts, dtype=np.float64)
    y = np.array(curve.accuracies, dtype=np.float64)
    area = float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2.0))
    return area / float(x[-1] - x[0])


def final_accuracy(curve) -> float:
    return _as_curve(curve).points[-1][1]


def grouped_accuracy(predictions, labels, groups,
                     subset: Optional[Iterable[int]] = None) -> GroupedAccuracy:
    """
    Per-group accuracy, worst group and pooled accuracy over ``subset``

    Groups named in ``subset`` with no samples are skipped with a warning.
    """
    predictions = np.asarray(predictions).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    groups = np.asarray(groups).reshape(-1)
    if not (len(predictions) == len(labels) == len(groups)):
        raise InvalidInputError(
            f"length mismatch: {len(predictions)} predictions, {len(labels)} labels, "
            f"{len(groups)} groups")
    correct = predictions == labels
    per_group = {int(g): float(np.mean(correct[groups == g])) for g in np.unique(groups)}
    worst = min(per_group.values()) if per_group else 0.0

    pooled = None
    if subset is not None:
        wanted = [int(g) for g in subset]
        for g in wanted:
            if g not in per_group:
                logger.warning("group %d has no test samples; excluded", g)
        mask = np.isin(groups, wanted)
        pooled = float(np.mean(correct[mask])) if mask.any() else None
    return GroupedAccuracy(per_group=per_group, worst=worst, subset=pooled)


def paired_t_test(a, b) -> Tuple[float, float]:
    """
    Two-sided paired t-test on a - b, df = n - 1

    Zero variance of the differences returns the sentinels p = 1 (all
    differences zero, t = 0) or p = 0 (constant non-zero difference, t = +/-inf).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError(f"paired samples must be equal-length vectors, got {a.shape} and {b.shape}")
    if len(a) < 2:
        raise InvalidInputError("paired t-test needs at least two pairs")
    diff = a - b
    sd = float(np.std(diff, ddof=1))
    mean = float(np.mean(diff))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return (float("inf") if mean > 0 else float("-inf")), 0.0
    t = mean / (sd / np.sqrt(len(diff)))
    p = 2.0 * stats.t.sf(abs(t), df=len(diff) - 1)
    return float(t), float(p)


def pairwise_t_tests(aubc_by_method: Mapping[str, Sequence[float]]) -> pd.DataFrame:
    """Paired t-test of every method against every other over matched runs"""
    rows = []
    for a, b in itertools.permutations(sorted(aubc_by_method), 2):
        t, p = paired_t_test(aubc_by_method[a], aubc_by_method[b])
        rows.append({"method_a": a, "method_b": b, "t": t, "p": p})
    return pd.DataFrame(rows, columns=["method_a", "method_b", "t", "p"])


def win_tie_loss(aubc_table: Mapping[str, Mapping[str, float]],
                 margin: float = defaults.WIN_TIE_LOSS_MARGIN) -> WinTieLossTable:
    """
    Aggregate pairwise outcomes over datasets

    ``aubc_table[dataset][method]`` holds AUBC values. A wins against B on a
    dataset when aubc_A > aubc_B + margin and loses when aubc_A < aubc_B - margin.
    Only methods present on a dataset are compared there.
    """
    methods = sorted({m for row in aubc_table.values() for m in row})
    counts = {m: [0, 0, 0] for m in methods}
    for dataset, row in aubc_table.items():
        for a, b in itertools.permutations(sorted(row), 2):
            if row[a] > row[b] + margin:
                counts[a][0] += 1
            elif row[a] < row[b] - margin:
                counts[a][2] += 1
            else:
                counts[a][1] += 1
    return WinTieLossTable(counts={m: tuple(c) for m, c in counts.items()})


def league_table_frame(table: WinTieLossTable) -> pd.DataFrame:
    return pd.DataFrame(table.rows(), columns=["method", "win", "tie", "loss", "score", "rank"])


def league_table_csv(table: WinTieLossTable) -> str:
    """CSV text: method,win,tie,loss,score,rank"""
    buf = io.StringIO()
    league_table_frame(table).to_csv(buf, index=False, lineterminator="\n")
    return buf.getvalue()


def summarize_trials(curves: Sequence) -> Dict[str, float]:
    """Mean / population std of AUBC and mean F-acc across trials on one grid"""
    curves = [_as_curve(c) for c in curves]
    if not curves:
        raise InvalidInputError("no curves to summarize")
    grid = curves[0].labeled_counts
    for c in curves[1:]:
        if c.labeled_counts != grid:
            raise InvalidInputError("trial curves have different labeled-count grids")
    scores = np.array([aubc(c) for c in curves])
    finals = np.array([final_accuracy(c) for c in curves])
    return {
        "aubc_mean": float(scores.mean()),
        "aubc_std": float(scores.std()),
        "final_accuracy_mean": float(finals.mean()),
        "trials": len(curves),
    }


FULL_METHOD = "full"


def comparison_labels(frame: pd.DataFrame) -> pd.Series:
    """
    Label each AUBC-table row for method comparisons

    Rows keep their method name unless one dataset holds several configs of
    that method (an ablation grid, say); those rows are labeled by config name
    so the configs are compared instead of averaged together.
    """
    methods = frame["method"].astype(str)
    if "config" not in frame.columns:
        return methods
    configs = frame["config"].astype(str)
    distinct = configs.groupby([frame["dataset"], methods]).transform("nunique")
    return methods.where(distinct <= 1, configs)


def _comparable(frame: pd.DataFrame) -> pd.DataFrame:
    """Strategy rows only (the full-training reference is not a competitor), labeled"""
    missing = {"dataset", "method", "aubc"} - set(frame.columns)
    if missing:
        raise InvalidInputError(f"AUBC table is missing columns: {sorted(missing)}")
    rows = frame[frame["method"].astype(str) != FULL_METHOD]
    return rows.assign(label=comparison_labels(rows))


def aubc_table_from_frame(frame: pd.DataFrame) -> Dict[str, Dict[str, float]]:
    """
    Pivot a suite AUBC table (dataset, method[, config], aubc[, seed]) into
    {dataset: {label: mean aubc}}, labels as in comparison_labels
    """
    rows = _comparable(frame)
    means = rows.groupby(["dataset", "label"], sort=True)["aubc"].mean()
    table: Dict[str, Dict[str, float]] = {}
    for (dataset, label), value in means.items():
        table.setdefault(str(dataset), {})[str(label)] = float(value)
    return table


def paired_samples_from_frame(frame: pd.DataFrame) -> Dict[str, List[float]]:
    """Per-label AUBC vectors matched on (dataset, seed); only complete matches kept"""
    if "seed" not in frame.columns:
        raise InvalidInputError("AUBC table has no 'seed' column to pair runs on")
    rows = _comparable(frame)
    wide = rows.pivot_table(index=["dataset", "seed"], columns="label",
                            values="aubc", aggfunc="mean").dropna()
    return {str(m): wide[m].tolist() for m in sorted(wide.columns)}


def full_reference_from_frame(frame: pd.DataFrame) -> Dict[str, float]:
    """{dataset: full-training test accuracy} from the reference rows, if any"""
    if "method" not in frame.columns:
        return {}
    rows = frame[frame["method"].astype(str) == FULL_METHOD]
    column = "final_accuracy" if "final_accuracy" in rows.columns else "aubc"
    means = rows.groupby("dataset", sort=True)[column].mean()
    return {str(dataset): float(value) for dataset, value in means.items()}
