"""
Plot Builders - Accuracy-vs-budget line charts saved as SVG
"""

from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from errors import InvalidInputError
from metrics import summarize_trials
from models import BudgetCurve

CURVE_GID_PREFIX = "budget-curve-"
REFERENCE_GID_PREFIX = "full-reference-"

# fixed hash salt and no date stamp keep the SVG bytes identical across runs;
# fonttype "none" keeps labels as <text> elements
SVG_RC = {
    "svg.hashsalt": "al-engine",
    "svg.fonttype": "none",
}


class BudgetPlotBuilder:
    """Lays out one averaged line per method with an AUBC legend"""

    FIGSIZE = (8.0, 5.0)

    def __init__(self, title: str = "Accuracy vs. labeled budget"):
        self.title = title
        self.series: List[Tuple[str, np.ndarray, np.ndarray, Dict]] = []
        self.references: List[Tuple[str, float]] = []

    def add_method(self, label: str, curves: Sequence[BudgetCurve]):
        """Average the trials of one method; every trial must share one grid"""
        if not curves:
            raise InvalidInputError(f"no curves for '{label}'")
        summary = summarize_trials(curves)
        xs = np.array(curves[0].labeled_counts, dtype=np.float64)
        ys = np.mean([c.accuracies for c in curves], axis=0)
        self.series.append((label, xs, ys, summary))
        return self

    def add_reference(self, label: str, accuracy: float):
        """Horizontal line, e.g. the full-training accuracy of a dataset"""
        self.references.append((label, float(accuracy)))
        return self

    def build(self):
        """Returns the matplotlib figure; the caller closes it"""
        if not self.series:
            raise InvalidInputError("nothing to plot")
        fig, ax = plt.subplots(figsize=self.FIGSIZE)
        for i, (label, xs, ys, summary) in enumerate(self.series):
            ax.plot(xs, ys, "o-", label=legend_label(label, summary), linewidth=1.8,
                    markersize=3, gid=f"{CURVE_GID_PREFIX}{i}")
        for i, (label, accuracy) in enumerate(self.references):
            ax.axhline(accuracy, color="grey", ls="--", lw=1.0,
                       label=f"{label} ({accuracy:.4f})", gid=f"{REFERENCE_GID_PREFIX}{i}")
        ax.set_xlabel("labeled samples")
        ax.set_ylabel("test accuracy")
        ax.set_title(self.title)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8, loc="lower right", framealpha=0.9)
        fig.tight_layout()
        return fig


def legend_label(label: str, summary: Dict) -> str:
    """e.g. 'random (0.6000 ± 0.1000)'"""
    return f"{label} ({summary['aubc_mean']:.4f} ± {summary['aubc_std']:.4f})"


def emit_budget_svg(curves_by_method: Dict[str, Sequence[BudgetCurve]],
                    path: Union[str, Path], title: str = "Accuracy vs. labeled budget",
                    references: Optional[Mapping[str, float]] = None) -> Path:
    """Write one SVG chart with a line and AUBC legend entry per method"""
    path = Path(path)
    with plt.rc_context(SVG_RC):
        builder = BudgetPlotBuilder(title)
        for label, curves in curves_by_method.items():
            builder.add_method(label, list(curves))
        for label, accuracy in (references or {}).items():
            builder.add_reference(f"full: {label}", accuracy)
        fig = builder.build()
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return path
