"""
Plot Command - Budget-curve SVG from trial CSV files
"""

from pathlib import Path
from typing import Dict, List

import pandas as pd

from errors import FormatError, InvalidInputError
from models import BudgetCurve
from ui.plots import emit_budget_svg
from ui.reports import ReportBuilder


def read_curve(path) -> BudgetCurve:
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise InvalidInputError(f"file not found: {path}") from None
    if not {"labeled", "accuracy"} <= set(frame.columns):
        raise FormatError(f"{path}: curve CSV needs 'labeled' and 'accuracy' columns")
    first_round = int(frame["round"].iloc[0]) if "round" in frame.columns and len(frame) else 0
    return BudgetCurve.from_rows(list(zip(frame["labeled"], frame["accuracy"])), first_round=first_round)


def handle(args) -> int:
    # trial CSVs are grouped by the run directory they sit in
    grouped: Dict[str, List[BudgetCurve]] = {}
    for path in args.curves:
        grouped.setdefault(Path(path).parent.name or "curve", []).append(read_curve(path))
    out = emit_budget_svg(grouped, args.output, title=args.title)
    print(f"{ReportBuilder.OK} Plot written to {out}")
    return 0


def setup(subparsers):
    """Register the `plot` subcommand"""
    parser = subparsers.add_parser("plot", help="draw accuracy-vs-budget curves as SVG")
    parser.add_argument("curves", nargs="+", help="trial_<i>.csv files; one line per run directory")
    parser.add_argument("--output", default="budget_curves.svg")
    parser.add_argument("--title", default="Accuracy vs. labeled budget")
    parser.set_defaults(handler=handle)
