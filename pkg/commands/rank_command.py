"""
Rank Command - Win/tie/loss league table from a suite AUBC table
"""

import sys
from pathlib import Path

import pandas as pd

from config import defaults
from errors import InvalidInputError
from metrics import (aubc_table_from_frame, full_reference_from_frame, league_table_csv,
                     paired_samples_from_frame, pairwise_t_tests, win_tie_loss)
from ui.reports import ReportBuilder


def handle(args) -> int:
    try:
        frame = pd.read_csv(args.table)
    except FileNotFoundError:
        raise InvalidInputError(f"file not found: {args.table}") from None
    table = win_tie_loss(aubc_table_from_frame(frame), margin=args.margin)
    text = league_table_csv(table)
    sys.stdout.write(text)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")

    if args.report:
        for line in ReportBuilder.league_table(table):
            print(line)
        for dataset, accuracy in full_reference_from_frame(frame).items():
            print(ReportBuilder.full_reference(dataset, accuracy))

    if args.t_tests:
        tests = pairwise_t_tests(paired_samples_from_frame(frame))
        for line in ReportBuilder.t_tests(tests.to_dict("records")):
            print(line)
    return 0


def setup(subparsers):
    """Register the `rank` subcommand"""
    parser = subparsers.add_parser("rank", help="rank methods by win/tie/loss over an AUBC table")
    parser.add_argument("table", help="aubc_table.csv written by `run`")
    parser.add_argument("--margin", type=float, default=defaults.WIN_TIE_LOSS_MARGIN,
                        help="absolute AUBC margin for a win (default 0.005)")
    parser.add_argument("--output", default=None, help="also write the league CSV here")
    parser.add_argument("--report", action="store_true",
                        help="also print the ranked table and full-training references")
    parser.add_argument("--t-tests", action="store_true",
                        help="print paired t-tests between methods (needs a seed column)")
    parser.set_defaults(handler=handle)
