"""
Score Command - Standalone acquisition scorer over a probability CSV
"""

import numpy as np
import pandas as pd

from acquisition import POINTWISE_KINDS, score_bald, score_meanstd, score_mc_pointwise, score_pointwise
from errors import InvalidConfigError, InvalidInputError
from learner import McProbTensor

MC_KINDS = {"entropy_d": "entropy", "margin_d": "margin", "least_conf_d": "least_conf"}


def read_probs(path) -> np.ndarray:
    """Numeric CSV of probability rows; a non-numeric first row is treated as a header"""
    try:
        frame = pd.read_csv(path, header=None, dtype=str, skipinitialspace=True)
    except FileNotFoundError:
        raise InvalidInputError(f"file not found: {path}") from None
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    if len(numeric) and numeric.iloc[0].isna().all():
        numeric = numeric.iloc[1:]
    if numeric.isna().to_numpy().any():
        raise InvalidInputError(f"{path}: probability CSV has non-numeric cells")
    return numeric.to_numpy(dtype=np.float64)


def score_rows(kind: str, probs: np.ndarray, passes: int = 1) -> np.ndarray:
    """Scores for each sample; MC kinds read ``passes`` consecutive blocks of rows"""
    if kind in POINTWISE_KINDS:
        return np.atleast_1d(score_pointwise(kind, probs))
    if kind not in MC_KINDS and kind not in ("bald", "mean_std"):
        raise InvalidConfigError(f"strategy '{kind}' has no standalone probability score")
    if passes < 1 or len(probs) % passes:
        raise InvalidInputError(f"{len(probs)} rows do not split into {passes} passes")
    mc = McProbTensor(probs.reshape(passes, len(probs) // passes, probs.shape[1]))
    if kind == "bald":
        return score_bald(mc)
    if kind == "mean_std":
        return score_meanstd(mc)
    return score_mc_pointwise(MC_KINDS[kind], mc)


def handle(args) -> int:
    for value in score_rows(args.strategy, read_probs(args.probs), args.passes):
        print(f"{value:.6f}")
    return 0


def setup(subparsers):
    """Register the `score` subcommand"""
    parser = subparsers.add_parser("score", help="score probability rows with one strategy")
    parser.add_argument("--strategy", required=True, help="scorer name, e.g. entropy or bald")
    parser.add_argument("--probs", required=True, help="CSV with one probability vector per row")
    parser.add_argument("--passes", type=int, default=1,
                        help="MC passes stacked as consecutive row blocks (bald, mean_std, *_d)")
    parser.set_defaults(handler=handle)
