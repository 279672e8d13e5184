"""
Runner - Multi-trial suites with persisted curves, summaries and AUBC tables

Output layout under each config's output directory::

    <name>/resolved_config.json
    <name>/dataset.json           initial / unlabeled / test / class counts
    <name>/trial_<i>.csv          round,labeled,accuracy
    <name>/summary.json           aubc mean/std, mean final accuracy, full-training accuracy
    <name>/timing.json            wall time (kept apart so the rest is reproducible)
    aubc_table.csv                dataset,method,config,seed,aubc,final_accuracy
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
from tqdm import tqdm

from data_loader import build_dataset, describe_split
from errors import InvalidConfigError
from experiment_config import ExperimentConfig, emit_config, expand_ablation
from experiment_engine import full_baseline, run_experiment
from metrics import FULL_METHOD, aubc, final_accuracy, summarize_trials
from models import DatasetSplit, TrialResult

logger = logging.getLogger(__name__)

CURVE_FLOAT_FORMAT = "%.10f"
TABLE_COLUMNS = ["dataset", "method", "config", "seed", "aubc", "final_accuracy"]


@dataclass
class TrialFailure:
    config_name: str
    trial: int
    seed: int
    message: str


@dataclass
class SuiteSummary:
    """What a suite produced; ``ok`` is false when any trial failed"""
    summaries: Dict[str, dict] = field(default_factory=dict)
    results: Dict[str, List[TrialResult]] = field(default_factory=dict)
    failures: List[TrialFailure] = field(default_factory=list)
    datasets: Dict[str, dict] = field(default_factory=dict)
    full_accuracy: Dict[str, float] = field(default_factory=dict)
    table: Optional[pd.DataFrame] = None
    table_paths: List[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def table_path(self) -> Optional[Path]:
        """Table of the first config's output directory"""
        return self.table_paths[0] if self.table_paths else None


def worker_count(threads: Optional[int] = None) -> int:
    """
    Trial workers: explicit value, else AL_ENGINE_THREADS, else 1

    When AL_ENGINE_THREADS is set it also caps an explicit value.
    """
    raw = os.getenv("AL_ENGINE_THREADS")
    limit = None
    if raw is not None:
        try:
            limit = int(raw)
        except ValueError:
            raise InvalidConfigError(f"AL_ENGINE_THREADS must be an integer, got '{raw}'") from None
    if threads is None:
        threads = limit if limit is not None else 1
    elif limit is not None:
        threads = min(threads, max(1, limit))
    return max(1, threads)

def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def write_curve_csv(result: TrialResult, path: Path):
    frame = pd.DataFrame(result.curve.to_rows(), columns=["round", "labeled", "accuracy"])
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CURVE_FLOAT_FORMAT, lineterminator="\n")


def _dataset_key(config: ExperimentConfig) -> str:
    return json.dumps([config.dataset.model_dump(mode="json"), config.base_seed], sort_keys=True)


def _run_trial(config: ExperimentConfig, dataset: DatasetSplit, trial: int):
    seed = config.trial_seed(trial)
    try:
        return run_experiment(config, dataset, seed=seed)
    except Exception as exc:  # one bad trial must not sink the suite
        logger.exception("trial %d of %s failed", trial, config.name)
        return TrialFailure(config.name, trial, seed, f"{type(exc).__name__}: {exc}")


def _run_baseline(config: ExperimentConfig, dataset: DatasetSplit) -> Optional[float]:
    try:
        return full_baseline(config, dataset, seed=config.base_seed)
    except Exception:
        logger.exception("full-training baseline for %s failed", dataset.name)
        return None


def _write_table(rows: List[dict], path: Path) -> pd.DataFrame:
    table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format=CURVE_FLOAT_FORMAT, lineterminator="\n")
    return table


def run_suite(configs: Sequence[ExperimentConfig], output_dir: Optional[str] = None,
              threads: Optional[int] = None, seed: Optional[int] = None,
              progress: bool = False) -> SuiteSummary:
    """
    Run every trial of every config and persist the results

    Ablation grids are expanded first. All strategies in a suite that share a
    dataset source and base seed see the same split, and trial i of every
    config uses seed base_seed + i, so runs are paired across strategies.
    ``seed`` overrides base_seed for every config.

    Each dataset also gets one full-training reference run (with the learner
    of the first config that asks for it), written to the AUBC table as
    method "full". Every output directory gets its own aubc_table.csv.
    """
    expanded: List[ExperimentConfig] = []
    for config in configs:
        if seed is not None:
            config = config.model_copy(update={"base_seed": seed})
        if output_dir is not None:
            config = config.model_copy(update={"output_dir": output_dir})
        expanded.extend(expand_ablation(config))
    if not expanded:
        raise InvalidConfigError("suite contains no configs")
    names = [c.name for c in expanded]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise InvalidConfigError(f"config names must be unique within a suite: {duplicates}")

    datasets: Dict[str, DatasetSplit] = {}
    baseline_configs: Dict[str, ExperimentConfig] = {}
    for config in expanded:
        key = _dataset_key(config)
        if key not in datasets:
            datasets[key] = build_dataset(config.dataset, config.base_seed)
        if config.full_baseline and key not in baseline_configs:
            baseline_configs[key] = config

    jobs: List[Tuple[ExperimentConfig, int]] = [(c, t) for c in expanded for t in range(c.trials)]
    workers = worker_count(threads)
    logger.info("running %d trials and %d baseline(s) over %d configs with %d worker(s)",
                len(jobs), len(baseline_configs), len(expanded), workers)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        baseline_futures = {key: pool.submit(_run_baseline, c, datasets[key])
                            for key, c in baseline_configs.items()}
        futures = [pool.submit(_run_trial, c, datasets[_dataset_key(c)], t) for c, t in jobs]
        outcomes = [f.result() for f in tqdm(futures, desc="trials", unit="trial",
                                             disable=not progress)]
        baselines = {key: f.result() for key, f in baseline_futures.items()}

    suite = SuiteSummary()
    rows_by_dir: Dict[str, List[dict]] = {}
    for (config, trial), outcome in zip(jobs, outcomes):
        run_dir = Path(config.output_dir) / config.name
        if isinstance(outcome, TrialFailure):
            suite.failures.append(outcome)
            continue
        suite.results.setdefault(config.name, []).append(outcome)
        write_curve_csv(outcome, run_dir / f"trial_{trial}.csv")
        rows_by_dir.setdefault(config.output_dir, []).append({
            "dataset": datasets[_dataset_key(config)].name,
            "method": config.strategy.kind.value,
            "config": config.name,
            "seed": outcome.seed,
            "aubc": aubc(outcome.curve),
            "final_accuracy": final_accuracy(outcome.curve),
        })

    # reference rows go to every output directory that holds a config of that dataset
    reference_targets: Dict[str, List[str]] = {}
    for config in expanded:
        targets = reference_targets.setdefault(_dataset_key(config), [])
        if config.output_dir not in targets:
            targets.append(config.output_dir)
    for key, accuracy in baselines.items():
        if accuracy is None:
            continue
        dataset = datasets[key]
        suite.full_accuracy[dataset.name] = accuracy
        for target in reference_targets[key]:
            rows_by_dir.setdefault(target, []).append({
                "dataset": dataset.name,
                "method": FULL_METHOD,
                "config": FULL_METHOD,
                "seed": baseline_configs[key].base_seed,
                "aubc": accuracy,
                "final_accuracy": accuracy,
            })

    for config in expanded:
        run_dir = Path(config.output_dir) / config.name
        dataset = datasets[_dataset_key(config)]
        description = describe_split(dataset, config.m_init)
        suite.datasets.setdefault(dataset.name, description)
        _write_json(run_dir / "resolved_config.json", emit_config(config))
        _write_json(run_dir / "dataset.json", description)
        results = suite.results.get(config.name, [])
        failed = [f.trial for f in suite.failures if f.config_name == config.name]
        summary = {"config": config.name, "strategy": config.strategy.kind.value,
                   "failed_trials": failed}
        if results:
            summary.update(summarize_trials([r.curve for r in results]))
            pseudo_total = sum(sum(r.pseudo_counts) for r in results)
            if pseudo_total:
                summary["pseudo_label_error_rate"] = (
                    sum(sum(r.pseudo_errors) for r in results) / pseudo_total)
            worst = [r.final_groups.worst for r in results if r.final_groups is not None]
            if worst:
                summary["worst_group_accuracy_mean"] = sum(worst) / len(worst)
        baseline = baselines.get(_dataset_key(config))
        if baseline is not None:
            summary["full_accuracy"] = baseline
        suite.summaries[config.name] = summary
        _write_json(run_dir / "summary.json", summary)
        _write_json(run_dir / "timing.json", {
            "wall_seconds": [r.wall_seconds for r in results],
            "round_seconds": [r.round_seconds for r in results],
        })

    tables = []
    for config in expanded:
        target = config.output_dir
        path = Path(target) / "aubc_table.csv"
        if path in suite.table_paths:
            continue
        tables.append(_write_table(rows_by_dir.get(target, []), path))
        suite.table_paths.append(path)
    suite.table = pd.concat(tables, ignore_index=True) if len(tables) > 1 else tables[0]

    for failure in suite.failures:
        logger.warning("failed: %s trial %d (seed %d): %s",
                       failure.config_name, failure.trial, failure.seed, failure.message)
    return suite
