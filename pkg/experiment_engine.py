"""
Experiment Engine - The acquire, label, retrain loop for one trial
"""

import logging
import math
import time
from typing import Optional, Tuple

import numpy as np

import learner
from acquisition import prepare_context, query
from errors import InvalidConfigError
from experiment_config import ExperimentConfig, StrategyKind
from learner import LearnerSnapshot
from metrics import grouped_accuracy
from models import BudgetCurve, DatasetSplit, PoolState, TrialResult
from pool_manager import apply_selection, check_invariants, init_pool, replace_pseudo

logger = logging.getLogger(__name__)


def round_seed(trial_seed: int, round_index: int) -> int:
    """Independent 32-bit seed for one round of one trial"""
    entropy = (trial_seed & 0xFFFFFFFF, round_index)
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _check_compatible(config: ExperimentConfig, dataset: DatasetSplit):
    unlabeled = dataset.n_train - config.m_init
    if config.m_init > dataset.n_train:
        raise InvalidConfigError(
            f"m_init {config.m_init} exceeds the {dataset.n_train} training points")
    if config.budget > unlabeled:
        raise InvalidConfigError(
            f"budget {config.budget} exceeds the {unlabeled} points left unlabeled")
    if config.strategy.kind == StrategyKind.LPL and not config.learner.loss_head:
        raise InvalidConfigError("strategy 'lpl' needs learner.loss_head = true")


def _training_set(pool: PoolState, dataset: DatasetSplit) -> Tuple[np.ndarray, np.ndarray]:
    """Labeled rows plus pseudo-labeled rows with their pseudo labels"""
    labeled = pool.labeled_indices()
    pseudo_idx, pseudo_labels = pool.pseudo_items()
    X = dataset.train_features[np.concatenate([labeled, pseudo_idx])]
    y = np.concatenate([dataset.train_labels[labeled], pseudo_labels])
    return X, y


def _fit(config: ExperimentConfig, pool: PoolState, dataset: DatasetSplit, seed: int) -> LearnerSnapshot:
    cfg = config.learner.resolved(dataset.n_features, dataset.k)
    X, y = _training_set(pool, dataset)
    # standardization statistics come from the truly labeled rows only
    n_labeled = len(pool.labeled)
    if cfg.loss_head:
        return learner.train_with_loss_head(cfg, X, y, seed=seed, stats_rows=n_labeled)
    return learner.train(cfg, X, y, seed=seed, stats_rows=n_labeled)


def run_experiment(config: ExperimentConfig, dataset: DatasetSplit,
                   seed: Optional[int] = None) -> TrialResult:
    """
    Run one trial: initial pool, then ceil(Q / b) acquisition rounds

    The learner is retrained from a fresh seeded initialization every round.
    The last round asks for Q mod b points when b does not divide Q. The
    curve holds one test-set point per round, including round 0 unless
    ``include_round0`` is off and at least one round ran.
    """
    seed = config.trial_seed(0) if seed is None else seed
    _check_compatible(config, dataset)
    started = time.perf_counter()

    pool = init_pool(dataset.n_train, config.m_init, seed, budget_total=config.budget)
    n_rounds = math.ceil(config.budget / config.b) if config.budget else 0
    result = TrialResult(curve=None, seed=seed, strategy=config.strategy.kind.value,
                         config_name=config.name, rounds=n_rounds)
    points = []

    def evaluate(snap: LearnerSnapshot, round_index: int):
        predictions = learner.predict(snap, dataset.test_features)
        acc = float(np.mean(predictions == dataset.test_labels)) if len(dataset.test_labels) else 0.0
        points.append((len(pool.labeled), acc))
        if dataset.groups is not None and len(dataset.test_labels):
            groups = grouped_accuracy(predictions, dataset.test_labels, dataset.groups,
                                      subset=config.mismatch_groups)
            result.worst_group.append(groups.worst)
            result.final_groups = groups
        logger.info("[%s seed=%d] round %d: %d labeled, accuracy %.4f",
                    config.name, seed, round_index, len(pool.labeled), acc)

    round_start = time.perf_counter()
    snap = _fit(config, pool, dataset, round_seed(seed, 0))
    evaluate(snap, 0)
    result.round_seconds.append(time.perf_counter() - round_start)
    context = prepare_context(config.strategy, snap, dataset) if n_rounds else None

    for round_index in range(1, n_rounds + 1):
        round_start = time.perf_counter()
        b = min(config.b, pool.remaining_budget)
        batch, pseudo = query(config.strategy, snap, pool, dataset, b,
                              round_seed(seed, round_index), context)
        pool = apply_selection(pool, batch)
        if pseudo is not None:
            pool = replace_pseudo(pool, pseudo)
            pseudo_idx, pseudo_labels = pool.pseudo_items()
            result.pseudo_counts.append(len(pseudo_idx))
            result.pseudo_errors.append(
                int(np.sum(dataset.train_labels[pseudo_idx] != pseudo_labels)))
        check_invariants(pool, dataset.n_train)
        result.batches.append(batch.indices)

        snap = _fit(config, pool, dataset, round_seed(seed, round_index))
        evaluate(snap, round_index)
        result.round_seconds.append(time.perf_counter() - round_start)

    first_round = 0
    if not config.include_round0 and len(points) > 1:
        points = points[1:]
        first_round = 1
        if result.worst_group:
            result.worst_group = result.worst_group[1:]
    result.curve = BudgetCurve.from_rows(points, first_round=first_round)
    result.final_pool = pool
    result.wall_seconds = time.perf_counter() - started
    return result


def full_baseline(config: ExperimentConfig, dataset: DatasetSplit, seed: Optional[int] = None) -> float:
    """Test accuracy of the learner trained once on the whole training set"""
    seed = config.trial_seed(0) if seed is None else seed
    cfg = config.learner.resolved(dataset.n_features, dataset.k)
    snap = learner.train(cfg, dataset.train_features, dataset.train_labels, seed=round_seed(seed, 0))
    return learner.accuracy(snap, dataset.test_features, dataset.test_labels)
