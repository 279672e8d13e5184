"""
Pool Manager - Labeled / unlabeled bookkeeping with budget accounting
"""

import logging
from typing import Dict, Optional

import numpy as np

from errors import BudgetError, ConsistencyError, InvalidConfigError
from models import AcquisitionBatch, PoolState

logger = logging.getLogger(__name__)


def init_pool(n_train: int, m_init: int, seed: int, budget_total: int = 0) -> PoolState:
    """
    Draw the initial labeled set uniformly without replacement

    Args:
        n_train: Number of training points in the pool
        m_init: Size of the initial labeled set
        seed: RNG seed for the draw
        budget_total: Oracle labels available after the initial set (Q)
    """
    if m_init < 1 or m_init > n_train:
        raise InvalidConfigError(f"m_init must be in [1, {n_train}], got {m_init}")
    if budget_total < 0:
        raise InvalidConfigError(f"budget must be non-negative, got {budget_total}")

    rng = np.random.default_rng(seed)
    chosen = rng.choice(n_train, size=m_init, replace=False)
    labeled = frozenset(int(i) for i in chosen)
    unlabeled = frozenset(range(n_train)) - labeled
    return PoolState(labeled=labeled, unlabeled=unlabeled, pseudo={}, spent=0,
                     budget_total=budget_total, m_init=m_init)


def validate_batch(pool: PoolState, batch: AcquisitionBatch):
    """Raise if the batch could not be applied to this pool"""
    seen = set()
    for index in batch.indices:
        if index in seen:
            raise ConsistencyError(f"index {index} appears twice in the batch")
        seen.add(index)
        if index not in pool.unlabeled:
            raise ConsistencyError(f"index {index} is not in the unlabeled pool")
    if pool.spent + len(batch) > pool.budget_total:
        raise BudgetError(
            f"batch of {len(batch)} exceeds remaining budget "
            f"{pool.budget_total - pool.spent} (spent {pool.spent} of {pool.budget_total})")


def apply_selection(pool: PoolState, batch: AcquisitionBatch) -> PoolState:
    """Move the batch into the labeled set; the oracle label wins over any pseudo label"""
    validate_batch(pool, batch)
    moved = frozenset(batch.indices)
    pseudo = {i: c for i, c in pool.pseudo.items() if i not in moved}
    return PoolState(
        labeled=pool.labeled | moved,
        unlabeled=pool.unlabeled - moved,
        pseudo=pseudo,
        spent=pool.spent + len(batch),
        budget_total=pool.budget_total,
        m_init=pool.m_init,
    )


def replace_pseudo(pool: PoolState, pseudo: Optional[Dict[int, int]]) -> PoolState:
    """Swap in a freshly derived pseudo set (never merged with the previous one)"""
    pseudo = dict(pseudo or {})
    stray = [i for i in pseudo if i not in pool.unlabeled]
    if stray:
        raise ConsistencyError(f"pseudo labels for indices outside the unlabeled pool: {stray[:5]}")
    return PoolState(
        labeled=pool.labeled,
        unlabeled=pool.unlabeled,
        pseudo=pseudo,
        spent=pool.spent,
        budget_total=pool.budget_total,
        m_init=pool.m_init,
    )


def check_invariants(pool: PoolState, n_train: int):
    """Raise ConsistencyError when the pool partition or accounting is broken"""
    if pool.labeled & pool.unlabeled:
        raise ConsistencyError("labeled and unlabeled sets overlap")
    if pool.n_total != n_train:
        raise ConsistencyError(f"pool covers {pool.n_total} of {n_train} points")
    if not set(pool.pseudo) <= pool.unlabeled:
        raise ConsistencyError("pseudo-labeled points must stay in the unlabeled pool")
    if not 0 <= pool.spent <= pool.budget_total:
        raise ConsistencyError(f"spent {pool.spent} outside [0, {pool.budget_total}]")
    if pool.spent != len(pool.labeled) - pool.m_init:
        raise ConsistencyError(
            f"spent {pool.spent} != labeled {len(pool.labeled)} - m_init {pool.m_init}")
