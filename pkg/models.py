"""
Data Models - Shared records passed between the engine's modules
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from errors import InvalidInputError


@dataclass(frozen=True)
class PoolState:
    """
    Partition of the training indices into labeled / unlabeled sets

    Pseudo-labeled points (CEAL) stay inside ``unlabeled`` and never count
    toward ``spent``.
    """
    labeled: FrozenSet[int]
    unlabeled: FrozenSet[int]
    pseudo: Dict[int, int] = field(default_factory=dict)
    spent: int = 0
    budget_total: int = 0
    m_init: int = 0

    @property
    def n_total(self) -> int:
        return len(self.labeled) + len(self.unlabeled)

    @property
    def remaining_budget(self) -> int:
        return self.budget_total - self.spent

    def labeled_indices(self) -> np.ndarray:
        """Sorted labeled indices"""
        return np.array(sorted(self.labeled), dtype=np.int64)

    def unlabeled_indices(self) -> np.ndarray:
        """Sorted unlabeled indices; candidate positions map through this array"""
        return np.array(sorted(self.unlabeled), dtype=np.int64)

    def pseudo_items(self) -> Tuple[np.ndarray, np.ndarray]:
        """(indices, labels) of the current pseudo set, sorted by index"""
        keys = sorted(self.pseudo)
        return (np.array(keys, dtype=np.int64),
                np.array([self.pseudo[k] for k in keys], dtype=np.int64))


@dataclass(frozen=True)
class AcquisitionBatch:
    """Indices picked in one round, in selection order"""
    indices: Tuple[int, ...]
    scores: Optional[Tuple[float, ...]] = None

    def __len__(self) -> int:
        return len(self.indices)

    @classmethod
    def from_arrays(cls, indices: Sequence[int],
                    scores: Optional[Sequence[float]] = None) -> "AcquisitionBatch":
        idx = tuple(int(i) for i in indices)
        sc = None if scores is None else tuple(float(s) for s in scores)
        return cls(indices=idx, scores=sc)


@dataclass
class DatasetSplit:
    """Train/test arrays plus optional per-test-sample group ids"""
    train_features: np.ndarray
    train_labels: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray
    k: int
    name: str = "dataset"
    groups: Optional[np.ndarray] = None
    group_names: Optional[List[str]] = None
    class_names: Optional[List[str]] = None

    def __post_init__(self):
        self.train_features = np.asarray(self.train_features, dtype=np.float64)
        self.test_features = np.asarray(self.test_features, dtype=np.float64)
        self.train_labels = np.asarray(self.train_labels, dtype=np.int64)
        self.test_labels = np.asarray(self.test_labels, dtype=np.int64)
        if self.train_features.ndim != 2:
            raise InvalidInputError(
                f"train_features must be 2-D, got shape {self.train_features.shape}")
        if self.test_features.ndim != 2:
            self.test_features = self.test_features.reshape(-1, self.train_features.shape[1])
        if self.train_features.shape[1] != self.test_features.shape[1]:
            raise InvalidInputError(
                f"feature width mismatch: train {self.train_features.shape[1]}, "
                f"test {self.test_features.shape[1]}")
        if len(self.train_features) != len(self.train_labels):
            raise InvalidInputError(
                f"{len(self.train_features)} train rows but {len(self.train_labels)} labels")
        if len(self.test_features) != len(self.test_labels):
            raise InvalidInputError(
                f"{len(self.test_features)} test rows but {len(self.test_labels)} labels")
        for part, labels in (("train", self.train_labels), ("test", self.test_labels)):
            if labels.size and (labels.min() < 0 or labels.max() >= self.k):
                raise InvalidInputError(f"{part} labels outside 0..{self.k - 1}")
        if not (np.all(np.isfinite(self.train_features))
                and np.all(np.isfinite(self.test_features))):
            raise InvalidInputError(f"dataset '{self.name}' contains NaN or Inf features")
        if self.groups is not None:
            self.groups = np.asarray(self.groups, dtype=np.int64)
            if len(self.groups) != len(self.test_labels):
                raise InvalidInputError(
                    f"{len(self.groups)} group ids for {len(self.test_labels)} test rows")

    @property
    def n_train(self) -> int:
        return len(self.train_labels)

    @property
    def n_features(self) -> int:
        return self.train_features.shape[1]


@dataclass(frozen=True)
class BudgetCurve:
    """Ordered (labeled_count, accuracy) points; ``first_round`` is the round index of the first point"""
    points: Tuple[Tuple[int, float], ...]
    first_round: int = 0

    def __post_init__(self):
        if len(self.points) < 1:
            raise InvalidInputError("a budget curve needs at least one point")
        xs = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise InvalidInputError(f"labeled counts must be strictly increasing: {xs}")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], first_round: int = 0) -> "BudgetCurve":
        return cls(points=tuple((int(r[0]), float(r[1])) for r in rows), first_round=int(first_round))

    @property
    def labeled_counts(self) -> List[int]:
        return [p[0] for p in self.points]

    @property
    def accuracies(self) -> List[float]:
        return [p[1] for p in self.points]

    def to_rows(self) -> List[Tuple[int, int, float]]:
        """(round, labeled, accuracy) rows for CSV output"""
        return [(i, x, y) for i, (x, y) in enumerate(self.points, start=self.first_round)]


@dataclass
class GroupedAccuracy:
    """Per-group accuracy with worst group and optional pooled subset"""
    per_group: Dict[int, float]
    worst: float
    subset: Optional[float] = None


@dataclass
class TrialResult:
    """Everything one run_experiment call produced"""
    curve: BudgetCurve
    seed: int
    strategy: str
    config_name: str = "experiment"
    rounds: int = 0
    batches: List[Tuple[int, ...]] = field(default_factory=list)
    round_seconds: List[float] = field(default_factory=list)
    pseudo_counts: List[int] = field(default_factory=list)
    pseudo_errors: List[int] = field(default_factory=list)
    worst_group: List[float] = field(default_factory=list)
    final_groups: Optional[GroupedAccuracy] = None
    final_pool: Optional[PoolState] = None
    wall_seconds: float = 0.0

    @property
    def pseudo_error_rate(self) -> float:
        """Fraction of wrong pseudo labels over every round (0 when none issued)"""
        total = sum(self.pseudo_counts)
        return sum(self.pseudo_errors) / total if total else 0.0


@dataclass
class WinTieLossTable:
    """Pairwise win/tie/loss counts per method"""
    counts: Dict[str, Tuple[int, int, int]]

    def score(self, method: str) -> int:
        win, tie, _ = self.counts[method]
        return 2 * win + tie

    def ranking(self) -> List[str]:
        """Methods by descending 2*win + tie, ties broken by name"""
        return sorted(self.counts, key=lambda m: (-self.score(m), m))

    def rows(self) -> List[Tuple[str, int, int, int, int, int]]:
        out = []
        for rank, method in enumerate(self.ranking(), start=1):
            win, tie, loss = self.counts[method]
            out.append((method, win, tie, loss, self.score(method), rank))
        return out
