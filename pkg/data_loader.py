"""
Data Loader - Dataset ingestion, synthetic generators and splits

Readers for IDX image/label files and header-driven CSV tables, seeded
synthetic generators, the imbalanced-subsampling rule and stratified
train/test splitting. ``build_dataset`` turns a dataset source config into a
ready DatasetSplit.
"""

import gzip
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config import defaults
from errors import ConsistencyError, FormatError, InvalidConfigError, InvalidInputError
from experiment_config import CsvSource, GaussianSource, IdxSource, RingsSource, XorSource
from models import DatasetSplit

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


# ============================================================
# IDX FILES
# ============================================================

def _read_bytes(path: Union[str, Path]) -> bytes:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise InvalidInputError(f"file not found: {path}") from None
    if raw[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise FormatError(f"{path}: corrupt gzip stream ({exc})") from None
    return raw


def _idx_payload(path, data: bytes, expected_magic: int, n_dims: int) -> Tuple[Tuple[int, ...], np.ndarray]:
    header_size = 4 + 4 * n_dims
    if len(data) < header_size:
        raise FormatError(f"{path}: truncated IDX header")
    magic = struct.unpack(">I", data[:4])[0]
    if magic != expected_magic:
        raise FormatError(f"{path}: IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    dims = struct.unpack(f">{n_dims}I", data[4:header_size])
    count = int(np.prod(dims))
    body = np.frombuffer(data, dtype=np.uint8, offset=header_size)
    if len(body) != count:
        raise FormatError(f"{path}: IDX body has {len(body)} bytes, header promises {count}")
    return dims, body


def load_idx(images_path, labels_path) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read an IDX image tensor and its label vector (gzip or raw)

    Images are flattened row-major and scaled to [0, 1].
    """
    (n_images, rows, cols), pixels = _idx_payload(
        images_path, _read_bytes(images_path), IDX_IMAGES_MAGIC, 3)
    (n_labels,), labels = _idx_payload(
        labels_path, _read_bytes(labels_path), IDX_LABELS_MAGIC, 1)
    if n_images != n_labels:
        raise ConsistencyError(
            f"{images_path} holds {n_images} images but {labels_path} holds {n_labels} labels")
    features = pixels.reshape(n_images, rows * cols).astype(np.float64) / 255.0
    return features, labels.astype(np.int64)


# ============================================================
# CSV FILES
# ============================================================

@dataclass
class CsvTable:
    """Numeric feature matrix plus re-indexed labels / groups"""
    features: np.ndarray
    labels: np.ndarray
    class_names: List[str]
    groups: Optional[np.ndarray] = None
    group_names: Optional[List[str]] = None
    feature_columns: Optional[List[str]] = None


def _index_values(values: Sequence[str], known: Optional[List[str]] = None) -> Tuple[np.ndarray, List[str]]:
    """Map values to 0..m-1 in first-appearance order, extending ``known``"""
    names = list(known or [])
    lookup: Dict[str, int] = {name: i for i, name in enumerate(names)}
    ids = np.empty(len(values), dtype=np.int64)
    for i, value in enumerate(values):
        if value not in lookup:
            lookup[value] = len(names)
            names.append(value)
        ids[i] = lookup[value]
    return ids, names


def load_csv(path, label_column: str, group_column: Optional[str] = None,
             class_names: Optional[List[str]] = None,
             group_names: Optional[List[str]] = None) -> CsvTable:
    """
    Header-driven CSV reader

    Every column other than the label / group columns is a numeric feature.
    Labels (and groups) are numbered by first appearance; pass the names
    from a previous table to keep ids consistent across train and test files.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError:
        raise InvalidInputError(f"file not found: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise FormatError(f"{path}: unreadable CSV ({exc})") from None

    if label_column not in frame.columns:
        raise FormatError(f"{path}: missing label column '{label_column}'")
    if group_column is not None and group_column not in frame.columns:
        raise FormatError(f"{path}: missing group column '{group_column}'")

    feature_columns = [c for c in frame.columns if c not in (label_column, group_column)]
    if not feature_columns:
        raise FormatError(f"{path}: no feature columns")
    numeric = frame[feature_columns].apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna() | ~np.isfinite(numeric.fillna(0.0))
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        column = feature_columns[col]
        raise FormatError(
            f"{path}: non-numeric value '{frame[column].iloc[row]}' at row {row + 1}, column '{column}'")

    labels, class_names = _index_values(frame[label_column].tolist(), class_names)
    groups = None
    if group_column is not None:
        groups, group_names = _index_values(frame[group_column].tolist(), group_names)
    return CsvTable(features=numeric.to_numpy(dtype=np.float64), labels=labels,
                    class_names=class_names, groups=groups,
                    group_names=group_names if group_column is not None else None,
                    feature_columns=feature_columns)


# ============================================================
# SUBSAMPLING
# ============================================================

def make_imbalanced(features, labels, ratios: Optional[Sequence[float]] = None, seed: int = 0,
                    extra: Optional[np.ndarray] = None):
    """
    Class c keeps floor(ratios[c] * count_c) rows, drawn without replacement

    Without ``ratios`` the 10-class ladder from config.defaults is used
    (class 0 keeps 10%, class 9 keeps everything).

    Kept rows stay in their original order and are not modified. ``extra``
    (e.g. group ids) is subsampled alongside.

    Returns:
        (features, labels) or (features, labels, extra)
    """
    features = np.asarray(features)
    labels = np.asarray(labels, dtype=np.int64)
    if ratios is None:
        ratios = defaults.IMBALANCED_RATIOS
    k = int(labels.max()) + 1 if len(labels) else 0
    if len(ratios) != k:
        raise InvalidConfigError(f"need one ratio per class: {len(ratios)} ratios for {k} classes")
    rng = np.random.default_rng(seed)
    keep = []
    for c, ratio in enumerate(ratios):
        if not 0.0 < ratio <= 1.0:
            raise InvalidConfigError(f"ratio for class {c} must be in (0, 1], got {ratio}")
        members = np.flatnonzero(labels == c)
        quota = int(math.floor(ratio * len(members) + 1e-9))
        if quota == 0:
            raise InvalidConfigError(f"class {c} would be empty after subsampling (ratio {ratio})")
        keep.append(rng.choice(members, size=quota, replace=False))
    kept = np.sort(np.concatenate(keep))
    if extra is None:
        return features[kept], labels[kept]
    return features[kept], labels[kept], np.asarray(extra)[kept]


def stratified_head(labels, n: int) -> np.ndarray:
    """Row indices of a class-proportional subset made of each class's first rows"""
    labels = np.asarray(labels, dtype=np.int64)
    if n >= len(labels):
        return np.arange(len(labels))
    classes, counts = np.unique(labels, return_counts=True)
    keep = []
    for c, count in zip(classes, counts):
        quota = max(1, int(round(n * count / len(labels))))
        keep.append(np.flatnonzero(labels == c)[:quota])
    return np.sort(np.concatenate(keep))


# ============================================================
# SYNTHETIC GENERATORS
# ============================================================

def synth_gaussians(n_per_class: int, means, shared_std: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Isotropic Gaussian blob per class with a shared standard deviation"""
    means = np.asarray(means, dtype=np.float64)
    if n_per_class < 1:
        raise InvalidConfigError(f"n_per_class must be positive, got {n_per_class}")
    if means.ndim != 2 or len(means) < 2:
        raise InvalidConfigError("means must list at least two class centres")
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(m, shared_std, size=(n_per_class, means.shape[1])) for m in means])
    y = np.repeat(np.arange(len(means)), n_per_class)
    return X, y


def synth_xor(n: int, noise: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform points on [-1, 1]^2, class 1 where the coordinates share a sign"""
    if n < 1:
        raise InvalidConfigError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    clean = rng.uniform(-1.0, 1.0, size=(n, 2))
    y = (clean[:, 0] * clean[:, 1] > 0).astype(np.int64)
    return clean + rng.normal(0.0, noise, size=clean.shape), y


def synth_rings(n: int, radii: Sequence[float], noise: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Concentric noisy circles; ring r is class r and gets n // len(radii) points (remainder to the first rings)"""
    if n < len(radii) or len(radii) < 2:
        raise InvalidConfigError(f"need at least two rings and one point per ring (n={n})")
    rng = np.random.default_rng(seed)
    sizes = [n // len(radii) + (1 if r < n % len(radii) else 0) for r in range(len(radii))]
    parts, labels = [], []
    for cls, (radius, size) in enumerate(zip(radii, sizes)):
        angle = rng.uniform(0.0, 2.0 * np.pi, size)
        r = radius + rng.normal(0.0, noise, size)
        parts.append(np.column_stack([r * np.cos(angle), r * np.sin(angle)]))
        labels.append(np.full(size, cls))
    return np.concatenate(parts), np.concatenate(labels).astype(np.int64)


# ============================================================
# SPLITTING
# ============================================================

def split(features, labels, test_fraction: float, seed: int, groups=None,
          k: Optional[int] = None, name: str = "dataset") -> DatasetSplit:
    """
    Stratified train/test split

    Each class contributes round(test_fraction * count) rows to the test
    set. ``groups`` holds one group id per input row; the test rows' ids are
    kept on the split.
    """
    if not 0.0 <= test_fraction < 1.0:
        raise InvalidConfigError(f"test_fraction must be in [0, 1), got {test_fraction}")
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    test_rows = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        take = int(round(test_fraction * len(members)))
        take = min(take, len(members) - 1) if len(members) > 1 else 0
        test_rows.append(rng.permutation(members)[:take])
    test_idx = np.sort(np.concatenate(test_rows)) if test_rows else np.array([], dtype=np.int64)
    is_test = np.zeros(len(labels), dtype=bool)
    is_test[test_idx] = True
    train_idx = np.flatnonzero(~is_test)
    return DatasetSplit(
        train_features=features[train_idx],
        train_labels=labels[train_idx],
        test_features=features[test_idx].reshape(-1, features.shape[1]),
        test_labels=labels[test_idx],
        k=k if k is not None else int(labels.max()) + 1,
        name=name,
        groups=None if groups is None else np.asarray(groups)[test_idx],
    )


def describe_split(split_: DatasetSplit, m_init: int = 0) -> Dict[str, object]:
    """Initial / unlabeled / test / class counts of a split"""
    counts = np.bincount(split_.train_labels, minlength=split_.k)
    return {
        "name": split_.name,
        "initial": int(m_init),
        "unlabeled": int(split_.n_train - m_init),
        "test": int(len(split_.test_labels)),
        "classes": int(split_.k),
        "features": int(split_.n_features),
        "train_class_counts": [int(c) for c in counts],
    }


# ============================================================
# CONFIG-DRIVEN CONSTRUCTION
# ============================================================

def _finish(source, X, y, groups, seed: int, name: str, k: Optional[int] = None,
            test=None) -> DatasetSplit:
    """Imbalance, subsample, then split (or attach an explicit test set)"""
    if source.imbalance_ratios is not None:
        if groups is not None and test is None:
            X, y, groups = make_imbalanced(X, y, source.imbalance_ratios, seed, extra=groups)
        else:
            X, y = make_imbalanced(X, y, source.imbalance_ratios, seed)
    if source.subsample is not None:
        rows = stratified_head(y, source.subsample)
        X, y = X[rows], y[rows]
        if groups is not None and test is None:
            groups = groups[rows]
    if test is None:
        return split(X, y, source.test_fraction, seed, groups=groups, k=k, name=name)
    test_X, test_y, test_groups = test
    k = k if k is not None else int(max(y.max(), test_y.max() if len(test_y) else 0)) + 1
    return DatasetSplit(train_features=X, train_labels=y, test_features=test_X,
                        test_labels=test_y, k=k, name=name, groups=test_groups)


def build_dataset(source, seed: int) -> DatasetSplit:
    """
    Resolve a dataset source config into a DatasetSplit

    ``source.split_seed`` (when set) replaces ``seed`` for generation,
    subsampling and splitting so every trial sees the same split.
    """
    seed = source.split_seed if source.split_seed is not None else seed
    name = source.name or source.kind
    if isinstance(source, GaussianSource):
        X, y = synth_gaussians(source.n_per_class, source.means, source.shared_std, seed)
        split_ = _finish(source, X, y, None, seed, name, k=len(source.means))
    elif isinstance(source, XorSource):
        X, y = synth_xor(source.n, source.noise, seed)
        split_ = _finish(source, X, y, None, seed, name, k=2)
    elif isinstance(source, RingsSource):
        X, y = synth_rings(source.n, source.radii, source.noise, seed)
        split_ = _finish(source, X, y, None, seed, name, k=len(source.radii))
    elif isinstance(source, IdxSource):
        name = source.name or Path(source.train_images).name.split(".")[0]
        X, y = load_idx(source.train_images, source.train_labels)
        test = None
        if source.test_images and source.test_labels:
            test_X, test_y = load_idx(source.test_images, source.test_labels)
            test = (test_X, test_y, None)
        split_ = _finish(source, X, y, None, seed, name, test=test)
    elif isinstance(source, CsvSource):
        name = source.name or Path(source.path).stem
        table = load_csv(source.path, source.label_column, source.group_column)
        test = None
        class_names, group_names = table.class_names, table.group_names
        if source.test_path:
            test_table = load_csv(source.test_path, source.label_column, source.group_column,
                                  class_names=table.class_names, group_names=table.group_names)
            class_names, group_names = test_table.class_names, test_table.group_names
            test = (test_table.features, test_table.labels, test_table.groups)
        split_ = _finish(source, table.features, table.labels, table.groups, seed, name,
                         k=max(2, len(class_names)), test=test)
        split_.class_names = class_names
        split_.group_names = group_names
    else:
        raise InvalidConfigError(f"unsupported dataset kind '{getattr(source, 'kind', source)}'")

    logger.info("dataset %s: %d train / %d test, %d features, %d classes",
                split_.name, split_.n_train, len(split_.test_labels), split_.n_features, split_.k)
    return split_
