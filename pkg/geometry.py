"""
Geometry - Clustering and projection primitives for the representative strategies
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.cluster.hierarchy import cut_tree, linkage
from scipy.spatial.distance import cdist

from config import defaults
from errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass
class ClusterResult:
    """Lloyd output; ``objective_history`` holds the (weighted) inertia after each assignment"""
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    iterations: int = 0
    objective_history: List[float] = field(default_factory=list)


@dataclass
class PcaResult:
    basis: np.ndarray        # dim x d, columns sorted by descending eigenvalue
    projected: np.ndarray    # n x d
    mean: np.ndarray
    eigenvalues: np.ndarray


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise InvalidInputError(f"points must be an n x d matrix, got shape {X.shape}")
    return X


def pairwise_sq_dist(A, B) -> np.ndarray:
    """Squared Euclidean distances, |A| x |B|"""
    return cdist(_as_points(A), _as_points(B), metric="sqeuclidean")


def cosine_similarity(A, B=None) -> np.ndarray:
    """Cosine similarity matrix; zero vectors are dissimilar to everything"""
    A = _as_points(A)
    B = A if B is None else _as_points(B)
    norm_a = np.linalg.norm(A, axis=1)
    norm_b = np.linalg.norm(B, axis=1)
    safe_a = np.where(norm_a > 0, norm_a, 1.0)
    safe_b = np.where(norm_b > 0, norm_b, 1.0)
    sim = (A / safe_a[:, None]) @ (B / safe_b[:, None]).T
    return np.clip(sim, -1.0, 1.0)


# ============================================================
# K-MEANS
# ============================================================

def kmeans_pp_seeding(points, k: int, seed: int, weights=None) -> List[int]:
    """
    k-means++ seeding: first seed proportional to weight, then to weight * D^2

    Returns k distinct row indices in the order they were drawn. When every
    remaining point has zero D^2 (exact duplicates of chosen seeds) the next
    seed is drawn by weight among the unchosen points.
    """
    X = _as_points(points)
    n = len(X)
    if k < 1 or k > n:
        raise InvalidInputError(f"cannot draw {k} seeds from {n} points")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,) or np.any(w < 0) or not np.any(w > 0):
        raise InvalidInputError("weights must be non-negative with at least one positive entry")
    if np.ptp(w) == 0:
        w = np.ones(n)

    rng = np.random.default_rng(seed)
    chosen = [int(rng.choice(n, p=w / w.sum()))]
    available = np.ones(n, dtype=bool)
    available[chosen[0]] = False
    closest = pairwise_sq_dist(X, X[chosen[0]:chosen[0] + 1])[:, 0]

    while len(chosen) < k:
        mass = w * closest * available
        if mass.sum() <= 0:
            mass = w * available
            if mass.sum() <= 0:
                mass = available.astype(np.float64)
        nxt = int(rng.choice(n, p=mass / mass.sum()))
        chosen.append(nxt)
        available[nxt] = False
        closest = np.minimum(closest, pairwise_sq_dist(X, X[nxt:nxt + 1])[:, 0])
    return chosen


def _assign(X: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    dist = pairwise_sq_dist(X, centroids)
    # argmin keeps the lowest cluster id on ties
    assignment = np.argmin(dist, axis=1)
    return assignment, dist[np.arange(len(X)), assignment]


def kmeans(points, k: int, seed: int, max_iter: int = defaults.KMEANS_MAX_ITER,
           tol: float = defaults.KMEANS_TOL, weights=None) -> ClusterResult:
    """
    Lloyd iterations from k-means++ seeds

    Stops when the largest centroid shift drops below ``tol`` or after
    ``max_iter`` updates. An empty cluster is re-seeded at the point farthest
    from its current centroid.
    """
    X = _as_points(points)
    n = len(X)
    if k < 1 or k > n:
        raise InvalidInputError(f"cannot form {k} clusters from {n} points")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.ptp(w) == 0:
        w = np.ones(n)

    centroids = X[kmeans_pp_seeding(X, k, seed, weights=weights)].copy()
    assignment, dist = _assign(X, centroids)
    history = [float(np.sum(w * dist))]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        updated = centroids.copy()
        taken = set()
        for c in range(k):
            members = assignment == c
            if np.any(members) and w[members].sum() > 0:
                updated[c] = np.average(X[members], axis=0, weights=w[members])
            else:
                order = np.argsort(-dist, kind="stable")
                far = next(int(i) for i in order if int(i) not in taken)
                taken.add(far)
                updated[c] = X[far]
                logger.debug("re-seeded empty cluster %d at point %d", c, far)
        shift = float(np.max(np.linalg.norm(updated - centroids, axis=1)))
        centroids = updated
        assignment, dist = _assign(X, centroids)
        history.append(float(np.sum(w * dist)))
        if shift < tol:
            break

    return ClusterResult(centroids=centroids, assignment=assignment,
                         inertia=float(dist.sum()), iterations=iterations,
                         objective_history=history)


def nearest_to_centroids(points, centroids) -> List[int]:
    """For each centroid the nearest point not already taken (next-nearest on collisions)"""
    dist = pairwise_sq_dist(centroids, points)
    taken = set()
    picks = []
    for row in dist:
        for index in np.argsort(row, kind="stable"):
            if int(index) not in taken:
                taken.add(int(index))
                picks.append(int(index))
                break
    return picks


# ============================================================
# HIERARCHICAL
# ============================================================

def hac_average_linkage(points, target_clusters: int) -> np.ndarray:
    """
    Average-linkage agglomeration down to ``target_clusters`` clusters

    Cluster ids are numbered by first appearance in input order.
    """
    X = _as_points(points)
    n = len(X)
    if target_clusters < 1 or target_clusters > n:
        raise InvalidInputError(f"target_clusters must be in [1, {n}], got {target_clusters}")
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    tree = linkage(X, method="average", metric="euclidean")
    raw = cut_tree(tree, n_clusters=target_clusters).ravel()
    relabel = {}
    for label in raw:
        relabel.setdefault(int(label), len(relabel))
    return np.array([relabel[int(label)] for label in raw], dtype=np.int64)


# ============================================================
# PROJECTION
# ============================================================

def pca(points, d: int) -> PcaResult:
    """
    Mean-centred PCA onto the top ``d`` covariance eigenvectors

    Each basis vector is signed so its largest-magnitude component is
    non-negative. ``d`` above the input dimension is clamped.
    """
    X = _as_points(points)
    n, dim = X.shape
    d = max(1, min(d, dim))
    mean = X.mean(axis=0)
    centred = X - mean
    cov = centred.T @ centred / max(n - 1, 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(-eigenvalues, kind="stable")[:d]
    basis = eigenvectors[:, order]
    for j in range(d):
        pivot = np.argmax(np.abs(basis[:, j]))
        if basis[pivot, j] < 0:
            basis[:, j] = -basis[:, j]
    return PcaResult(basis=basis, projected=centred @ basis, mean=mean,
                     eigenvalues=eigenvalues[order])
