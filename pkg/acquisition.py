"""
Acquisition - Querying strategies

Scorers map probabilities to "larger = more informative" values; selectors
turn scores or embeddings into an AcquisitionBatch of pool indices.
``query`` dispatches a StrategyConfig against a trained snapshot.

Every selector takes candidate positions in the order of ``indices`` (the
sorted unlabeled pool indices), so picking the smaller position on a tie is
the same as picking the smaller pool index.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.special import entr

import learner
from adversarial import bim_distances
from config import defaults
from errors import InvalidConfigError, InvalidInputError
from experiment_config import BimConfig, StrategyConfig, StrategyKind
from geometry import (cosine_similarity, hac_average_linkage, kmeans, kmeans_pp_seeding,
                      nearest_to_centroids, pairwise_sq_dist, pca)
from learner import LearnerSnapshot, McProbTensor
from models import AcquisitionBatch, DatasetSplit, PoolState

logger = logging.getLogger(__name__)

POINTWISE_KINDS = ("entropy", "margin", "least_conf", "var_ratio")


# ============================================================
# SCORERS
# ============================================================

def _check_probs(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0):
        raise InvalidInputError("probabilities must be non-negative")
    if p.size and not np.allclose(p.sum(axis=-1), 1.0, rtol=0.0, atol=1e-6):
        raise InvalidInputError("probability vectors must sum to 1")
    return p


def score_pointwise(kind: str, p):
    """
    Entropy / margin / least-confidence / variation-ratio score

    ``p`` is one probability vector (returns a float) or an n x k matrix
    (returns n scores). Natural log; 0 * ln 0 counts as 0.
    """
    kind = StrategyKind(kind).value if isinstance(kind, StrategyKind) else kind
    probs = _check_probs(p)
    single = probs.ndim == 1
    probs = np.atleast_2d(probs)
    if kind == "entropy":
        scores = entr(probs).sum(axis=1)
    elif kind == "margin":
        top2 = -np.sort(-probs, axis=1)[:, :2]
        scores = -(top2[:, 0] - top2[:, 1])
    elif kind == "least_conf":
        scores = -probs.max(axis=1)
    elif kind == "var_ratio":
        scores = 1.0 - probs.max(axis=1)
    else:
        raise InvalidConfigError(f"'{kind}' is not a pointwise score")
    return float(scores[0]) if single else scores


def _passes(mc) -> np.ndarray:
    return mc.passes if isinstance(mc, McProbTensor) else McProbTensor(np.asarray(mc)).passes


def score_mc_pointwise(kind: str, mc) -> np.ndarray:
    """Pointwise score of the per-sample mean over the MC passes"""
    return score_pointwise(kind, _passes(mc).mean(axis=0))


def score_bald(mc) -> np.ndarray:
    """Mutual information: H[mean prediction] - mean over passes of H[pass]"""
    passes = _passes(mc)
    if passes.shape[0] < 2:
        logger.warning("BALD with %d MC pass is degenerate; scoring every point 0", passes.shape[0])
        return np.zeros(passes.shape[1])
    total = entr(passes.mean(axis=0)).sum(axis=1)
    expected = entr(passes).sum(axis=2).mean(axis=0)
    return total - expected


def score_meanstd(mc) -> np.ndarray:
    """Class-averaged population std of the probabilities across passes"""
    return _passes(mc).std(axis=0).mean(axis=1)


# ============================================================
# SELECTORS
# ============================================================

def _candidates(n: int, indices) -> np.ndarray:
    if indices is None:
        return np.arange(n, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    if len(indices) != n:
        raise InvalidInputError(f"{len(indices)} indices for {n} candidates")
    return indices


def _rank(scores: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Positions by descending score, smaller pool index first on ties"""
    scores = np.where(np.isnan(scores), -np.inf, scores)
    return np.lexsort((indices, -scores))


def select_top_b(scores, b: int, indices=None) -> AcquisitionBatch:
    """The b largest scores; b beyond the candidate count selects everything"""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    indices = _candidates(len(scores), indices)
    order = _rank(scores, indices)[:max(0, min(b, len(scores)))]
    return AcquisitionBatch.from_arrays(indices[order], scores[order])


def select_random(pool: PoolState, b: int, seed: int) -> AcquisitionBatch:
    candidates = pool.unlabeled_indices()
    rng = np.random.default_rng(seed)
    picked = rng.choice(candidates, size=min(b, len(candidates)), replace=False)
    return AcquisitionBatch.from_arrays(picked)


def select_kmeans(embeddings, b: int, seed: int, indices=None) -> AcquisitionBatch:
    """k-means with k=b, then the point nearest each centroid"""
    X = np.asarray(embeddings, dtype=np.float64)
    indices = _candidates(len(X), indices)
    k = min(b, len(X))
    if k == 0:
        return AcquisitionBatch(indices=())
    if k == len(X):
        return AcquisitionBatch.from_arrays(indices)
    result = kmeans(X, k, seed)
    return AcquisitionBatch.from_arrays(indices[nearest_to_centroids(X, result.centroids)])


def _min_sq_dist(points: np.ndarray, refs: np.ndarray, chunk: int = 1024) -> np.ndarray:
    out = np.full(len(points), np.inf)
    for start in range(0, len(refs), chunk):
        out = np.minimum(out, pairwise_sq_dist(points, refs[start:start + chunk]).min(axis=1))
    return out


def select_kcenter(embeddings_labeled, embeddings_unlabeled, b: int,
                   pca_dim: int = defaults.PCA_DIM, indices=None) -> AcquisitionBatch:
    """
    Greedy k-center on PCA-projected embeddings

    Each pick maximizes the distance to its nearest labeled or already
    picked point. With no labeled points the first pick is the unlabeled
    point farthest from its nearest unlabeled neighbour.
    """
    U = np.asarray(embeddings_unlabeled, dtype=np.float64)
    L = np.asarray(embeddings_labeled, dtype=np.float64).reshape(-1, U.shape[1])
    indices = _candidates(len(U), indices)
    count = min(b, len(U))
    if count == 0:
        return AcquisitionBatch(indices=())

    projected = pca(np.vstack([L, U]), pca_dim).projected
    L, U = projected[:len(L)], projected[len(L):]

    picks = []
    if len(L):
        closest = _min_sq_dist(U, L)
    else:
        among = pairwise_sq_dist(U, U)
        np.fill_diagonal(among, np.inf)
        first = int(np.argmax(among.min(axis=1)))
        picks.append(first)
        closest = pairwise_sq_dist(U, U[first:first + 1])[:, 0]
    taken = np.zeros(len(U), dtype=bool)
    taken[picks] = True
    while len(picks) < count:
        nxt = int(np.argmax(np.where(taken, -np.inf, closest)))
        picks.append(nxt)
        taken[nxt] = True
        closest = np.minimum(closest, pairwise_sq_dist(U, U[nxt:nxt + 1])[:, 0])
    return AcquisitionBatch.from_arrays(indices[picks])


def select_badge(grad_embeddings, b: int, seed: int, indices=None) -> AcquisitionBatch:
    """The k-means++ seeds over gradient embeddings are the batch"""
    G = np.asarray(grad_embeddings, dtype=np.float64)
    indices = _candidates(len(G), indices)
    k = min(b, len(G))
    if k == 0:
        return AcquisitionBatch(indices=())
    return AcquisitionBatch.from_arrays(indices[kmeans_pp_seeding(G, k, seed)])


def _prefilter_size(b: int, rho: float, n: int) -> int:
    return min(n, int(math.ceil(rho * b)))


def select_cluster_margin(scores, cluster_assignment, b: int,
                          rho: float = defaults.PREFILTER_FACTOR, indices=None) -> AcquisitionBatch:
    """
    Round-robin over clusters of the lowest-margin candidates

    ``scores`` are margin scores (larger = smaller margin). The top
    ceil(rho * b) candidates are grouped by cluster; clusters are visited in
    ascending candidate-count order (best-ranked member first on ties), each visit taking
    its best remaining member.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    assignment = np.asarray(cluster_assignment, dtype=np.int64).reshape(-1)
    if len(assignment) != len(scores):
        raise InvalidInputError(f"{len(assignment)} cluster ids for {len(scores)} candidates")
    indices = _candidates(len(scores), indices)
    count = min(b, len(scores))
    shortlist = _rank(scores, indices)[:_prefilter_size(b, rho, len(scores))]

    groups: Dict[int, list] = {}
    for position in shortlist:
        groups.setdefault(int(assignment[position]), []).append(int(position))
    # stable sort: equal-size clusters keep the rank order of their best member
    visit = sorted(groups, key=lambda c: len(groups[c]))

    picks = []
    cursor = {c: 0 for c in visit}
    while len(picks) < count:
        for cluster in visit:
            if cursor[cluster] < len(groups[cluster]):
                picks.append(groups[cluster][cursor[cluster]])
                cursor[cluster] += 1
                if len(picks) == count:
                    break
    return AcquisitionBatch.from_arrays(indices[picks], scores[picks])


def select_dbal(scores, embeddings, b: int, rho: float = defaults.PREFILTER_FACTOR,
                seed: int = 0, indices=None) -> AcquisitionBatch:
    """
    Prefilter by uncertainty, then weighted k-means over the survivors

    Weights are score - min(score) + 1e-12. Returns the point nearest each
    centre.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    X = np.asarray(embeddings, dtype=np.float64)
    indices = _candidates(len(scores), indices)
    shortlist = _rank(scores, indices)[:_prefilter_size(b, rho, len(scores))]
    k = min(b, len(shortlist))
    if k == len(shortlist):
        return AcquisitionBatch.from_arrays(indices[shortlist], scores[shortlist])
    kept = scores[shortlist]
    weights = kept - kept.min() + 1e-12
    result = kmeans(X[shortlist], k, seed, weights=weights)
    picks = shortlist[nearest_to_centroids(X[shortlist], result.centroids)]
    return AcquisitionBatch.from_arrays(indices[picks], scores[picks])


def select_ceal(probs, b: int, delta: float = defaults.CEAL_THRESHOLD,
                indices=None) -> Tuple[AcquisitionBatch, Dict[int, int]]:
    """
    Entropy top-b plus pseudo labels for confident points

    pseudo = {i: argmax p_i} for every non-selected candidate with
    entropy strictly below delta.
    """
    probs = _check_probs(probs)
    indices = _candidates(len(probs), indices)
    entropy = score_pointwise("entropy", probs)
    batch = select_top_b(entropy, b, indices)
    chosen = set(batch.indices)
    labels = np.argmax(probs, axis=1)
    pseudo = {int(indices[i]): int(labels[i]) for i in np.flatnonzero(entropy < delta)
              if int(indices[i]) not in chosen}
    return batch, pseudo


def select_exploit_explore(scores, b: int, beta: float = defaults.EXPLOIT_EXPLORE_BETA,
                           similarity=None, embeddings=None, indices=None) -> AcquisitionBatch:
    """
    Greedy set building: maximize score(x) - beta / (|S| + 1) * sum_{s in S} sim(x, s)

    Pass either a full ``similarity`` matrix or ``embeddings``, in which
    case cosine similarity rows are computed as points are picked.
    """
    if beta < 0:
        raise InvalidConfigError(f"beta must be non-negative, got {beta}")
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    indices = _candidates(len(scores), indices)
    if similarity is not None:
        sim_matrix = np.asarray(similarity, dtype=np.float64)
        row: Callable[[int], np.ndarray] = lambda i: sim_matrix[i]
    elif embeddings is not None:
        emb = np.asarray(embeddings, dtype=np.float64)
        row = lambda i: cosine_similarity(emb[i:i + 1], emb)[0]
    else:
        raise InvalidInputError("select_exploit_explore needs similarity or embeddings")

    count = min(b, len(scores))
    order = np.argsort(indices, kind="stable")
    sim_sum = np.zeros(len(scores))
    taken = np.zeros(len(scores), dtype=bool)
    picks = []
    for _ in range(count):
        value = scores - (beta / (len(picks) + 1)) * sim_sum
        value = np.where(taken, -np.inf, value)
        # argmax over index-sorted positions keeps the smaller pool index on ties
        best = int(order[np.argmax(value[order])])
        picks.append(best)
        taken[best] = True
        sim_sum += row(best)
    return AcquisitionBatch.from_arrays(indices[picks], scores[picks])


def select_adv_bim(snap: LearnerSnapshot, features, b: int, bim: Optional[BimConfig] = None,
                   indices=None) -> AcquisitionBatch:
    """Smallest adversarial perturbations first; points that never flip score -inf"""
    X = np.asarray(features, dtype=np.float64)
    indices = _candidates(len(X), indices)
    if len(X) == 0:
        return AcquisitionBatch(indices=())
    results = bim_distances(snap, X, bim or BimConfig())
    scores = np.array([-r.r_norm if r.flipped else -np.inf for r in results])
    return select_top_b(scores, b, indices)


def select_lpl(predicted_losses, b: int, indices=None) -> AcquisitionBatch:
    return select_top_b(predicted_losses, b, indices)


# ============================================================
# DISPATCH
# ============================================================

@dataclass
class AcquisitionContext:
    """Per-experiment preprocessing shared by every round"""
    cluster_assignment: Optional[np.ndarray] = None


def prepare_context(strategy: StrategyConfig, snap: LearnerSnapshot,
                    dataset: DatasetSplit) -> AcquisitionContext:
    """
    One-off preprocessing before the first acquisition round

    Cluster-Margin clusters the round-0 embeddings of the whole training
    pool once; default cluster count is ceil(n / 10).
    """
    if strategy.kind != StrategyKind.CLUSTER_MARGIN:
        return AcquisitionContext()
    n = dataset.n_train
    target = strategy.hac_clusters or int(math.ceil(n * defaults.HAC_CLUSTER_FRACTION))
    target = max(1, min(target, n))
    assignment = hac_average_linkage(learner.embed(snap, dataset.train_features), target)
    logger.info("cluster_margin: %d HAC clusters over %d training points", target, n)
    return AcquisitionContext(cluster_assignment=assignment)


_MC_BASE = {
    StrategyKind.ENTROPY_D: "entropy",
    StrategyKind.MARGIN_D: "margin",
    StrategyKind.LEAST_CONF_D: "least_conf",
}


def query(strategy: StrategyConfig, snap: LearnerSnapshot, pool: PoolState, dataset: DatasetSplit,
          b: int, seed: int, context: Optional[AcquisitionContext] = None
          ) -> Tuple[AcquisitionBatch, Optional[Dict[int, int]]]:
    """
    Run one acquisition round

    Returns:
        (batch, pseudo) where pseudo is a fresh pseudo-label map for CEAL and
        None for every other strategy
    """
    kind = strategy.kind
    idx = pool.unlabeled_indices()
    X_u = dataset.train_features[idx]
    b = min(b, len(idx))
    if b == 0:
        return AcquisitionBatch(indices=()), ({} if kind == StrategyKind.CEAL_ENTROPY else None)

    if kind == StrategyKind.RANDOM:
        return select_random(pool, b, seed), None
    if kind.value in POINTWISE_KINDS:
        return select_top_b(score_pointwise(kind.value, learner.predict_proba(snap, X_u)), b, idx), None
    if kind in _MC_BASE:
        mc = learner.mc_predict(snap, X_u, strategy.mc_passes, seed)
        return select_top_b(score_mc_pointwise(_MC_BASE[kind], mc), b, idx), None
    if kind == StrategyKind.BALD:
        return select_top_b(score_bald(learner.mc_predict(snap, X_u, strategy.mc_passes, seed)), b, idx), None
    if kind == StrategyKind.MEAN_STD:
        return select_top_b(score_meanstd(learner.mc_predict(snap, X_u, strategy.mc_passes, seed)), b, idx), None
    if kind == StrategyKind.CEAL_ENTROPY:
        return select_ceal(learner.predict_proba(snap, X_u), b, strategy.ceal_delta, idx)
    if kind == StrategyKind.KMEANS:
        return select_kmeans(learner.embed(snap, X_u), b, seed, idx), None
    if kind == StrategyKind.KCENTER:
        labeled = learner.embed(snap, dataset.train_features[pool.labeled_indices()])
        return select_kcenter(labeled, learner.embed(snap, X_u), b, strategy.pca_dim, idx), None
    if kind == StrategyKind.BADGE:
        return select_badge(learner.grad_embedding(snap, X_u), b, seed, idx), None
    if kind == StrategyKind.CLUSTER_MARGIN:
        if context is None or context.cluster_assignment is None:
            context = prepare_context(strategy, snap, dataset)
        margins = score_pointwise("margin", learner.predict_proba(snap, X_u))
        return select_cluster_margin(margins, context.cluster_assignment[idx], b,
                                     strategy.prefilter_rho, idx), None
    if kind == StrategyKind.DBAL:
        margins = score_pointwise("margin", learner.predict_proba(snap, X_u))
        return select_dbal(margins, learner.embed(snap, X_u), b, strategy.prefilter_rho, seed, idx), None
    if kind == StrategyKind.EXPLOIT_EXPLORE:
        entropy = score_pointwise("entropy", learner.predict_proba(snap, X_u))
        return select_exploit_explore(entropy, b, strategy.beta,
                                      embeddings=learner.embed(snap, X_u), indices=idx), None
    if kind == StrategyKind.ADV_BIM:
        return select_adv_bim(snap, X_u, b, strategy.bim, idx), None
    if kind == StrategyKind.LPL:
        return select_lpl(learner.predict_loss(snap, X_u), b, idx), None
    raise InvalidConfigError(f"unknown strategy kind '{kind}'")
