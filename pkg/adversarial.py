"""
Adversarial - Basic Iterative Method perturbation distance

Untargeted attack against the model's current prediction: repeated steps along
the loss gradient until the predicted label changes. No clipping is applied
since features are standardized rather than pixel-bounded.
"""

import logging
from dataclasses import dataclass

import numpy as np

import learner
from errors import NumericalError
from experiment_config import BimConfig
from learner import LearnerSnapshot

logger = logging.getLogger(__name__)

NO_FLIP = float("inf")


@dataclass(frozen=True)
class BimResult:
    r_norm: float      # l2 size of the perturbation, NO_FLIP when the label never changed
    flipped: bool
    steps: int


def _step_direction(grad: np.ndarray, norm: str) -> np.ndarray:
    if norm == "l2":
        length = np.linalg.norm(grad, axis=1, keepdims=True)
        return np.divide(grad, length, out=np.zeros_like(grad), where=length > 0)
    return np.sign(grad)


def bim_distances(snap: LearnerSnapshot, X, cfg: BimConfig) -> list:
    """Run the attack on every row at once; rows stop moving once they flip"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if not np.all(np.isfinite(X)):
        raise NumericalError("BIM start points must be finite")

    start_labels = learner.predict(snap, X)
    current = X.copy()
    active = np.ones(len(X), dtype=bool)
    steps = np.zeros(len(X), dtype=np.int64)
    flipped = np.zeros(len(X), dtype=bool)

    for step in range(1, cfg.max_steps + 1):
        if not active.any():
            break
        rows = np.flatnonzero(active)
        grad = learner.input_gradients(snap, current[rows], start_labels[rows])
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite input gradient at BIM step {step}")
        current[rows] += cfg.step * _step_direction(grad, cfg.norm)
        steps[rows] = step
        changed = learner.predict(snap, current[rows]) != start_labels[rows]
        flipped[rows[changed]] = True
        active[rows[changed]] = False

    results = []
    for i in range(len(X)):
        if flipped[i]:
            results.append(BimResult(float(np.linalg.norm(current[i] - X[i])), True, int(steps[i])))
        else:
            results.append(BimResult(NO_FLIP, False, int(steps[i])))
    logger.debug("BIM flipped %d of %d points", int(flipped.sum()), len(X))
    return results


def bim_distance(snap: LearnerSnapshot, x, cfg: BimConfig) -> BimResult:
    """Perturbation distance for a single point"""
    return bim_distances(snap, np.asarray(x, dtype=np.float64).reshape(1, -1), cfg)[0]
