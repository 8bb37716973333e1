"""Bits shared by both trainable components."""
from __future__ import annotations

import math

import numpy as np


class EarlyStopping:
    """Stop once ``patience`` consecutive evaluations score below the best.

    Readings equal to the best reset the counter but do not replace the
    stored best. Stopping is only allowed from ``min_epochs`` on.
    """

    def __init__(self, patience: int = 3, min_epochs: int = 0):
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.patience = patience
        self.min_epochs = min_epochs
        self.best = -math.inf
        self.best_epoch = -1
        self.low_readings = 0
        self.history: list[tuple[int, float]] = []

    def update(self, score: float, epoch: int) -> bool:
        """Record a reading; return True if it is a new best."""
        self.history.append((epoch, score))
        if score > self.best:
            self.best, self.best_epoch = score, epoch
            self.low_readings = 0
            return True
        if score < self.best:
            self.low_readings += 1
        else:
            self.low_readings = 0
        return False

    def should_stop(self, epoch: int) -> bool:
        return epoch >= self.min_epochs and self.low_readings >= self.patience


def hits1_from_scores(scores: np.ndarray) -> float:
    """H@1 for a square matrix whose gold pairs lie on the diagonal."""
    if scores.shape[0] == 0:
        return 0.0
    return float(np.mean(np.argmax(scores, axis=1) == np.arange(scores.shape[0])))


def batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]
