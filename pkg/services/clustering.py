from __future__ import annotations
import logging
from typing import Tuple

import numpy as np
from sklearn.cluster import kmeans_plusplus

from models.schemas import KMeansConfig
from .graphs import Labels

logger = logging.getLogger(__name__)


def _sq_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # direct differences keep distances translation invariant
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _centroids(x: np.ndarray, labels: np.ndarray, K: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=K).astype(float)
    sums = np.zeros((K, x.shape[1]))
    np.add.at(sums, labels, x)
    return sums / np.maximum(counts, 1.0)[:, None]


def _repair_empty(x: np.ndarray, labels: np.ndarray, cost: np.ndarray, K: int) -> np.ndarray:
    """Move the point farthest from its centroid into each empty cluster."""
    labels = labels.copy()
    cost = cost.copy()
    for c in np.flatnonzero(np.bincount(labels, minlength=K) == 0):
        counts = np.bincount(labels, minlength=K)
        movable = counts[labels] > 1
        p = int(np.argmax(np.where(movable, cost, -1.0)))
        labels[p] = c
        cost[p] = 0.0
    return labels


def _settle(x: np.ndarray, labels: np.ndarray, cost: np.ndarray, K: int) -> Tuple[np.ndarray, float]:
    """Final labels with every cluster non-empty, and the inertia of that partition."""
    repaired = _repair_empty(x, labels, cost, K)
    if np.array_equal(repaired, labels):
        return labels, float(cost.sum())
    return repaired, float(((x - _centroids(x, repaired, K)[repaired]) ** 2).sum())


def _lloyd(x: np.ndarray, cfg: KMeansConfig, seed: int) -> Tuple[np.ndarray, float, int]:
    centers, _ = kmeans_plusplus(x, cfg.K, random_state=seed, n_local_trials=1)
    previous = np.inf
    for it in range(1, cfg.max_iter + 1):
        d2 = _sq_distances(x, centers)
        labels = d2.argmin(axis=1)
        cost = d2[np.arange(len(x)), labels]
        inertia = float(cost.sum())
        assert inertia <= previous * (1 + 1e-9) + 1e-12, f"inertia rose at iteration {it}"
        if np.isfinite(previous) and previous - inertia <= cfg.tol * previous:
            return (*_settle(x, labels, cost, cfg.K), it)
        previous = inertia
        centers = _centroids(x, _repair_empty(x, labels, cost, cfg.K), cfg.K)
    return (*_settle(x, labels, cost, cfg.K), cfg.max_iter)


def kmeans(points: np.ndarray, cfg: KMeansConfig) -> Tuple[Labels, float]:
    """Lloyd's algorithm with k-means++ seeding; the best of n_init restarts by inertia.

    Restart seeds are drawn from `cfg.seed`, ties between restarts keep the earliest.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n == 0:
        raise ValueError("no points to cluster")
    if cfg.K > n:
        raise ValueError(f"K = {cfg.K} exceeds the number of points ({n})")
    if np.all(x == x[0]):
        if cfg.K > 1:
            logger.warning("all %d points are identical; returning a single cluster", n)
        return Labels(np.zeros(n, dtype=int), cfg.K), 0.0

    seeds = np.random.default_rng(cfg.seed).integers(0, 2 ** 31 - 1, size=cfg.n_init)
    best_labels, best_inertia = None, np.inf
    for r, s in enumerate(seeds):
        labels, inertia, iters = _lloyd(x, cfg, int(s))
        logger.debug("kmeans restart %d: inertia %.6g after %d iterations", r, inertia, iters)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return Labels(best_labels, cfg.K), best_inertia
