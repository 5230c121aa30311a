"""Clustering scores: the supervised ones against a ground truth, plus modularity and NSD.

Supervised scores delegate to scikit-learn (natural-log entropies, arithmetic-mean
AMI normalization).
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from sklearn import metrics as skm
from sklearn.metrics.cluster import contingency_matrix

from models.schemas import MetricRecord
from .graphs import Labels, SparseGraph, degrees, total_weight

logger = logging.getLogger(__name__)

LabelLike = Union[Labels, Sequence[int], np.ndarray]


def _array(x: LabelLike) -> np.ndarray:
    return x.assignments if isinstance(x, Labels) else np.asarray(x, dtype=int).ravel()


def _pair(pred: LabelLike, truth: LabelLike) -> Tuple[np.ndarray, np.ndarray]:
    p, t = _array(pred), _array(truth)
    if p.size != t.size:
        raise ValueError(f"length mismatch: {p.size} predicted vs {t.size} true labels")
    if p.size == 0:
        raise ValueError("empty labelings")
    return p, t


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    counts: np.ndarray  # predicted cluster x true class

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def contingency(pred: LabelLike, truth: LabelLike) -> ContingencyTable:
    p, t = _pair(pred, truth)
    return ContingencyTable(np.asarray(contingency_matrix(p, t)))


def homogeneity(pred: LabelLike, truth: LabelLike) -> float:
    p, t = _pair(pred, truth)
    return float(skm.homogeneity_score(t, p))


def completeness(pred: LabelLike, truth: LabelLike) -> float:
    p, t = _pair(pred, truth)
    return float(skm.completeness_score(t, p))


def v_measure(pred: LabelLike, truth: LabelLike) -> float:
    p, t = _pair(pred, truth)
    return float(skm.v_measure_score(t, p))


def ari(pred: LabelLike, truth: LabelLike) -> float:
    p, t = _pair(pred, truth)
    return float(skm.adjusted_rand_score(t, p))


def ami(pred: LabelLike, truth: LabelLike) -> float:
    p, t = _pair(pred, truth)
    return float(skm.adjusted_mutual_info_score(t, p, average_method="arithmetic"))


def fmi(pred: LabelLike, truth: LabelLike) -> float:
    p, t = _pair(pred, truth)
    return float(skm.fowlkes_mallows_score(t, p))


def modularity(g: SparseGraph, pred: LabelLike) -> float:
    """Weighted Newman-Girvan modularity with w = 1ᵀA1; self-loops count in both terms."""
    p = _array(pred)
    if p.size != g.n:
        raise ValueError(f"labels cover {p.size} nodes, graph has {g.n}")
    w = total_weight(g)
    if w <= 0:
        raise ValueError("modularity is undefined on a graph without edges")
    _, dense = np.unique(p, return_inverse=True)
    z = sp.csr_matrix((np.ones(g.n), (np.arange(g.n), dense)), shape=(g.n, dense.max() + 1))
    inner = float((z.T @ g.adjacency @ z).diagonal().sum())
    volume = z.T @ degrees(g)
    return inner / w - float(np.sum(volume ** 2)) / w ** 2


def nsd(pred: LabelLike) -> float:
    """1 minus the size standard deviation over that of the most unbalanced partition."""
    p = _array(pred)
    if p.size == 0:
        raise ValueError("empty labeling")
    _, sizes = np.unique(p, return_counts=True)
    K = sizes.size
    if K == 1:
        return 1.0
    worst = np.array([p.size - K + 1] + [1] * (K - 1), dtype=float).std()
    if worst == 0:
        return 1.0
    return float(np.clip(1.0 - sizes.std() / worst, 0.0, 1.0))


def evaluate_all(g: SparseGraph, pred: LabelLike, truth: LabelLike,
                 mask: Optional[Sequence[int]] = None) -> MetricRecord:
    """All scores; with a mask only the listed nodes are scored and Q uses their induced subgraph.

    Under a mask, `truth` may cover either every node or just the masked ones.
    """
    p, t = _array(pred), _array(truth)
    if p.size != g.n:
        raise ValueError(f"predictions cover {p.size} nodes, graph has {g.n}")
    if mask is not None:
        idx = np.asarray(mask, dtype=int)
        p = p[idx]
        t = t[idx] if t.size == g.n and t.size != idx.size else t
        g = g.subgraph(idx)
    p, t = _pair(p, t)
    if total_weight(g) > 0:
        q = modularity(g, p)
    else:
        logger.warning("scored nodes carry no edge weight; modularity reported as NaN")
        q = math.nan
    return MetricRecord(H=homogeneity(p, t), C=completeness(p, t), V=v_measure(p, t), ARI=ari(p, t),
                        AMI=ami(p, t), FMI=fmi(p, t), Q=q, NSD=nsd(p))
