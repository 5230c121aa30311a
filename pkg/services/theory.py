"""Closed-form results for regularized block models.

Clique models: A = ZZᵀ (blocks of sizes n_j), A_α = A + αJ. The K smallest
generalized eigenvalues interleave the thresholds μ_j = αn/(αn + n_j), and the
interior ones are the roots of

    Σ_j n_j (n_j + αn) / (λ/μ_j − 1) = 0.

Every formula also accepts real-valued block weights, which covers the
degree-corrected model A = θZZᵀθ with n_j → Σ_{i∈j} θ_i and n → Σθ.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.optimize import bisect

from models.schemas import AggregateCheck, Comparison, InterleavingReport, SignSplit, ThresholdSet
from . import settings
from .embedding import Embedding
from .errors import SingularDegreeError, TheoryError
from .graphs import BipartiteGraph, Labels, SparseGraph

logger = logging.getLogger(__name__)

BISECT_TOL = 1e-12
_EDGE_MARGIN = 1e-14


@dataclass(frozen=True, eq=False)
class Aggregate:
    adjacency: np.ndarray
    degrees: np.ndarray

    @property
    def laplacian(self) -> np.ndarray:
        return np.diag(self.degrees) - self.adjacency


def _block_sizes(labels: Labels) -> np.ndarray:
    sizes = labels.sizes()
    if np.any(sizes == 0):
        raise TheoryError(f"empty block(s): {np.flatnonzero(sizes == 0).tolist()}")
    return sizes


def aggregate(g: SparseGraph, labels: Labels, alpha: float = 0.0) -> Aggregate:
    """Ā_α = Zᵀ(A + αJ)Z with its degree vector."""
    if len(labels) != g.n:
        raise ValueError(f"labels cover {len(labels)} nodes, graph has {g.n}")
    sizes = _block_sizes(labels).astype(float)
    z = labels.membership()
    a = np.asarray((z.T @ g.adjacency @ z).todense()) + alpha * np.outer(sizes, sizes)
    return Aggregate(a, a.sum(axis=1))


def _check_rows(matrix: sp.csr_matrix, labels: Labels, axis: str) -> None:
    rep = np.zeros(labels.K, dtype=int)
    for j in range(labels.K - 1, -1, -1):
        members = np.flatnonzero(labels.assignments == j)
        if members.size:
            rep[j] = members[0]
    diff = matrix - matrix[rep[labels.assignments]]
    if sp.csr_matrix(diff).count_nonzero():
        raise TheoryError(f"labels are not a block structure: {axis} differ within a block")


def _generalized_spectrum(a: np.ndarray) -> np.ndarray:
    d = a.sum(axis=1)
    zero = np.flatnonzero(d <= 0)
    if zero.size:
        raise SingularDegreeError(zero)
    return la.eigh(np.diag(d) - a, np.diag(d), eigvals_only=True)


def _normalized_singular_values(b: np.ndarray) -> np.ndarray:
    d1, d2 = b.sum(axis=1), b.sum(axis=0)
    zero = np.concatenate([np.flatnonzero(d1 <= 0), b.shape[0] + np.flatnonzero(d2 <= 0)])
    if zero.size:
        raise SingularDegreeError(zero)
    m = b / np.sqrt(d1)[:, None] / np.sqrt(d2)[None, :]
    return np.sort(la.svdvals(m))


def aggregate_eigen_check(g: Union[SparseGraph, BipartiteGraph],
                          labels: Union[Labels, Tuple[Labels, Labels]],
                          alpha: float = 0.0, tol: float = 1e-8,
                          cap: Optional[int] = None) -> AggregateCheck:
    """Compare the full spectrum with the aggregate one padded by the trivial values.

    Unipartite: generalized eigenvalues, padded with λ = 1 (multiplicity n − K).
    Bipartite: normalized singular values, padded with σ = 0.
    """
    cap = settings.ORACLE_CAP if cap is None else cap
    if isinstance(g, BipartiteGraph):
        left, right = labels
        if len(left) != g.n or len(right) != g.m:
            raise ValueError("labels must cover both parts")
        if g.n + g.m > cap:
            raise ValueError(f"{g.n + g.m} nodes exceed the oracle cap {cap}")
        _check_rows(g.biadjacency, left, "rows")
        _check_rows(g.biadjacency.T.tocsr(), right, "columns")
        n1, n2 = _block_sizes(left).astype(float), _block_sizes(right).astype(float)
        full = _normalized_singular_values(g.biadjacency.toarray() + alpha)
        reduced = np.asarray((left.membership().T @ g.biadjacency @ right.membership()).todense())
        small = _normalized_singular_values(reduced + alpha * np.outer(n1, n2))
        size, pad_value = min(g.n, g.m), 0.0
    else:
        if len(labels) != g.n:
            raise ValueError(f"labels cover {len(labels)} nodes, graph has {g.n}")
        if g.n > cap:
            raise ValueError(f"{g.n} nodes exceed the oracle cap {cap}")
        _check_rows(g.adjacency, labels, "rows")
        full = _generalized_spectrum(g.adjacency.toarray() + alpha)
        small = _generalized_spectrum(aggregate(g, labels, alpha).adjacency)
        size, pad_value = g.n, 1.0
    pad = size - small.size
    padded = np.sort(np.concatenate([small, np.full(max(pad, 0), pad_value)]))[-size:]
    deviation = float(np.abs(np.sort(full) - padded).max()) if size else 0.0
    logger.debug("aggregate check: %d vs %d values, max deviation %.3e", size, small.size, deviation)
    return AggregateCheck(max_deviation=deviation, full_size=size, aggregate_size=small.size,
                          padding_value=pad_value, padding_count=max(pad, 0), passed=deviation <= tol)


def _weights(sizes: Sequence[float]) -> np.ndarray:
    w = np.asarray(sizes, dtype=float)
    if w.ndim != 1 or w.size == 0 or np.any(w <= 0):
        raise TheoryError("block sizes must be positive")
    return w


def clique_thresholds(sizes: Sequence[float], alpha: float) -> ThresholdSet:
    if alpha <= 0:
        raise TheoryError("thresholds need alpha > 0")
    w = _weights(sizes)
    scale = alpha * w.sum()
    return ThresholdSet(mus=(scale / (scale + w)).tolist(), alpha=alpha, kind="clique")


def bipartite_thresholds(n_sizes: Sequence[float], m_sizes: Sequence[float], alpha: float) -> ThresholdSet:
    if len(n_sizes) != len(m_sizes):
        raise TheoryError(f"block counts differ: {len(n_sizes)} vs {len(m_sizes)}")
    if alpha <= 0:
        raise TheoryError("thresholds need alpha > 0")
    p, q = _weights(n_sizes), _weights(m_sizes)
    n, m = p.sum(), q.sum()
    mus = 1.0 - p * q / ((p + alpha * n) * (q + alpha * m))
    return ThresholdSet(mus=mus.tolist(), alpha=alpha, kind="bipartite",
                        small_alpha_keys=(1.0 / (n / p + m / q)).tolist(),
                        large_alpha_keys=(p * q / (n * m)).tolist())


def secular_function(sizes: Sequence[float], alpha: float):
    w = _weights(sizes)
    mus = np.asarray(clique_thresholds(w, alpha).mus)
    coef = w * (w + alpha * w.sum())

    def f(lam: float) -> float:
        return float(np.sum(coef / (lam / mus - 1.0)))
    return f


def secular_eigenvalues(sizes: Sequence[float], alpha: float, tol: float = BISECT_TOL) -> np.ndarray:
    """Interior eigenvalues λ_2..λ_K of the regularized clique model, by bisection."""
    w = _weights(sizes)
    if np.any(np.diff(w) >= 0):
        raise TheoryError("secular roots need strictly decreasing block sizes")
    mus = clique_thresholds(w, alpha).mus
    f = secular_function(w, alpha)
    roots = []
    for lo, hi in zip(mus[:-1], mus[1:]):
        a, b = lo * (1 + _EDGE_MARGIN), hi * (1 - _EDGE_MARGIN)
        fa, fb = f(a), f(b)
        if not (fa > 0 > fb):
            raise TheoryError(f"({lo:.12g}, {hi:.12g}) does not bracket a root: f = {fa:.3e}, {fb:.3e}")
        roots.append(bisect(f, a, b, xtol=tol, maxiter=500))
    return np.asarray(roots)


def eigenvector_block_values(sizes: Sequence[float], alpha: float, lam: float,
                             tol: float = BISECT_TOL) -> np.ndarray:
    """Per-block eigenvector values y_j ∝ 1/(λn_j − α(1−λ)n), unit norm in D̄_α."""
    w = _weights(sizes)
    n = w.sum()
    mus = alpha * n / (alpha * n + w)
    near = np.flatnonzero(np.abs(lam - mus) < tol)
    if near.size:
        raise TheoryError(f"lambda {lam:.12g} sits on the pole of block {int(near[0])}")
    if w.size == 1:
        y = np.ones(1)
    else:
        y = 1.0 / (lam * w - alpha * (1 - lam) * n)
    return y / np.sqrt(np.sum(w * (w + alpha * n) * y ** 2))


def threshold_sign_pattern(sizes: Sequence[float], alpha: float, lam: float) -> np.ndarray:
    """Blocks whose eigenvector entries share the sign of the largest block: n_j ≥ α(1−λ)/λ · n."""
    w = _weights(sizes)
    return w >= alpha * (1 - lam) / lam * w.sum()


def degree_corrected_weights(theta: Sequence[float], labels: Labels) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(labels),):
        raise ValueError(f"theta must have {len(labels)} entries")
    return np.bincount(labels.assignments, weights=theta, minlength=labels.K)


def _default_order(*parts: Labels) -> list:
    keys = [p.sizes() for p in parts]
    present = [j for j in range(parts[0].K) if any(k[j] > 0 for k in keys)]
    return sorted(present, key=lambda j: tuple(-k[j] for k in keys) + (j,))


def _split(column: np.ndarray, labels: Labels, dim: int, order: Sequence[int],
           strict: bool, tol: float) -> SignSplit:
    if np.any(np.abs(column) <= tol):
        raise TheoryError(f"column {dim} has entries within {tol:g} of zero")
    signs = np.where(column > 0, 1, -1)
    block_signs, agree = {}, 0
    for j in range(labels.K):
        s = signs[labels.assignments == j]
        if s.size:
            major = 1 if (s > 0).sum() >= (s < 0).sum() else -1
            block_signs[j] = major
            agree += int((s == major).sum())
    purity = agree / len(signs)
    if strict and purity < 1:
        raise TheoryError(f"column {dim}: mixed signs within blocks (purity {purity:.4f})")
    order = [j for j in order if j in block_signs]
    lead = block_signs[order[0]]
    leading = sorted(j for j, s in block_signs.items() if s == lead)
    trailing = sorted(j for j, s in block_signs.items() if s != lead)
    expected = sorted(order[:dim - 1])
    return SignSplit(dim=dim, leading_blocks=leading, trailing_blocks=trailing, expected_blocks=expected,
                     block_signs=block_signs, purity=purity, matches=leading == expected)


def sign_recovery(embedding: Embedding, dim: int, labels: Union[Labels, Tuple[Labels, Labels]],
                  order: Optional[Sequence[int]] = None, strict: bool = True,
                  tol: float = 1e-12) -> Union[SignSplit, Tuple[SignSplit, SignSplit]]:
    """Split blocks by the sign of embedding column `dim` (an eigen index, 2 = first non-trivial).

    The side holding order[0] (default: the largest block) is the leading side; the
    split matches when it holds exactly order[:dim-1].
    """
    column = embedding.column(dim)
    if isinstance(labels, tuple):
        left, right = labels
        cut = embedding.part_boundary
        if cut is None or cut != len(left) or len(column) != len(left) + len(right):
            raise ValueError("bipartite labels need an embedding of both parts")
        order = list(order) if order is not None else _default_order(left, right)
        return (_split(column[:cut], left, dim, order, strict, tol),
                _split(column[cut:], right, dim, order, strict, tol))
    if len(labels) != len(column):
        raise ValueError(f"labels cover {len(labels)} nodes, embedding has {len(column)}")
    order = list(order) if order is not None else _default_order(labels)
    return _split(column, labels, dim, order, strict, tol)


def verify_interleaving(eigs: Sequence[float], thr: ThresholdSet, tol: float = 1e-8) -> InterleavingReport:
    """Check 0 = λ_1 < μ_1 < λ_2 < μ_2 < ... < λ_K < μ_K with margin tol.

    Bipartite thresholds bound the squared singular values: each λ = 1 − σ is
    compared as 1 − σ².
    """
    lam = [float(x) for x in eigs]
    if thr.kind == "bipartite":
        lam = [1.0 - (1.0 - x) ** 2 for x in lam]
    mus = sorted(thr.mus)
    if len(lam) != len(mus):
        raise ValueError(f"need {len(mus)} eigenvalues, got {len(lam)}")
    checks = [Comparison(left="0", left_value=0.0, right="lambda_1", right_value=lam[0],
                         relation="=", ok=abs(lam[0]) <= tol)]
    for j, mu in enumerate(mus, start=1):
        checks.append(Comparison(left=f"lambda_{j}", left_value=lam[j - 1], right=f"mu_{j}",
                                 right_value=mu, relation="<", ok=mu - lam[j - 1] > tol))
        if j < len(mus):
            checks.append(Comparison(left=f"mu_{j}", left_value=mu, right=f"lambda_{j + 1}",
                                     right_value=lam[j], relation="<", ok=lam[j] - mu > tol))
    return InterleavingReport(passed=all(c.ok for c in checks), comparisons=checks)
