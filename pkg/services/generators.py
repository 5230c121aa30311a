"""Block-model families with ground-truth labels.

Clique models include the diagonal (A = ZZᵀ has self-loops of weight 1). SBM
instances have no self-loops and are sampled with numpy's PCG64: one uniform draw
per unordered pair, pairs visited in ``numpy.triu_indices(n, 1)`` order.
"""
from __future__ import annotations
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from models.schemas import BlockSpec
from . import settings
from .graphs import BipartiteGraph, Labels, SparseGraph

logger = logging.getLogger(__name__)


def block_labels(sizes: Sequence[int]) -> Labels:
    if len(sizes) == 0 or any(s < 1 for s in sizes):
        raise ValueError("block sizes must be >= 1")
    return Labels(np.repeat(np.arange(len(sizes)), sizes), len(sizes))


def _as_spec(spec) -> BlockSpec:
    return spec if isinstance(spec, BlockSpec) else BlockSpec(sizes=list(spec))


def clique_block_model(spec: BlockSpec) -> Tuple[SparseGraph, Labels]:
    spec = _as_spec(spec)
    if spec.eps or spec.theta is not None:
        raise ValueError("clique_block_model takes neither eps nor theta; use the _eps / degree_corrected variants")
    labels = block_labels(spec.sizes)
    z = labels.membership()
    return SparseGraph((z @ z.T).tocsr()), labels


def clique_block_model_eps(spec: BlockSpec, dense_cap: Optional[int] = None) -> Tuple[SparseGraph, Labels]:
    """A = ZZᵀ + εJ, materialized densely; meant for small oracle instances."""
    spec = _as_spec(spec)
    eps = spec.eps or 0.0
    if eps == 0:
        return clique_block_model(spec.model_copy(update={"eps": None}))
    cap = settings.DENSE_CAP if dense_cap is None else dense_cap
    if spec.n > cap:
        raise ValueError(f"{spec.n} nodes exceed the dense cap {cap}; "
                         "embed ZZᵀ with alpha + eps instead")
    labels = block_labels(spec.sizes)
    z = labels.membership().toarray()
    return SparseGraph(sp.csr_matrix(z @ z.T + eps)), labels


def degree_corrected_model(spec: BlockSpec) -> Tuple[SparseGraph, Labels]:
    """A_ij = θ_i θ_j within blocks, 0 across."""
    spec = _as_spec(spec)
    if spec.theta is None:
        raise ValueError("degree_corrected_model needs theta")
    theta = np.asarray(spec.theta, dtype=float)
    if np.any(theta <= 0):
        raise ValueError("theta entries must be positive")
    labels = block_labels(spec.sizes)
    z = labels.membership()
    scale = sp.diags(theta)
    return SparseGraph((scale @ z @ z.T @ scale).tocsr()), labels


def sbm(block_sizes: Sequence[int], p_in: Sequence[float], p_out: float,
        seed: int = 0) -> Tuple[SparseGraph, Labels]:
    if len(p_in) != len(block_sizes):
        raise ValueError(f"p_in has {len(p_in)} entries for {len(block_sizes)} blocks")
    probs = np.asarray(p_in, dtype=float)
    if np.any((probs < 0) | (probs > 1)) or not 0 <= p_out <= 1:
        raise ValueError("probabilities must lie in [0, 1]")
    labels = block_labels(block_sizes)
    n = len(labels)
    rng = np.random.Generator(np.random.PCG64(seed))
    rows, cols = np.triu_indices(n, 1)
    draws = rng.random(rows.size)
    a, b = labels.assignments[rows], labels.assignments[cols]
    p = np.where(a == b, probs[a], p_out)
    keep = draws < p
    g = SparseGraph.from_edges(n, rows[keep], cols[keep])
    logger.debug("sbm seed=%d: %d nodes, %d edges", seed, n, int(keep.sum()))
    return g, labels


def sbm_expected_edges(block_sizes: Sequence[int], p_in: Sequence[float], p_out: float) -> Tuple[float, float]:
    """Mean and variance of the SBM edge count."""
    sizes = np.asarray(block_sizes, dtype=float)
    probs = np.asarray(p_in, dtype=float)
    n = sizes.sum()
    inner = sizes * (sizes - 1) / 2
    cross = n * (n - 1) / 2 - inner.sum()
    mean = (inner * probs).sum() + cross * p_out
    var = (inner * probs * (1 - probs)).sum() + cross * p_out * (1 - p_out)
    return float(mean), float(var)


def bipartite_block_model(n_sizes: Sequence[int],
                          m_sizes: Sequence[int]) -> Tuple[BipartiteGraph, Labels, Labels]:
    """B = Z_1 Z_2ᵀ: all-ones blocks on the diagonal."""
    if len(n_sizes) != len(m_sizes):
        raise ValueError(f"block counts differ: {len(n_sizes)} vs {len(m_sizes)}")
    left, right = block_labels(n_sizes), block_labels(m_sizes)
    b = left.membership() @ right.membership().T
    return BipartiteGraph(b.tocsr()), left, right
