from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
from scipy.sparse.csgraph import connected_components

from .eigensolve import RegularizedOperator, regularized_gsvd, smallest_generalized_eigenpairs
from .errors import SolverError
from .graphs import BipartiteGraph, SparseGraph, bipartite_to_adjacency, relative_to_absolute_alpha

logger = logging.getLogger(__name__)

AlphaMode = Literal["absolute", "relative"]


@dataclass(frozen=True, eq=False)
class Embedding:
    """Node coordinates with ascending eigenvalues, normalized so that XᵀD_αX = I.

    Column c holds the eigenvector of eigen index `first_index + c` (1-based, the
    trivial λ = 0 vector has index 1). For bipartite inputs the first
    `part_boundary` rows are the left part.
    """
    coordinates: np.ndarray
    eigenvalues: np.ndarray
    alpha_absolute: float
    skip_first: bool
    part_boundary: Optional[int] = None
    node_names: Optional[Tuple[str, ...]] = None

    @property
    def first_index(self) -> int:
        return 2 if self.skip_first else 1

    @property
    def dim(self) -> int:
        return self.coordinates.shape[1]

    def column(self, index: int) -> np.ndarray:
        c = index - self.first_index
        if not 0 <= c < self.dim:
            raise ValueError(f"eigen index {index} is not in this embedding "
                             f"({self.first_index}..{self.first_index + self.dim - 1})")
        return self.coordinates[:, c]


def normalize_signs(x: np.ndarray) -> np.ndarray:
    """Flip each column so that its entry of largest magnitude is positive."""
    x = np.array(x, dtype=float)
    if x.size == 0:
        return x
    peak = np.abs(x).argmax(axis=0)
    flip = x[peak, np.arange(x.shape[1])] < 0
    x[:, flip] *= -1
    return x


def _drop_trivial(lam: np.ndarray, x: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    if lam[0] > tol:
        raise SolverError(f"first eigenvalue {lam[0]:.3e} is not trivial; refusing to skip it")
    return lam[1:], x[:, 1:]


def spectral_embedding(g: SparseGraph, k: int, alpha: float = 0.0, alpha_mode: AlphaMode = "relative",
                       theta: Optional[np.ndarray] = None, skip_first: bool = True, seed: int = 0,
                       tol: Optional[float] = None, max_iter: Optional[int] = None,
                       allow_isolated: bool = False) -> Embedding:
    if k < 1:
        raise ValueError("k must be >= 1")
    alpha_abs = alpha if alpha_mode == "absolute" else relative_to_absolute_alpha(alpha, g)
    op = RegularizedOperator(g, alpha_abs, theta)
    if alpha_abs == 0:
        n_comp, _ = connected_components(g.adjacency, directed=False)
        if n_comp > 1:
            logger.warning("alpha = 0 on a graph with %d connected components: "
                           "the leading dimensions span an arbitrary nullspace basis", n_comp)
    res = smallest_generalized_eigenpairs(op, k + 1 if skip_first else k, seed=seed, tol=tol,
                                          max_iter=max_iter, allow_isolated=allow_isolated)
    lam, x = res.eigenvalues, normalize_signs(res.vectors)
    if skip_first:
        lam, x = _drop_trivial(lam, x, max(tol or 0.0, 1e-8))
    logger.debug("embedding: n=%d k=%d alpha=%.6g eigenvalues=%s", g.n, k, alpha_abs, np.round(lam, 6))
    return Embedding(x, lam, alpha_abs, skip_first, None, g.node_names)


def bipartite_relative_alpha(alpha_rel: float, b: BipartiteGraph) -> float:
    """α_rel · w_B / (n·m): the relative scale is the mean entry of B."""
    if alpha_rel < 0:
        raise ValueError("alpha_rel must be >= 0")
    if b.n == 0 or b.m == 0:
        raise ValueError("cannot scale alpha on an empty biadjacency")
    return alpha_rel * b.total_weight() / (b.n * b.m)


def bipartite_spectral_embedding(b: BipartiteGraph, k: int, alpha: float = 0.0,
                                 alpha_mode: AlphaMode = "relative",
                                 regularization_target: Literal["biadjacency", "adjacency"] = "biadjacency",
                                 skip_first: bool = True, seed: int = 0, tol: Optional[float] = None,
                                 max_iter: Optional[int] = None) -> Embedding:
    if regularization_target == "adjacency":
        g = bipartite_to_adjacency(b)
        emb = spectral_embedding(g, k, alpha, alpha_mode, skip_first=skip_first, seed=seed,
                                 tol=tol, max_iter=max_iter)
        return Embedding(emb.coordinates, emb.eigenvalues, emb.alpha_absolute, skip_first, b.n, g.node_names)
    if regularization_target != "biadjacency":
        raise ValueError(f"unknown regularization target {regularization_target!r}")
    if k < 1:
        raise ValueError("k must be >= 1")
    alpha_abs = alpha if alpha_mode == "absolute" else bipartite_relative_alpha(alpha, b)
    res = regularized_gsvd(b, alpha_abs, k + 1 if skip_first else k, seed=seed, tol=tol, max_iter=max_iter)
    lam = 1.0 - res.sigmas
    # both parts carry half of the joint D_α-norm
    x = normalize_signs(np.vstack([res.left, res.right]) / np.sqrt(2.0))
    if skip_first:
        lam, x = _drop_trivial(lam, x, max(tol or 0.0, 1e-8))
    names = None
    if b.row_names is not None and b.col_names is not None:
        names = b.row_names + b.col_names
    return Embedding(x, lam, alpha_abs, skip_first, b.n, names)
