"""Implicit regularized operators and the eigensolvers that consume them.

The regularized adjacency A_α = A + αJ (or A + αθθᵀ) is never formed: its
product is a sparse matvec plus a rank-one correction. Generalized problems
L_α x = λ D_α x are reduced to the symmetric N = D_α^{-1/2} A_α D_α^{-1/2}, with
λ = 1 - eig(N); the smallest λ are the largest eigenvalues of N + I, whose
spectrum lies in [0, 2].
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from . import settings
from .errors import ConvergenceError, SingularDegreeError
from .graphs import BipartiteGraph, SparseGraph, degrees

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RegularizedOperator:
    graph: SparseGraph
    alpha: float = 0.0
    theta: Optional[np.ndarray] = None
    regularized_degrees: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        d = degrees(self.graph)
        if self.theta is None:
            d_alpha = d + self.alpha * self.graph.n
        else:
            theta = np.asarray(self.theta, dtype=float)
            if theta.shape != (self.graph.n,):
                raise ValueError(f"theta must have {self.graph.n} entries")
            if np.any(theta <= 0):
                raise ValueError("theta entries must be positive")
            object.__setattr__(self, "theta", theta)
            d_alpha = d + self.alpha * theta * theta.sum()
        object.__setattr__(self, "regularized_degrees", d_alpha)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def singular(self) -> bool:
        return bool(np.any(self.regularized_degrees <= 0))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n:
            raise ValueError(f"vector has {v.shape[0]} rows, operator has {self.n}")
        out = self.graph.adjacency @ v
        if self.alpha:
            if self.theta is None:
                out = out + self.alpha * v.sum(axis=0)
            else:
                w = self.theta if v.ndim == 1 else self.theta[:, None]
                out = out + self.alpha * w * (self.theta @ v)
        return out

    def laplacian_matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        d = self.regularized_degrees if v.ndim == 1 else self.regularized_degrees[:, None]
        return d * v - self.matvec(v)


def matvec_regularized(op: RegularizedOperator, v: np.ndarray) -> np.ndarray:
    return op.matvec(v)


def _scalings(d: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    sqrt_d = np.sqrt(np.clip(d, 0.0, None))
    inv_sqrt = np.zeros_like(sqrt_d)
    inv_sqrt[d > 0] = 1.0 / sqrt_d[d > 0]
    return sqrt_d, inv_sqrt


def normalized_operator(op: RegularizedOperator, shift: float = 0.0) -> LinearOperator:
    """N + shift·I with N = D_α^{-1/2} A_α D_α^{-1/2}; zero-degree rows of N are zero."""
    _, inv_sqrt = _scalings(op.regularized_degrees)
    return LinearOperator((op.n, op.n), dtype=float,
                          matvec=lambda u: inv_sqrt * op.matvec(inv_sqrt * np.ravel(u)) + shift * np.ravel(u))


def default_max_iter(k: int, n: int) -> int:
    return int(10 * k * math.log(max(n, 2))) + 300


# ------------------------
# Lanczos
# ------------------------
@dataclass(frozen=True, eq=False)
class Eigenpairs:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    restarts: int


def _ritz(alphas: List[float], betas: List[float], k: int, which: str):
    m = len(alphas)
    if m == 1:
        return np.array(alphas), np.ones((1, 1))
    lo, hi = (m - k, m - 1) if which == "largest" else (0, k - 1)
    vals, vecs = eigh_tridiagonal(np.array(alphas), np.array(betas[: m - 1]),
                                  select="i", select_range=(lo, hi))
    order = np.argsort(-vals if which == "largest" else vals, kind="stable")
    return vals[order], vecs[:, order]


def lanczos_extreme(operator, k: int, which: Literal["largest", "smallest"] = "largest",
                    seed: int = 0, tol: Optional[float] = None, max_iter: Optional[int] = None,
                    deflate: Optional[np.ndarray] = None,
                    max_restarts: Optional[int] = None) -> Eigenpairs:
    """Extreme eigenpairs of a symmetric operator by Lanczos with full reorthogonalization.

    `deflate` holds orthonormal columns spanning an invariant subspace to exclude.
    On breakdown (an invariant Krylov subspace) the iteration restarts from a fresh
    seeded vector orthogonal to everything seen so far, which is also how repeated
    eigenvalues are picked up. After a breakdown the result is accepted only once a
    newer block settles at or beyond the k-th value, or nothing is left to explore;
    otherwise ConvergenceError is raised. `max_restarts` bounds the random draws
    per restart that may vanish under reorthogonalization before the remaining
    space counts as exhausted.
    """
    op = aslinearoperator(operator)
    n = op.shape[0]
    if op.shape[1] != n:
        raise ValueError("operator must be square")
    if which not in ("largest", "smallest"):
        raise ValueError("which must be 'largest' or 'smallest'")
    locked = np.zeros((n, 0)) if deflate is None else np.asarray(deflate, dtype=float).reshape(n, -1)
    free = n - locked.shape[1]
    if not 1 <= k <= free:
        raise ValueError(f"k must lie in [1, {free}]")
    tol = settings.TOL if tol is None else tol
    max_restarts = settings.MAX_RESTARTS if max_restarts is None else max_restarts
    steps = min(free, default_max_iter(k, n) if max_iter is None else max_iter)
    rng = np.random.default_rng(seed)

    Q = np.empty((n, steps), order="F")
    alphas: List[float] = []
    betas: List[float] = []

    def orthogonalize(v: np.ndarray, m: int) -> np.ndarray:
        # one pass, repeated when it cancelled most of v
        for _ in range(2):
            before = np.linalg.norm(v)
            if locked.shape[1]:
                v = v - locked @ (locked.T @ v)
            if m:
                v = v - Q[:, :m] @ (Q[:, :m].T @ v)
            if np.linalg.norm(v) > 0.7 * before:
                break
        return v

    def fresh(m: int) -> Optional[np.ndarray]:
        for _ in range(max(1, max_restarts)):
            v = orthogonalize(rng.standard_normal(n), m)
            nv = np.linalg.norm(v)
            if nv > 1e-8 * math.sqrt(n):
                return v / nv
        return None

    def block_settled(start: int, coupling: float, kth: float) -> bool:
        # newest block's extreme Ritz value has converged and adds nothing beyond the k-th
        theta, s = _ritz(alphas[start:], betas[start:], 1, which)
        slack = 10 * max(tol, 1e-12) * max(anorm, 1.0)
        if abs(coupling * s[-1, 0]) > tol * max(1.0, abs(theta[0])):
            return False
        return theta[0] <= kth + slack if which == "largest" else theta[0] >= kth - slack

    residuals = np.full(k, np.inf)
    q = fresh(0)
    if q is None:
        raise ConvergenceError("no start vector outside the deflated subspace", residuals, 0)
    beta = 0.0
    anorm = 0.0
    restarts = 0
    block = 0
    broke = False
    done = False
    m = 0
    while m < steps:
        Q[:, m] = q
        w = op.matvec(q)
        a = float(q @ w)
        w = w - a * q
        if beta:
            w = w - beta * Q[:, m - 1]
        m += 1
        w = orthogonalize(w, m)
        beta = float(np.linalg.norm(w))
        alphas.append(a)
        anorm = max(anorm, abs(a) + beta)

        if beta <= max(tol, 1e-12) * max(anorm, 1.0):
            betas.append(0.0)
            beta = 0.0
            if restarts and m >= k:
                vals, _ = _ritz(alphas, betas, k, which)
                if block_settled(block, 0.0, vals[-1]):
                    done = True
                    break
            broke = True
            if m >= steps:
                break
            q = fresh(m)
            if q is None:
                logger.debug("lanczos: space exhausted after %d steps", m)
                done = True
                break
            restarts += 1
            block = m
            logger.debug("lanczos: breakdown at step %d, restart %d", m, restarts)
            continue

        betas.append(beta)
        q = w / beta
        if m >= k and (m < 50 or m % 10 == 0 or m == steps):
            vals, vecs = _ritz(alphas, betas, k, which)
            residuals = np.abs(beta * vecs[-1, :])
            if np.all(residuals <= tol * np.maximum(1.0, np.abs(vals))) and (
                    not broke or block_settled(block, beta, vals[-1])):
                done = True
                break

    if m < k:
        raise ConvergenceError(f"Krylov space of dimension {m} cannot hold {k} eigenpairs",
                               residuals, m)
    vals, vecs = _ritz(alphas, betas, k, which)
    residuals = np.abs(betas[m - 1] * vecs[-1, :])
    if np.any(residuals > tol * np.maximum(1.0, np.abs(vals))):
        raise ConvergenceError("Lanczos did not converge", residuals, m)
    if broke and not done and m < free:
        raise ConvergenceError(f"repeated eigenvalues not resolved within {m} steps", residuals, m)
    x = Q[:, :m] @ vecs
    x /= np.linalg.norm(x, axis=0)
    logger.debug("lanczos: %d pairs in %d steps, %d restarts", k, m, restarts)
    return Eigenpairs(vals, x, residuals, m, restarts)


# ------------------------
# Generalized problems
# ------------------------
@dataclass(frozen=True, eq=False)
class EigenResult:
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int


def _component_basis(adjacency: sp.spmatrix, connected: bool, volume_weights: np.ndarray,
                     sqrt_d: np.ndarray) -> np.ndarray:
    """Normalized D^{1/2}·1_component vectors, smallest volume first."""
    n = adjacency.shape[0]
    if connected:
        comp = np.zeros(n, dtype=int)
    else:
        _, comp = connected_components(adjacency, directed=False)
    volume = np.bincount(comp, weights=volume_weights)
    first = np.full(volume.size, n)
    np.minimum.at(first, comp, np.arange(n))
    order = sorted((c for c in range(volume.size) if volume[c] > 0), key=lambda c: (volume[c], first[c]))
    basis = np.zeros((n, len(order)))
    for j, c in enumerate(order):
        mask = comp == c
        basis[mask, j] = sqrt_d[mask] / math.sqrt(volume[c])
    return basis


def _zero_degree(d: np.ndarray, allow_isolated: bool) -> np.ndarray:
    zero = np.flatnonzero(d <= 0)
    if zero.size:
        if not allow_isolated:
            raise SingularDegreeError(zero)
        logger.warning("%d zero-degree node(s) kept with the pseudo-inverse convention", zero.size)
    return zero


def smallest_generalized_eigenpairs(op: RegularizedOperator, k: int, seed: int = 0,
                                    tol: Optional[float] = None, max_iter: Optional[int] = None,
                                    allow_isolated: bool = False) -> EigenResult:
    """The k smallest solutions of L_α x = λ D_α x with XᵀD_αX = I."""
    n = op.n
    if not 1 <= k < n:
        raise ValueError(f"k must lie in [1, {n - 1}]")
    d = op.regularized_degrees
    zero = _zero_degree(d, allow_isolated)
    sqrt_d, inv_sqrt = _scalings(d)

    connected = op.alpha > 0
    null = _component_basis(op.graph.adjacency, connected, d, sqrt_d)
    iterations = 0
    if null.shape[1] >= k:
        u = null[:, :k]
        tops = np.full(k, 2.0)
    else:
        excluded = np.zeros((n, zero.size))
        excluded[zero, np.arange(zero.size)] = 1.0
        pairs = lanczos_extreme(normalized_operator(op, shift=1.0), k - null.shape[1], "largest",
                                seed=seed, tol=tol, max_iter=max_iter,
                                deflate=np.hstack([null, excluded]))
        u = np.hstack([null, pairs.vectors])
        tops = np.concatenate([np.full(null.shape[1], 2.0), pairs.values])
        iterations = pairs.iterations
    lam = np.clip(2.0 - tops, 0.0, 2.0)
    order = np.argsort(lam, kind="stable")
    lam, x = lam[order], (inv_sqrt[:, None] * u)[:, order]
    dx = d[:, None] * x
    res = np.linalg.norm(op.laplacian_matvec(x) - lam * dx, axis=0)
    scale = np.linalg.norm(dx, axis=0)
    res = np.divide(res, scale, out=np.zeros_like(res), where=scale > 0)
    return EigenResult(lam, x, res, iterations)


@dataclass(frozen=True, eq=False)
class GsvdResult:
    sigmas: np.ndarray
    left: np.ndarray
    right: np.ndarray
    residuals: np.ndarray
    iterations: int


def bipartite_degrees(b: BipartiteGraph, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    return b.row_degrees() + alpha * b.m, b.col_degrees() + alpha * b.n


def regularized_gsvd(b: BipartiteGraph, alpha: float, k: int, seed: int = 0,
                     tol: Optional[float] = None, max_iter: Optional[int] = None) -> GsvdResult:
    """Top-k generalized singular triplets of B_α = B + αJ under part-wise degree normalization."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    n, m = b.n, b.m
    if not 1 <= k <= min(n, m):
        raise ValueError(f"k must lie in [1, {min(n, m)}]")
    tol = settings.TOL if tol is None else tol
    d1, d2 = bipartite_degrees(b, alpha)
    zero = np.concatenate([np.flatnonzero(d1 <= 0), n + np.flatnonzero(d2 <= 0)])
    if zero.size:
        raise SingularDegreeError(zero)
    s1, s2 = 1.0 / np.sqrt(d1), 1.0 / np.sqrt(d2)
    bt = b.biadjacency.T.tocsr()

    def forward(v):  # M v
        w = s2 * v
        return s1 * (b.biadjacency @ w + alpha * w.sum())

    def backward(u):  # Mᵀ u
        w = s1 * u
        return s2 * (bt @ w + alpha * w.sum())

    gram = LinearOperator((n, n), dtype=float, matvec=lambda u: forward(backward(np.ravel(u))))

    # σ = 1 pairs are known: one per connected component
    adjacency = sp.bmat([[None, b.biadjacency], [bt, None]], format="csr")
    weights = np.concatenate([d1, np.zeros(m)])
    basis = _component_basis(adjacency, alpha > 0, weights, np.concatenate([np.sqrt(d1), np.zeros(m)]))
    u0 = basis[:n, :]
    iterations = 0
    if u0.shape[1] >= k:
        u, sig = u0[:, :k], np.ones(k)
    else:
        pairs = lanczos_extreme(gram, k - u0.shape[1], "largest", seed=seed, tol=tol,
                                max_iter=max_iter, deflate=u0)
        u = np.hstack([u0, pairs.vectors])
        sig = np.concatenate([np.ones(u0.shape[1]), np.sqrt(np.clip(pairs.values, 0.0, None))])
        iterations = pairs.iterations
    order = np.argsort(-sig, kind="stable")
    sig, u = np.clip(sig[order], 0.0, 1.0), u[:, order]

    v = np.zeros((m, k))
    nonzero = sig > math.sqrt(tol)
    for j in np.flatnonzero(nonzero):
        v[:, j] = backward(u[:, j]) / sig[j]
    n_zero = int((~nonzero).sum())
    if n_zero:
        # any orthonormal complement of the nonzero right vectors lies in null(M)
        rng = np.random.default_rng(seed)
        known = v[:, nonzero]
        fill = rng.standard_normal((m, n_zero))
        fill -= known @ (known.T @ fill)
        fill, _ = np.linalg.qr(fill)
        fill -= known @ (known.T @ fill)
        v[:, ~nonzero] = fill / np.linalg.norm(fill, axis=0)
        sig[~nonzero] = 0.0

    x1, x2 = s1[:, None] * u, s2[:, None] * v
    b_alpha_x2 = b.biadjacency @ x2 + alpha * x2.sum(axis=0)
    dx1 = d1[:, None] * x1
    res = np.linalg.norm(b_alpha_x2 - sig * dx1, axis=0) / np.linalg.norm(dx1, axis=0)
    return GsvdResult(sig, x1, x2, res, iterations)
