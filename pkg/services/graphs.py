"""Graph containers, degree computations, noise injection and the text formats.

Edge-list convention: a line ``i j w`` adds ``w`` to both (i, j) and (j, i); a
self-loop line adds ``w`` once to the diagonal. Duplicate lines are summed, so
``total_weight`` is literally 1ᵀA1.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import GraphFormatError

logger = logging.getLogger(__name__)


def _clean_csr(matrix) -> sp.csr_matrix:
    m = sp.csr_matrix(matrix, dtype=float)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


@dataclass(frozen=True, eq=False)
class SparseGraph:
    adjacency: sp.csr_matrix
    node_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        a = _clean_csr(self.adjacency)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got {a.shape}")
        if a.nnz and a.data.min() < 0:
            raise ValueError("edge weights must be nonnegative")
        if (a != a.T).nnz:
            raise ValueError("adjacency must be symmetric")
        if self.node_names is not None and len(self.node_names) != a.shape[0]:
            raise ValueError("node_names length must equal the node count")
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def row_offsets(self) -> np.ndarray:
        return self.adjacency.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self.adjacency.indices

    @property
    def values(self) -> np.ndarray:
        return self.adjacency.data

    @property
    def nnz(self) -> int:
        return self.adjacency.nnz

    def names(self) -> Tuple[str, ...]:
        return self.node_names if self.node_names is not None else tuple(str(i) for i in range(self.n))

    def subgraph(self, nodes: Sequence[int]) -> "SparseGraph":
        idx = np.asarray(nodes, dtype=int)
        names = None if self.node_names is None else tuple(self.node_names[i] for i in idx)
        return SparseGraph(self.adjacency[idx][:, idx], names)

    @classmethod
    def from_edges(cls, n: int, rows, cols, weights=None,
                   node_names: Optional[Sequence[str]] = None) -> "SparseGraph":
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        # i <= j first, so both triangles sum duplicates in the same order
        rows, cols = np.minimum(rows, cols), np.maximum(rows, cols)
        w = np.ones(len(rows)) if weights is None else np.asarray(weights, dtype=float)
        off = rows != cols
        r = np.concatenate([rows, cols[off]])
        c = np.concatenate([cols, rows[off]])
        v = np.concatenate([w, w[off]])
        a = sp.coo_matrix((v, (r, c)), shape=(n, n))
        return cls(a.tocsr(), tuple(node_names) if node_names is not None else None)


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    biadjacency: sp.csr_matrix
    row_names: Optional[Tuple[str, ...]] = None
    col_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        b = _clean_csr(self.biadjacency)
        if b.nnz and b.data.min() < 0:
            raise ValueError("edge weights must be nonnegative")
        if self.row_names is not None and len(self.row_names) != b.shape[0]:
            raise ValueError("row_names length must equal n")
        if self.col_names is not None and len(self.col_names) != b.shape[1]:
            raise ValueError("col_names length must equal m")
        object.__setattr__(self, "biadjacency", b)

    @property
    def n(self) -> int:
        return self.biadjacency.shape[0]

    @property
    def m(self) -> int:
        return self.biadjacency.shape[1]

    def row_degrees(self) -> np.ndarray:
        return np.asarray(self.biadjacency.sum(axis=1)).ravel()

    def col_degrees(self) -> np.ndarray:
        return np.asarray(self.biadjacency.sum(axis=0)).ravel()

    def total_weight(self) -> float:
        return float(self.biadjacency.sum())


@dataclass(frozen=True, eq=False)
class Labels:
    assignments: np.ndarray
    K: int
    names: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=int)
        if a.ndim != 1:
            raise ValueError("assignments must be one-dimensional")
        if self.K < 1 and len(a):
            raise ValueError("K must be >= 1")
        if len(a) and (a.min() < 0 or a.max() >= self.K):
            raise ValueError(f"label indices must lie in [0, {self.K})")
        object.__setattr__(self, "assignments", a)

    def __len__(self) -> int:
        return len(self.assignments)

    @classmethod
    def from_assignments(cls, assignments) -> "Labels":
        """Densely re-index arbitrary integer labels by first appearance."""
        table: Dict[int, int] = {}
        dense = [table.setdefault(int(x), len(table)) for x in np.asarray(assignments).ravel()]
        return cls(np.asarray(dense, dtype=int), max(len(table), 1), tuple(str(k) for k in table))

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.K)

    def restrict(self, nodes: Sequence[int]) -> "Labels":
        return Labels(self.assignments[np.asarray(nodes, dtype=int)], self.K, self.names)

    def membership(self) -> sp.csr_matrix:
        """Membership matrix Z (nodes x blocks)."""
        n = len(self.assignments)
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.assignments)), shape=(n, self.K))


def degrees(g: SparseGraph) -> np.ndarray:
    return np.asarray(g.adjacency.sum(axis=1)).ravel()


def total_weight(g: SparseGraph) -> float:
    return float(g.adjacency.data.sum())


def relative_to_absolute_alpha(alpha_rel: float, g: SparseGraph) -> float:
    """Convert a relative regularization to the absolute α = alpha_rel · w / n²."""
    if alpha_rel < 0:
        raise ValueError("alpha_rel must be >= 0")
    if g.n == 0:
        raise ValueError("cannot scale alpha on an empty graph")
    return alpha_rel * total_weight(g) / g.n ** 2


def add_noise_nodes(g: SparseGraph, fraction: float, self_loop_weight: float = 1.0,
                    seed: int = 0) -> Tuple[SparseGraph, np.ndarray]:
    """Append ceil(fraction·n) isolated nodes, each carrying one self-loop.

    The added nodes are fully determined by the arguments; `seed` is accepted so
    callers can pass a cell seed uniformly.
    """
    if fraction < 0:
        raise ValueError("fraction must be >= 0")
    if self_loop_weight <= 0:
        raise ValueError("self_loop_weight must be > 0")
    count = math.ceil(round(fraction * g.n, 9))
    added = np.arange(g.n, g.n + count)
    if count == 0:
        return g, added
    loops = sp.diags(np.full(count, float(self_loop_weight)), format="csr")
    a = sp.block_diag([g.adjacency, loops], format="csr")
    names = None
    if g.node_names is not None:
        names = g.node_names + tuple(f"noise{i}" for i in range(count))
    return SparseGraph(a, names), added


def add_bipartite_noise(b: BipartiteGraph, fraction: float,
                        weight: float = 1.0) -> Tuple[BipartiteGraph, int]:
    """Append ceil(fraction·n) noise rows and as many noise columns, row i linked to column i.

    Each pair is its own connected component, the bipartite counterpart of an
    isolated node with a self-loop. Returns the new graph and the pair count; the
    original rows keep their indices and the original columns follow the new rows
    in the joint (n+m) ordering.
    """
    if fraction < 0:
        raise ValueError("fraction must be >= 0")
    if weight <= 0:
        raise ValueError("weight must be > 0")
    count = math.ceil(round(fraction * b.n, 9))
    if count == 0:
        return b, 0
    pairs = sp.diags(np.full(count, float(weight)), format="csr")
    biadjacency = sp.block_diag([b.biadjacency, pairs], format="csr")
    tags = tuple(f"noise{i}" for i in range(count))
    rows = b.row_names + tags if b.row_names is not None else None
    cols = b.col_names + tags if b.col_names is not None else None
    return BipartiteGraph(biadjacency, rows, cols), count


def bipartite_to_adjacency(b: BipartiteGraph) -> SparseGraph:
    """The (n+m)-node graph [[0, B], [Bᵀ, 0]]."""
    a = sp.bmat([[sp.csr_matrix((b.n, b.n)), b.biadjacency],
                 [b.biadjacency.T, sp.csr_matrix((b.m, b.m))]], format="csr")
    names = None
    if b.row_names is not None and b.col_names is not None:
        names = b.row_names + b.col_names
    return SparseGraph(a, names)


# ------------------------
# Text formats
# ------------------------
def _records(path, min_fields: int, max_fields: int) -> Iterator[Tuple[int, List[str]]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if not min_fields <= len(parts) <= max_fields:
                raise GraphFormatError(
                    f"expected {min_fields} to {max_fields} fields, got {len(parts)}: {line!r}", line_no)
            yield line_no, parts


def _weight(text: str, line_no: int) -> float:
    try:
        w = float(text)
    except ValueError:
        raise GraphFormatError(f"invalid weight {text!r}", line_no) from None
    if not math.isfinite(w) or w < 0:
        raise GraphFormatError(f"weight must be finite and >= 0, got {text!r}", line_no)
    return w


class _Index:
    """Dense re-indexing table for node identifiers, by first appearance."""

    def __init__(self, limit: Optional[int] = None):
        self.limit = limit
        self.table: Dict[str, int] = {}

    def __call__(self, name: str, line_no: int) -> int:
        if self.limit is not None:
            try:
                i = int(name)
            except ValueError:
                raise GraphFormatError(f"node id {name!r} is not an integer", line_no) from None
            if not 0 <= i < self.limit:
                raise GraphFormatError(f"node index {i} overflows [0, {self.limit})", line_no)
            return i
        return self.table.setdefault(name, len(self.table))

    def names(self) -> Optional[Tuple[str, ...]]:
        return tuple(self.table) if self.limit is None else None

    def size(self) -> int:
        return self.limit if self.limit is not None else len(self.table)


def _read_triples(path, rows: _Index, cols: _Index):
    r, c, w = [], [], []
    for line_no, parts in _records(path, 2, 3):
        r.append(rows(parts[0], line_no))
        c.append(cols(parts[1], line_no))
        w.append(_weight(parts[2], line_no) if len(parts) == 3 else 1.0)
    if not r:
        raise GraphFormatError(f"{path}: no edges found")
    return r, c, w


def load_edge_list(path, n_nodes: Optional[int] = None) -> SparseGraph:
    """Read an undirected weighted edge list; ids are re-indexed unless n_nodes is given."""
    index = _Index(n_nodes)
    r, c, w = _read_triples(path, index, index)
    g = SparseGraph.from_edges(index.size(), r, c, w, index.names())
    logger.info("loaded %s: %d nodes, %d stored entries", path, g.n, g.nnz)
    return g


def load_bipartite(path, n_rows: Optional[int] = None, n_cols: Optional[int] = None) -> BipartiteGraph:
    rows, cols = _Index(n_rows), _Index(n_cols)
    r, c, w = _read_triples(path, rows, cols)
    b = sp.coo_matrix((w, (r, c)), shape=(rows.size(), cols.size())).tocsr()
    g = BipartiteGraph(b, rows.names(), cols.names())
    logger.info("loaded %s: %d x %d biadjacency, %d entries", path, g.n, g.m, g.biadjacency.nnz)
    return g


def load_labels(path, node_names: Optional[Sequence[str]] = None) -> Labels:
    """Read `node<TAB>label` lines; labels are re-indexed to [0, K) by first appearance.

    With `node_names`, the result follows that node order and may cover only a
    subset of it (see `labeled_nodes`); otherwise it follows file order.
    """
    nodes: List[str] = []
    raw: List[str] = []
    seen = set()
    for line_no, parts in _records(path, 2, 2):
        if parts[0] in seen:
            raise GraphFormatError(f"node {parts[0]!r} labeled twice", line_no)
        seen.add(parts[0])
        nodes.append(parts[0])
        raw.append(parts[1])
    if not nodes:
        raise GraphFormatError(f"{path}: no labels found")
    table: Dict[str, int] = {}
    dense = [table.setdefault(lab, len(table)) for lab in raw]
    if node_names is not None:
        position = {name: i for i, name in enumerate(node_names)}
        missing = [v for v in nodes if v not in position]
        if missing:
            raise GraphFormatError(f"{path}: labeled node {missing[0]!r} is not in the graph")
        order = np.argsort([position[v] for v in nodes], kind="stable")
        dense = [dense[i] for i in order]
    return Labels(np.asarray(dense, dtype=int), len(table), tuple(table))


def labeled_nodes(path, node_names: Sequence[str]) -> np.ndarray:
    """Graph indices of the nodes listed in a labels file, in graph order."""
    position = {name: i for i, name in enumerate(node_names)}
    idx = [position[parts[0]] for _, parts in _records(path, 2, 2) if parts[0] in position]
    return np.sort(np.asarray(idx, dtype=int))


def _write_lines(path, lines: Iterable[str]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def write_edge_list(g: SparseGraph, path) -> None:
    upper = sp.triu(g.adjacency).tocoo()
    names = g.names()
    _write_lines(path, (f"{names[i]}\t{names[j]}\t{w:.17g}" for i, j, w in zip(upper.row, upper.col, upper.data)))


def write_bipartite(b: BipartiteGraph, path) -> None:
    coo = b.biadjacency.tocoo()
    rn = b.row_names or tuple(str(i) for i in range(b.n))
    cn = b.col_names or tuple(str(j) for j in range(b.m))
    _write_lines(path, (f"{rn[i]}\t{cn[j]}\t{w:.17g}" for i, j, w in zip(coo.row, coo.col, coo.data)))


def write_labels(labels: Labels, path, node_names: Optional[Sequence[str]] = None) -> None:
    names = node_names or [str(i) for i in range(len(labels))]
    tags = labels.names or tuple(str(k) for k in range(labels.K))
    _write_lines(path, (f"{names[i]}\t{tags[c]}" for i, c in enumerate(labels.assignments)))
