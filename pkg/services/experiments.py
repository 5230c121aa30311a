"""Experiment orchestration: α sweeps, noise sweeps, adjacency vs biadjacency, the toy report.

Every cell (α index, noise index, repeat) gets its own seed
``seeds[r] ^ stable_hash("a{i}:n{j}:r{r}")``, so adding sweep points never moves
existing cells. The graph of repeat r is drawn from ``seeds[r]`` itself and shared by
all cells of that repeat.
"""
from __future__ import annotations
import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError
from scipy.sparse.csgraph import connected_components

from models.schemas import METRIC_NAMES, ExperimentConfig, KMeansConfig, MetricRecord
from .clustering import kmeans
from .embedding import Embedding, bipartite_spectral_embedding, spectral_embedding
from .errors import ConfigError, SpecregError
from .generators import bipartite_block_model, clique_block_model, sbm
from .graphs import (BipartiteGraph, Labels, SparseGraph, add_bipartite_noise, add_noise_nodes,
                     bipartite_to_adjacency, labeled_nodes, load_bipartite, load_edge_list, load_labels)
from .metrics import evaluate_all
from .reporting import write_tables
from .theory import (clique_thresholds, eigenvector_block_values, secular_eigenvalues,
                     sign_recovery)

logger = logging.getLogger(__name__)

TARGETS = ("adjacency", "biadjacency")


# ------------------------
# Configuration
# ------------------------
def load_config(values: Mapping[str, object]) -> ExperimentConfig:
    try:
        return ExperimentConfig(**values)
    except ValidationError as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc


def read_config_file(path) -> ExperimentConfig:
    """Parse `key = value` lines (`#` comments); graph/label paths resolve against the file's folder."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values: Dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}, line {line_no}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in ExperimentConfig.model_fields:
            raise ConfigError(f"{path}, line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}, line {line_no}: {key!r} given twice")
        values[key] = value
    for key in ("graph", "labels", "right_labels"):
        if values.get(key) and not Path(values[key]).is_absolute():
            values[key] = str(path.parent / values[key])
    return load_config(values)


def stable_hash(alpha_index: int, noise_index: int, repeat_index: int) -> int:
    text = f"a{alpha_index}:n{noise_index}:r{repeat_index}".encode("ascii")
    return int.from_bytes(hashlib.blake2b(text).digest()[:8], "little") & (2 ** 63 - 1)


def cell_seed(seed: int, alpha_index: int, noise_index: int, repeat_index: int) -> int:
    return seed ^ stable_hash(alpha_index, noise_index, repeat_index)


def resolve_k(cfg: ExperimentConfig, k_true: int) -> int:
    if cfg.k_policy == "truth":
        return k_true
    if cfg.k_policy == "half":
        return max(1, math.ceil(k_true / 2))
    if cfg.k_policy == "two":
        return 2
    return int(cfg.k)


# ------------------------
# Datasets
# ------------------------
@dataclass(frozen=True, eq=False)
class Dataset:
    """One graph instance with its ground truth.

    `truth` covers the rows listed in `scored` (all embedded rows when None). For
    bipartite data the rows are the n left nodes followed by the m right nodes.
    """
    truth: Labels
    graph: Optional[SparseGraph] = None
    bipartite: Optional[BipartiteGraph] = None
    scored: Optional[np.ndarray] = None

    @property
    def scoring_graph(self) -> SparseGraph:
        return self.graph if self.bipartite is None else bipartite_to_adjacency(self.bipartite)


def _joint_labels(left: Labels, right: Labels) -> Labels:
    """Merge two independently indexed label files through their label names."""
    tags = [left.names[c] for c in left.assignments] + [right.names[c] for c in right.assignments]
    table: Dict[str, int] = {}
    dense = [table.setdefault(t, len(table)) for t in tags]
    return Labels(np.asarray(dense, dtype=int), len(table), tuple(table))


def build_dataset(cfg: ExperimentConfig, seed: int) -> Dataset:
    if cfg.model == "sbm":
        g, truth = sbm(cfg.sizes, cfg.p_in, cfg.p_out, seed)
        return Dataset(truth, graph=g)
    if cfg.model == "cliques":
        g, truth = clique_block_model(cfg.sizes)
        return Dataset(truth, graph=g)
    if cfg.model == "bipartite":
        b, left, right = bipartite_block_model(cfg.sizes, cfg.m_sizes)
        return Dataset(Labels(np.concatenate([left.assignments, right.assignments]), left.K), bipartite=b)
    if cfg.bipartite:
        b = load_bipartite(cfg.graph)
        left = load_labels(cfg.labels, b.row_names)
        scored = labeled_nodes(cfg.labels, b.row_names)
        if cfg.right_labels:
            right = load_labels(cfg.right_labels, b.col_names)
            scored = np.concatenate([scored, b.n + labeled_nodes(cfg.right_labels, b.col_names)])
            left = _joint_labels(left, right)
        return Dataset(left, bipartite=b, scored=scored)
    g = load_edge_list(cfg.graph)
    truth = load_labels(cfg.labels, g.node_names)
    scored = labeled_nodes(cfg.labels, g.node_names)
    return Dataset(truth, graph=g, scored=None if scored.size == g.n else scored)


# ------------------------
# Cells
# ------------------------
@dataclass(frozen=True)
class Cell:
    key: Tuple
    alpha_index: int
    noise_index: int
    repeat: int
    alpha_rel: float
    noise: float = 0.0
    target: Optional[str] = None


def _embed(cfg: ExperimentConfig, graph: SparseGraph, bipartite: Optional[BipartiteGraph], cell: Cell,
           seed: int) -> Embedding:
    if bipartite is not None:
        return bipartite_spectral_embedding(bipartite, cfg.dim, cell.alpha_rel, "relative",
                                            cell.target or cfg.regularization_target, cfg.skip_first,
                                            seed=seed, tol=cfg.tol)
    return spectral_embedding(graph, cfg.dim, cell.alpha_rel, "relative", skip_first=cfg.skip_first,
                              seed=seed, tol=cfg.tol, allow_isolated=True)


def _with_noise(ds: Dataset, fraction: float, weight: float, seed: int):
    """Noisy graph(s) and the joint rows that still carry ground truth."""
    if ds.bipartite is None:
        graph, _ = add_noise_nodes(ds.graph, fraction, weight, seed)
        mask = np.arange(ds.graph.n) if ds.scored is None else ds.scored
        return graph, None, mask
    n, m = ds.bipartite.n, ds.bipartite.m
    bipartite, count = add_bipartite_noise(ds.bipartite, fraction, weight)
    mask = np.arange(n + m) if ds.scored is None else np.asarray(ds.scored)
    # original columns sit after the new noise rows
    mask = np.where(mask >= n, mask + count, mask)
    return bipartite_to_adjacency(bipartite), bipartite, mask


def run_cell(cfg: ExperimentConfig, ds: Dataset, cell: Cell) -> MetricRecord:
    """Embed, cluster and score one sweep cell."""
    seed = cell_seed(cfg.seeds[cell.repeat], cell.alpha_index, cell.noise_index, cell.repeat)
    graph, bipartite, mask = ds.scoring_graph, ds.bipartite, ds.scored
    if cell.noise > 0:
        graph, bipartite, mask = _with_noise(ds, cell.noise, cfg.noise_weight, seed)
    emb = _embed(cfg, graph, bipartite, cell, seed)
    K = resolve_k(cfg, ds.truth.K)
    pred, _ = kmeans(emb.coordinates, KMeansConfig(K=K, seed=seed, max_iter=cfg.max_iter, n_init=cfg.n_init))
    return evaluate_all(graph, pred, ds.truth, mask)


def _run_cells(cfg: ExperimentConfig, cells: List[Cell], key_cols: List[str]) -> pd.DataFrame:
    datasets = [build_dataset(cfg, s) for s in cfg.seeds]

    def job(cell: Cell) -> Optional[MetricRecord]:
        try:
            return run_cell(cfg, datasets[cell.repeat], cell)
        except (SpecregError, ValueError) as exc:
            logger.warning("cell %s repeat %d failed, reported as NA: %s", cell.key, cell.repeat, exc)
            return None

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        records = list(pool.map(job, cells))
    rows = []
    for cell, rec in zip(cells, records):
        metrics = rec.model_dump() if rec is not None else {m: np.nan for m in METRIC_NAMES}
        rows.append({**dict(zip(key_cols, cell.key)), **metrics})
    return summarize(rows, key_cols)


def summarize(rows: List[dict], key_cols: List[str]) -> pd.DataFrame:
    """Mean, population std and non-NA count of each metric per key."""
    frame = pd.DataFrame(rows, columns=key_cols + METRIC_NAMES)
    grouped = frame.groupby(key_cols, sort=True)
    mean = grouped[METRIC_NAMES].mean()
    std = grouped[METRIC_NAMES].std(ddof=0)
    count = grouped[METRIC_NAMES].count()
    columns = {}
    for m in METRIC_NAMES:
        columns[m] = mean[m]
        columns[f"{m}_std"] = std[m]
        columns[f"{m}_n"] = count[m]
    return pd.DataFrame(columns).reset_index()


def run_alpha_sweep(cfg: ExperimentConfig) -> pd.DataFrame:
    cells = [Cell((a,), i, 0, r, a) for i, a in enumerate(cfg.alpha_rel) for r in range(len(cfg.seeds))]
    return _run_cells(cfg, cells, ["alpha_rel"])


def run_noise_sweep(cfg: ExperimentConfig) -> pd.DataFrame:
    """Scores per (noise, alpha_rel); bipartite data gets linked noise row/column pairs."""
    cells = [Cell((f, a), i, j, r, a, f)
             for j, f in enumerate(cfg.noise) for i, a in enumerate(cfg.alpha_rel) for r in range(len(cfg.seeds))]
    return _run_cells(cfg, cells, ["noise", "alpha_rel"])


def run_bipartite_comparison(cfg: ExperimentConfig) -> pd.DataFrame:
    if not cfg.is_bipartite:
        raise ConfigError("the adjacency/biadjacency comparison needs a bipartite dataset")
    cells = [Cell((t, a), i, 0, r, a, target=t)
             for t in TARGETS for i, a in enumerate(cfg.alpha_rel) for r in range(len(cfg.seeds))]
    return _run_cells(cfg, cells, ["target", "alpha_rel"])


RUNNERS: Dict[str, Tuple[Callable[[ExperimentConfig], pd.DataFrame], List[str]]] = {
    "alpha_sweep": (run_alpha_sweep, ["alpha_rel"]),
    "noise_sweep": (run_noise_sweep, ["noise", "alpha_rel"]),
    "bipartite_comparison": (run_bipartite_comparison, ["target", "alpha_rel"]),
}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> pd.DataFrame:
    runner, key_cols = RUNNERS[cfg.experiment]
    logger.info("running %s: %d alpha value(s), %d seed(s), %d thread(s)",
                cfg.experiment, len(cfg.alpha_rel), len(cfg.seeds), cfg.threads)
    table = runner(cfg)
    target = out_dir or cfg.out
    if target:
        write_tables(table, target, cfg.experiment, key_cols)
    return table


# ------------------------
# Toy graph
# ------------------------
TOY_SIZES = [5, 3, 2]


def _block_means(column: np.ndarray, labels: Labels) -> np.ndarray:
    return np.bincount(labels.assignments, weights=column) / labels.sizes()


def _fmt(values) -> str:
    return "(" + ", ".join(f"{v:+.4f}" for v in values) + ")"


def run_toy() -> str:
    """Text report for three cliques of sizes 5, 3, 2 embedded in dimension 1."""
    g, labels = clique_block_model(TOY_SIZES)
    lines = [f"toy graph: cliques of sizes {', '.join(map(str, TOY_SIZES))} (n = {g.n})"]
    thr = clique_thresholds(TOY_SIZES, 1.0)
    lines.append("thresholds at alpha = 1: mu = " + ", ".join(f"{m:.4f}" for m in thr.mus))
    lines.append("secular roots at alpha = 1: " + ", ".join(f"{r:.6f}" for r in secular_eigenvalues(TOY_SIZES, 1.0)))

    for title, alpha, mode in (("alpha = 1 (absolute)", 1.0, "absolute"), ("alpha_rel = 1", 1.0, "relative")):
        emb = spectral_embedding(g, 1, alpha, mode)
        lam = float(emb.eigenvalues[0])
        theory = eigenvector_block_values(TOY_SIZES, emb.alpha_absolute, lam)
        theory = theory * np.sign(theory[np.abs(theory).argmax()])
        split = sign_recovery(emb, 2, labels)
        lines += [f"{title}: absolute alpha {emb.alpha_absolute:.4g}, lambda_2 = {lam:.6f}",
                  f"  embedding block values {_fmt(_block_means(emb.column(2), labels))}",
                  f"  theory block values    {_fmt(theory)}",
                  f"  sign split: blocks {[j + 1 for j in split.leading_blocks]} vs "
                  f"{[j + 1 for j in split.trailing_blocks]}"]

    n_comp, _ = connected_components(g.adjacency, directed=False)
    emb0 = spectral_embedding(g, 1, 0.0, "absolute")
    lines += [f"alpha = 0: nullspace dimension {n_comp}; the first non-trivial vector lies in it",
              f"  embedding block values {_fmt(_block_means(emb0.column(2), labels))}"]
    return "\n".join(lines) + "\n"
