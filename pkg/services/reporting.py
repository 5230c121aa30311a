"""Table rendering and file exports.

Sweep tables come out twice: pipe markdown with two decimals for reading, CSV with
six decimals plus `<metric>_std` / `<metric>_n` columns for plotting. Both are
deterministic for a given frame.
"""
from __future__ import annotations
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from models.schemas import METRIC_NAMES
from .embedding import Embedding
from .errors import GraphFormatError
from .theory import bipartite_thresholds, clique_thresholds, secular_eigenvalues, threshold_sign_pattern

logger = logging.getLogger(__name__)


def _cell(value, decimals: int = 2) -> str:
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "NA"
        return f"{value:.{decimals}f}"
    return str(value)


def markdown_table(df: pd.DataFrame, key_cols: Sequence[str]) -> str:
    cols = list(key_cols) + [m for m in METRIC_NAMES if m in df.columns]
    lines = ["| " + " | ".join(cols) + " |", "|" + "|".join("---" for _ in cols) + "|"]
    for _, row in df.iterrows():
        cells = [f"{row[c]:g}" if isinstance(row[c], (float, np.floating)) else str(row[c]) for c in key_cols]
        cells += [_cell(row[m]) for m in cols[len(key_cols):]]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def csv_table(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, float_format="%.6f", na_rep="NA", lineterminator="\n")


def write_tables(df: pd.DataFrame, out_dir, name: str, key_cols: Sequence[str]) -> Tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    md, csv = out / f"{name}.md", out / f"{name}.csv"
    md.write_text(markdown_table(df, key_cols), encoding="utf-8")
    csv.write_text(csv_table(df), encoding="utf-8")
    logger.info("wrote %s and %s", md, csv)
    return md, csv


# ------------------------
# Embedding files
# ------------------------
def _meta_path(path) -> Path:
    return Path(f"{path}.meta")


def write_embedding(emb: Embedding, path) -> None:
    """CSV `node,x<j>...` (j = eigen index) plus a `<path>.meta` key=value sidecar."""
    names = emb.node_names or tuple(str(i) for i in range(emb.coordinates.shape[0]))
    df = pd.DataFrame(emb.coordinates, columns=[f"x{emb.first_index + c}" for c in range(emb.dim)])
    df.insert(0, "node", list(names))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    meta = {
        "eigenvalues": ",".join(f"{v:.17g}" for v in emb.eigenvalues),
        "alpha_absolute": f"{emb.alpha_absolute:.17g}",
        "skip_first": str(emb.skip_first).lower(),
        "first_index": str(emb.first_index),
        "part_boundary": "" if emb.part_boundary is None else str(emb.part_boundary),
    }
    _meta_path(path).write_text("".join(f"{k}={v}\n" for k, v in meta.items()), encoding="utf-8")


def _read_meta(path) -> Dict[str, str]:
    meta_file = _meta_path(path)
    if not meta_file.exists():
        return {}
    meta = {}
    for line_no, raw in enumerate(meta_file.read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        if "=" not in raw:
            raise GraphFormatError(f"{meta_file}: expected key=value", line_no)
        key, value = raw.split("=", 1)
        meta[key.strip()] = value.strip()
    return meta


def read_embedding(path) -> Embedding:
    try:
        df = pd.read_csv(path, dtype={"node": str}, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise GraphFormatError(f"{path}: {exc}") from None
    cols = [c for c in df.columns if c != "node"]
    if "node" not in df.columns or not cols or not all(c.startswith("x") and c[1:].isdigit() for c in cols):
        raise GraphFormatError(f"{path}: expected a header node,x<j>,...")
    coords = df[cols].to_numpy(dtype=float)
    meta = _read_meta(path)
    first = int(meta.get("first_index", cols[0][1:]))
    eigenvalues = (np.array([float(v) for v in meta["eigenvalues"].split(",")])
                   if meta.get("eigenvalues") else np.full(len(cols), np.nan))
    boundary = meta.get("part_boundary")
    return Embedding(coords, eigenvalues, float(meta.get("alpha_absolute", "nan")), first == 2,
                     int(boundary) if boundary else None, tuple(df["node"]))


# ------------------------
# Theory tables
# ------------------------
def _blocks(idx: Sequence[int]) -> str:
    return "{" + ", ".join(str(j + 1) for j in idx) + "}"


def _splits(order: List[int]) -> List[str]:
    return [f"  dim {j}: {_blocks(sorted(order[:j - 1]))} | {_blocks(sorted(order[j - 1:]))}"
            for j in range(2, len(order) + 1)]


def theory_report(sizes: Sequence[float], alpha: float, m_sizes: Optional[Sequence[float]] = None) -> str:
    """Thresholds, secular roots and predicted sign splits as a plain-text table (blocks 1-based)."""
    if m_sizes is not None:
        thr = bipartite_thresholds(sizes, m_sizes, alpha)
        table = pd.DataFrame({"block": range(1, len(sizes) + 1), "n_j": list(sizes), "m_j": list(m_sizes),
                              "mu": thr.mus, "key_small_alpha": thr.small_alpha_keys,
                              "key_large_alpha": thr.large_alpha_keys})
        lines = [f"bipartite block model, alpha = {alpha:g}",
                 table.to_string(index=False, float_format=lambda v: f"{v:.6f}"),
                 "predicted sign splits (isolation order by mu):"]
        return "\n".join(lines + _splits(thr.isolation_order())) + "\n"

    thr = clique_thresholds(sizes, alpha)
    table = pd.DataFrame({"block": range(1, len(sizes) + 1), "n_j": list(sizes), "mu": thr.mus})
    lines = [f"clique block model, alpha = {alpha:g}, n = {sum(sizes):g}",
             table.to_string(index=False, float_format=lambda v: f"{v:.6f}")]
    if len(sizes) > 1 and all(a > b for a, b in zip(sizes, sizes[1:])):
        roots = secular_eigenvalues(sizes, alpha)
        lines.append("secular roots:")
        for j, lam in enumerate(roots, start=2):
            same = threshold_sign_pattern(sizes, alpha, lam)
            lines.append(f"  lambda_{j} = {lam:.10f}  sign split {_blocks(np.flatnonzero(same))} | "
                         f"{_blocks(np.flatnonzero(~same))}")
    elif len(sizes) > 1:
        lines.append("secular roots: sizes not strictly decreasing, skipped")
    lines.append("predicted sign splits (largest blocks first):")
    return "\n".join(lines + _splits(thr.isolation_order())) + "\n"
