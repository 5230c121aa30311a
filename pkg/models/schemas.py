from __future__ import annotations
from typing import Callable, Dict, List, Literal, Optional, TypeVar

from pydantic import BaseModel, Field, field_validator, model_validator

from services import settings

T = TypeVar("T")


def parse_list(text: str, cast: Callable[[str], T]) -> List[T]:
    """Parse a comma-separated list with `value*count` repetition, e.g. "0.5*50,0.05*50"."""
    out: List[T] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "*" in item:
            value, count = item.rsplit("*", 1)
            out.extend([cast(value.strip())] * int(count))
        else:
            out.append(cast(item))
    return out


class BlockSpec(BaseModel):
    sizes: List[int] = Field(min_length=1)
    m_sizes: Optional[List[int]] = None
    theta: Optional[List[float]] = None
    eps: Optional[float] = Field(default=None, ge=0.0)

    @field_validator("sizes", "m_sizes")
    @classmethod
    def _positive_sizes(cls, v):
        if v is not None and any(s < 1 for s in v):
            raise ValueError("block sizes must be >= 1")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if self.theta is not None and len(self.theta) != sum(self.sizes):
            raise ValueError(f"theta has {len(self.theta)} entries, expected {sum(self.sizes)}")
        if self.m_sizes is not None and len(self.m_sizes) != len(self.sizes):
            raise ValueError("sizes and m_sizes must have the same number of blocks")
        return self

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def K(self) -> int:
        return len(self.sizes)


class KMeansConfig(BaseModel):
    K: int = Field(ge=1)
    seed: int = 0
    max_iter: int = Field(default=300, ge=1)
    tol: float = Field(default=1e-6, ge=0.0)
    n_init: int = Field(default=10, ge=1)


class ThresholdSet(BaseModel):
    mus: List[float]
    alpha: float
    kind: Literal["clique", "bipartite"]
    # bipartite only: isolation order keys in the alpha -> 0+ and alpha -> inf limits
    small_alpha_keys: Optional[List[float]] = None
    large_alpha_keys: Optional[List[float]] = None

    def isolation_order(self) -> List[int]:
        """Block indices by increasing threshold, i.e. the order in which blocks are isolated."""
        return sorted(range(len(self.mus)), key=lambda j: (self.mus[j], j))


class Comparison(BaseModel):
    left: str
    left_value: float
    right: str
    right_value: float
    relation: Literal["<", "="] = "<"
    ok: bool


class InterleavingReport(BaseModel):
    passed: bool
    comparisons: List[Comparison] = Field(default_factory=list)

    def failures(self) -> List[Comparison]:
        return [c for c in self.comparisons if not c.ok]


class AggregateCheck(BaseModel):
    max_deviation: float
    full_size: int
    aggregate_size: int
    padding_value: float
    padding_count: int
    passed: bool


class SignSplit(BaseModel):
    dim: int
    leading_blocks: List[int]
    trailing_blocks: List[int]
    expected_blocks: List[int]
    block_signs: Dict[int, int]
    purity: float
    matches: bool


class MetricRecord(BaseModel):
    H: float
    C: float
    V: float
    ARI: float
    AMI: float
    FMI: float
    Q: float
    NSD: float


METRIC_NAMES = list(MetricRecord.model_fields)

_LIST_CASTS = {
    "sizes": int, "m_sizes": int, "p_in": float, "alpha_rel": float, "noise": float, "seeds": int,
}


class ExperimentConfig(BaseModel):
    experiment: Literal["alpha_sweep", "noise_sweep", "bipartite_comparison"] = "alpha_sweep"
    model: Literal["sbm", "cliques", "bipartite", "files"] = "sbm"
    sizes: List[int] = Field(default_factory=lambda: [20] * 100)
    m_sizes: Optional[List[int]] = None
    p_in: List[float] = Field(default_factory=lambda: [0.5] * 50 + [0.05] * 50)
    p_out: float = Field(default=0.001, ge=0.0, le=1.0)
    graph: Optional[str] = None
    labels: Optional[str] = None
    right_labels: Optional[str] = None
    bipartite: bool = False
    dim: int = Field(default=20, ge=1)
    alpha_rel: List[float] = Field(default_factory=lambda: [0.0, 0.1, 1.0, 10.0], min_length=1)
    k_policy: Literal["truth", "half", "two", "explicit"] = "truth"
    k: Optional[int] = Field(default=None, ge=1)
    noise: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    noise_weight: float = Field(default=1.0, gt=0.0)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    skip_first: bool = True
    n_init: int = Field(default=10, ge=1)
    max_iter: int = Field(default=300, ge=1)
    tol: float = Field(default=1e-8, gt=0.0)
    regularization_target: Literal["biadjacency", "adjacency"] = "biadjacency"
    threads: int = Field(default_factory=lambda: settings.THREADS, ge=1)
    out: Optional[str] = None

    @field_validator(*_LIST_CASTS, mode="before")
    @classmethod
    def _split_lists(cls, v, info):
        if isinstance(v, str):
            return parse_list(v, _LIST_CASTS[info.field_name])
        return v

    @field_validator("alpha_rel", "noise")
    @classmethod
    def _nonnegative(cls, v):
        if any(x < 0 for x in v):
            raise ValueError("values must be >= 0")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if self.model == "files" and not (self.graph and self.labels):
            raise ValueError("model = files needs graph and labels paths")
        if self.k_policy == "explicit" and self.k is None:
            raise ValueError("k_policy = explicit needs k")
        if self.model == "bipartite" and self.m_sizes is None:
            raise ValueError("model = bipartite needs m_sizes")
        return self

    @property
    def is_bipartite(self) -> bool:
        return self.model == "bipartite" or (self.model == "files" and self.bipartite)
