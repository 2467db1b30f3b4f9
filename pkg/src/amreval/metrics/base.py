from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class MetricId(str, Enum):
    SIMPLE = "simple"
    SEMA = "sema"
    SEMBLEU_K2 = "sembleu-k2"
    SEMBLEU_K3 = "sembleu-k3"
    SMATCH = "smatch"
    S2MATCH = "s2match"
    WLK_K2 = "wlk-k2"
    WWLK_K2 = "wwlk-k2"
    WWLK_K3E2N = "wwlk-k3e2n"

    def __str__(self) -> str:
        return self.value


ALL_METRICS: tuple[MetricId, ...] = tuple(MetricId)

# metrics whose per-pair counts can be pooled over a corpus
MICRO_CAPABLE = frozenset(
    {MetricId.SEMA, MetricId.SEMBLEU_K2, MetricId.SEMBLEU_K3, MetricId.SMATCH, MetricId.S2MATCH}
)


class UnknownMetricError(ValueError):
    pass


def parse_metric_list(text: str) -> list[MetricId]:
    """``"smatch,wwlk-k3e2n"`` or ``"all"`` -> list of ids, order preserved."""
    text = text.strip().lower()
    if text == "all":
        return list(ALL_METRICS)
    out: list[MetricId] = []
    for name in filter(None, (t.strip() for t in text.split(","))):
        try:
            mid = MetricId(name)
        except ValueError:
            known = ", ".join(m.value for m in ALL_METRICS)
            raise UnknownMetricError(f"unknown metric {name!r} (known: {known}, all)") from None
        if mid not in out:
            out.append(mid)
    if not out:
        raise UnknownMetricError("no metrics selected")
    return out


def f1(matched: float, candidate_total: float, reference_total: float) -> tuple[float, float, float]:
    """Precision, recall and F1 with 0/0 taken as 0."""
    p = matched / candidate_total if candidate_total > 0 else 0.0
    r = matched / reference_total if reference_total > 0 else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


@dataclass(frozen=True)
class MetricScore:
    """One metric's verdict on a (candidate, reference) pair; higher is more similar.

    The optional components carry what corpus-level pooling needs: matched
    and total counts for triple metrics, per-order gram counts for
    SemBLEU, the transport distance for the Wasserstein kernels.
    """

    metric: MetricId
    similarity: float
    precision: float | None = None
    recall: float | None = None
    matched: float | None = None
    candidate_total: float | None = None
    reference_total: float | None = None
    distance: float | None = None
    # per order: (clipped matches, candidate grams, reference grams)
    ngrams: tuple[tuple[int, int, int], ...] = field(default=())

    def __post_init__(self) -> None:
        if not 0.0 <= self.similarity <= 1.0 + 1e-12:
            raise ValueError(f"{self.metric}: similarity {self.similarity} outside [0, 1]")
