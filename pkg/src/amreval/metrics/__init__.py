"""AMR similarity metrics. All take ``(candidate, reference)`` in that order."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..embeddings import EmbeddingStore, fallback_store
from ..graph import AmrGraph
from .bags import bleu_from_stats, sema, sembleu, simple_jaccard
from .base import (
    ALL_METRICS,
    MICRO_CAPABLE,
    MetricId,
    MetricScore,
    UnknownMetricError,
    f1,
    parse_metric_list,
)
from .smatch import AlignmentProblem, VarAlignment, s2match, smatch
from .wl import wl_features, wlk, wwlk, wwlk_k3e2n

__all__ = [
    "ALL_METRICS",
    "MICRO_CAPABLE",
    "AlignmentProblem",
    "MetricId",
    "MetricScore",
    "MetricSuite",
    "UnknownMetricError",
    "VarAlignment",
    "bleu_from_stats",
    "f1",
    "parse_metric_list",
    "s2match",
    "sema",
    "sembleu",
    "simple_jaccard",
    "smatch",
    "wl_features",
    "wlk",
    "wwlk",
    "wwlk_k3e2n",
]


@dataclass(frozen=True)
class MetricSuite:
    """Configured evaluator for every metric id.

    Immutable, so one instance can be shared across worker processes.
    """

    store: EmbeddingStore = field(default_factory=fallback_store)
    restarts: int = 4
    seed: int = 0
    tau: float = 0.5
    sema_unary: bool = True
    sembleu_smoothing: bool = False

    def score(self, metric: MetricId | str, candidate: AmrGraph, reference: AmrGraph) -> MetricScore:
        metric = MetricId(metric)
        if metric is MetricId.SIMPLE:
            return simple_jaccard(candidate, reference)
        if metric is MetricId.SEMA:
            return sema(candidate, reference, self.sema_unary)
        if metric is MetricId.SEMBLEU_K2:
            return sembleu(candidate, reference, 2, self.sembleu_smoothing)
        if metric is MetricId.SEMBLEU_K3:
            return sembleu(candidate, reference, 3, self.sembleu_smoothing)
        if metric is MetricId.SMATCH:
            return smatch(candidate, reference, self.restarts, self.seed)[0]
        if metric is MetricId.S2MATCH:
            return s2match(candidate, reference, self.store, self.tau, self.restarts, self.seed)
        if metric is MetricId.WLK_K2:
            return wlk(candidate, reference, 2)
        if metric is MetricId.WWLK_K2:
            return wwlk(candidate, reference, self.store, 2)
        return wwlk_k3e2n(candidate, reference, self.store)

    def score_all(
        self, candidate: AmrGraph, reference: AmrGraph, metrics=ALL_METRICS
    ) -> dict[MetricId, MetricScore]:
        return {MetricId(m): self.score(m, candidate, reference) for m in metrics}

    def settings(self) -> dict[str, object]:
        return {
            "embeddings": self.store.name,
            "restarts": self.restarts,
            "seed": self.seed,
            "tau": self.tau,
            "sema_unary": self.sema_unary,
            "sembleu_smoothing": self.sembleu_smoothing,
        }
