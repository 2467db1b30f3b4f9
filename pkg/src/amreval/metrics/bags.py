"""Alignment-free metrics: SIMPLE (label Jaccard), SemA and SemBLEU."""

from __future__ import annotations

import math
from collections import Counter

from ..graph import AmrGraph, extract_kgrams
from .base import MetricId, MetricScore, f1


def label_bag(g: AmrGraph) -> Counter[str]:
    bag = Counter(g.nodes.values())
    bag.update(r for _, r, _ in g.edges)
    for _, role, const in g.attributes:
        bag[role] += 1
        bag[const] += 1
    return bag


def simple_jaccard(candidate: AmrGraph, reference: AmrGraph) -> MetricScore:
    """Multiset Jaccard coefficient over concept and relation labels."""
    a, b = label_bag(candidate), label_bag(reference)
    inter = sum((a & b).values())
    union = sum((a | b).values())
    return MetricScore(MetricId.SIMPLE, inter / union if union else 1.0, matched=inter)


def sema_triples(g: AmrGraph, unary: bool = True) -> Counter[tuple[str, ...]]:
    bag: Counter[tuple[str, ...]] = Counter()
    for src, role, tgt in g.edges:
        bag[(g.nodes[src], role, g.nodes[tgt])] += 1
    for src, role, const in g.attributes:
        bag[(g.nodes[src], role, const)] += 1
    if unary:
        bag.update((c,) for c in g.nodes.values())
    return bag


def sema(candidate: AmrGraph, reference: AmrGraph, unary: bool = True) -> MetricScore:
    """F1 over variable-free triples, variables replaced by their concepts."""
    a, b = sema_triples(candidate, unary), sema_triples(reference, unary)
    matched = sum((a & b).values())
    ca, rb = sum(a.values()), sum(b.values())
    p, r, f = f1(matched, ca, rb)
    return MetricScore(MetricId.SEMA, f, p, r, matched, ca, rb)


def sembleu_stats(candidate: AmrGraph, reference: AmrGraph, k: int) -> tuple[tuple[int, int, int], ...]:
    stats = []
    for n in range(1, k + 1):
        c, r = extract_kgrams(candidate, n), extract_kgrams(reference, n)
        stats.append((sum((c & r).values()), sum(c.values()), sum(r.values())))
    return tuple(stats)


def bleu_from_stats(stats: tuple[tuple[int, int, int], ...], smoothing: bool = False) -> float:
    """BLEU over graph k-grams from per-order (matched, candidate, reference) counts.

    Uniform weights over the orders that occur on either side; an order with
    no grams on both sides (e.g. bigrams of two single-node graphs) carries
    no information and is skipped. Brevity penalty ``exp(1 - r/c)`` when the
    candidate has fewer grams than the reference. With ``smoothing`` orders
    above 1 use ``(matched + 1) / (candidate + 1)``.
    """
    logs = []
    for order, (matched, cand, ref) in enumerate(stats, 1):
        if cand == 0 and ref == 0:
            continue
        if smoothing and order > 1:
            matched, cand = matched + 1, cand + 1
        if matched == 0 or cand == 0:
            return 0.0
        logs.append(math.log(matched / cand))
    if not logs:
        return 0.0
    c = sum(s[1] for s in stats)
    r = sum(s[2] for s in stats)
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return min(1.0, bp * math.exp(sum(logs) / len(logs)))


def sembleu(candidate: AmrGraph, reference: AmrGraph, k: int = 3, smoothing: bool = False) -> MetricScore:
    """Directional: ``candidate`` is scored against ``reference``."""
    if k not in (2, 3):
        raise ValueError("SemBLEU is defined here for k in {2, 3}")
    stats = sembleu_stats(candidate, reference, k)
    mid = MetricId.SEMBLEU_K2 if k == 2 else MetricId.SEMBLEU_K3
    score = bleu_from_stats(stats, smoothing)
    return MetricScore(
        mid,
        score,
        matched=sum(s[0] for s in stats),
        candidate_total=sum(s[1] for s in stats),
        reference_total=sum(s[2] for s in stats),
        ngrams=stats,
    )
