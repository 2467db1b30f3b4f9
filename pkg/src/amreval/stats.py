"""Corpus scoring and meta-evaluation statistics.

Covers macro/micro corpus scores, tie-split preference counts, pairwise
accuracy against human preferences, the acceptability rank gap, Spearman
correlation matrices, binomial tests, percentile bootstrap intervals and
sentence-length buckets.
"""

from __future__ import annotations

import copy
import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import binomtest, rankdata

from .graph import AmrGraph
from .metrics import MICRO_CAPABLE, MetricId, MetricScore, bleu_from_stats, f1

RAND_PA = 0.5
RAND_ACCEPTABILITY_DELTA = 0.0


class StatsError(ValueError):
    pass


class UnsupportedAggregation(StatsError):
    pass


@dataclass
class CorpusItem:
    id: str
    sentence: str | None
    gold: AmrGraph
    candidates: dict[str, AmrGraph] = field(default_factory=dict)


@dataclass
class EvalCorpus:
    items: list[CorpusItem]

    def __post_init__(self) -> None:
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise StatsError(f"duplicate item ids: {dupes}")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def ids(self) -> list[str]:
        return [it.id for it in self.items]

    @property
    def parsers(self) -> list[str]:
        if not self.items:
            return []
        names = list(self.items[0].candidates)
        for it in self.items:
            if set(it.candidates) != set(names):
                raise StatsError(f"item {it.id!r} has parsers {sorted(it.candidates)}, expected {sorted(names)}")
        return names


@dataclass
class HumanJudgments:
    preferences: dict[str, int] = field(default_factory=dict)
    acceptability: dict[tuple[str, str], int] = field(default_factory=dict)
    rationales: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for k, v in self.preferences.items():
            if v not in (-1, 0, 1):
                raise StatsError(f"preference for {k!r} must be -1, 0 or 1, got {v!r}")
        for k, v in self.acceptability.items():
            if v not in (0, 1):
                raise StatsError(f"acceptability for {k!r} must be 0 or 1, got {v!r}")


def _tsv_rows(path: str | Path) -> Iterable[tuple[int, list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if not header_seen:
                header_seen = True
                continue
            yield lineno, line.split("\t")
        if not header_seen:
            raise StatsError(f"{path}: missing header line")


def _label(text: str, allowed: tuple[int, ...], where: str) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise StatsError(f"{where}: label {text!r} is not an integer") from None
    if value not in allowed:
        raise StatsError(f"{where}: label {value} not in {allowed}")
    return value


def read_preferences(path: str | Path) -> tuple[dict[str, int], dict[str, str]]:
    """``id<TAB>label<TAB>rationale?``; +1 prefers the first parser, -1 the second."""
    prefs: dict[str, int] = {}
    rationales: dict[str, str] = {}
    for lineno, cols in _tsv_rows(path):
        if len(cols) < 2:
            raise StatsError(f"{path}:{lineno}: expected id and label")
        prefs[cols[0]] = _label(cols[1], (-1, 0, 1), f"{path}:{lineno}")
        if len(cols) > 2 and cols[2]:
            rationales[cols[0]] = "\t".join(cols[2:])
    return prefs, rationales


def read_acceptability(path: str | Path) -> dict[tuple[str, str], int]:
    """``id<TAB>parser-id<TAB>label`` with label 1 = acceptable, 0 = not."""
    labels: dict[tuple[str, str], int] = {}
    for lineno, cols in _tsv_rows(path):
        if len(cols) < 3:
            raise StatsError(f"{path}:{lineno}: expected id, parser and label")
        labels[(cols[0], cols[1])] = _label(cols[2], (0, 1), f"{path}:{lineno}")
    return labels


def read_judgments(prefs: str | Path | None = None, accept: str | Path | None = None) -> HumanJudgments:
    preferences, rationales = read_preferences(prefs) if prefs else ({}, {})
    acceptability = read_acceptability(accept) if accept else {}
    return HumanJudgments(preferences, acceptability, rationales)


class ScoreTable:
    """Frozen ``(metric, parser, item id) -> MetricScore`` table."""

    def __init__(self, entries: Mapping[tuple[MetricId, str, str], MetricScore], ids: Sequence[str]):
        self._entries = dict(entries)
        self.ids = list(ids)
        for score in self._entries.values():
            if not math.isfinite(score.similarity):
                raise StatsError(f"non-finite score for {score.metric}")

    def __getitem__(self, key: tuple[MetricId, str, str]) -> MetricScore:
        return self._entries[key]

    def __contains__(self, key: object) -> bool:
        return key in self._entries

    @property
    def metrics(self) -> list[MetricId]:
        return list(dict.fromkeys(k[0] for k in self._entries))

    @property
    def parsers(self) -> list[str]:
        return list(dict.fromkeys(k[1] for k in self._entries))

    def scores(self, metric: MetricId, parser: str) -> list[MetricScore]:
        try:
            return [self._entries[(metric, parser, i)] for i in self.ids]
        except KeyError as exc:
            raise StatsError(f"score table incomplete: missing {exc.args[0]}") from None

    def values(self, metric: MetricId, parser: str) -> np.ndarray:
        return np.array([s.similarity for s in self.scores(metric, parser)])

    def transformed(self, fn: Callable[[float], float]) -> ScoreTable:
        """Copy with every similarity passed through ``fn``.

        Used to check that rank statistics ignore monotone rescaling, so the
        [0, 1] range check on scores is deliberately bypassed.
        """
        out = {}
        for key, s in self._entries.items():
            clone = copy.copy(s)
            object.__setattr__(clone, "similarity", fn(s.similarity))
            out[key] = clone
        return ScoreTable(out, self.ids)


def macro_mean(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise StatsError("empty corpus")
    return float(np.mean(np.asarray(values, dtype=float)))


def corpus_score_macro(table: ScoreTable, metric: MetricId, parser: str) -> float:
    """Mean of per-pair similarities."""
    return macro_mean(table.values(metric, parser))


def acceptability_rate(labels: Sequence[int]) -> float:
    """Human macro score: share of acceptable parses."""
    return macro_mean(labels)


def pooled_f1(counts: Iterable[tuple[float, float, float]]) -> float:
    """Micro F1 from per-pair (matched, candidate total, reference total)."""
    m = c = r = 0.0
    for mi, ci, ri in counts:
        m, c, r = m + mi, c + ci, r + ri
    return f1(m, c, r)[2]


def micro_from_scores(metric: MetricId, scores: Sequence[MetricScore], smoothing: bool = False) -> float:
    if metric not in MICRO_CAPABLE:
        raise UnsupportedAggregation(f"micro aggregation is not defined for {metric}")
    if not scores:
        raise StatsError("empty corpus")
    if metric in (MetricId.SEMBLEU_K2, MetricId.SEMBLEU_K3):
        orders = len(scores[0].ngrams)
        pooled = tuple(
            tuple(sum(s.ngrams[n][field] for s in scores) for field in range(3)) for n in range(orders)
        )
        return bleu_from_stats(pooled, smoothing)
    return pooled_f1((s.matched, s.candidate_total, s.reference_total) for s in scores)


def corpus_score_micro(table: ScoreTable, metric: MetricId, parser: str, smoothing: bool = False) -> float:
    """Pool triple (or gram) counts over the corpus, then one F1 (or BLEU)."""
    metric = MetricId(metric)
    if metric not in MICRO_CAPABLE:
        raise UnsupportedAggregation(f"micro aggregation is not defined for {metric}")
    return micro_from_scores(metric, table.scores(metric, parser), smoothing)


def preference_counts(scores_a: Sequence[float], scores_b: Sequence[float]) -> tuple[float, float]:
    """Strict wins per side; every tie adds 0.5 to both, so the sum is n."""
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape:
        raise StatsError("score vectors differ in length")
    wins_a = int(np.sum(a > b))
    wins_b = int(np.sum(a < b))
    ties = len(a) - wins_a - wins_b
    return wins_a + ties / 2, wins_b + ties / 2


def strict_wins(scores_a: Sequence[float], scores_b: Sequence[float]) -> tuple[int, int]:
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    return int(np.sum(a > b)), int(np.sum(a < b))


def pairwise_accuracy(metric_deltas: Sequence[float], human: Sequence[int]) -> float:
    """Share of human-signed pairs where the metric difference has the same sign.

    Items with human label 0 are dropped; a metric tie on a signed item
    counts as a miss.
    """
    d = np.asarray(metric_deltas, dtype=float)
    h = np.asarray(human, dtype=float)
    if d.shape != h.shape:
        raise StatsError("metric deltas and human labels differ in length")
    signed = h != 0
    if not signed.any():
        raise StatsError("no items with a nonzero human preference")
    return float(np.mean(d[signed] * h[signed] > 0))


def acceptability_delta(scores: Sequence[float], labels: Sequence[int], avg: Callable = np.median) -> float:
    """Median rank of acceptable parses minus median rank of unacceptable ones.

    Ranks are ascending with average ranks for ties.
    """
    s = np.asarray(scores, dtype=float)
    lab = np.asarray(labels)
    if s.shape != lab.shape:
        raise StatsError("scores and labels differ in length")
    pos, neg = lab == 1, lab == 0
    if not pos.any() or not neg.any():
        raise StatsError("acceptability delta needs both acceptable and unacceptable parses")
    ranks = rankdata(s, method="average")
    return float(avg(ranks[pos]) - avg(ranks[neg]))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman's rho with average ranks; NaN when either side is constant."""
    rx = rankdata(np.asarray(x, dtype=float))
    ry = rankdata(np.asarray(y, dtype=float))
    if len(rx) != len(ry):
        raise StatsError("vectors differ in length")
    if len(rx) < 3:
        raise StatsError("Spearman correlation needs at least 3 items")
    dx, dy = rx - rx.mean(), ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        return math.nan
    return float(np.clip(dx @ dy / denom, -1.0, 1.0))


def spearman_matrix(columns: Mapping[str, Sequence[float]]) -> tuple[list[str], np.ndarray]:
    """Symmetric correlation matrix over named score columns; NaN marks undefined cells."""
    names = list(columns)
    k = len(names)
    mat = np.full((k, k), np.nan)
    for i in range(k):
        for j in range(i, k):
            rho = spearman(columns[names[i]], columns[names[j]])
            if i == j and not math.isnan(rho):
                rho = 1.0
            mat[i, j] = mat[j, i] = rho
    return names, mat


def binomial_test(wins: int, n: int, p0: float = 0.5) -> float:
    """Two-sided exact binomial p-value."""
    if n <= 0:
        raise StatsError("binomial test needs n > 0")
    if not 0 <= wins <= n:
        raise StatsError(f"wins={wins} outside [0, {n}]")
    return float(binomtest(int(wins), int(n), p0, alternative="two-sided").pvalue)


def preference_test(scores_a: Sequence[float], scores_b: Sequence[float], ties: str = "split") -> dict[str, float]:
    """Binomial test on preference counts.

    ``split``: tie halves are folded into the win counts (rounded half up)
    and n is the corpus size. ``exclude``: strict wins only, ties dropped.
    """
    if ties == "split":
        pa, _ = preference_counts(scores_a, scores_b)
        n = len(scores_a)
        wins = min(int(math.floor(pa + 0.5)), n)
    elif ties == "exclude":
        wins, losses = strict_wins(scores_a, scores_b)
        n = wins + losses
    else:
        raise StatsError(f"unknown tie mode {ties!r}")
    p = binomial_test(wins, n) if n > 0 else 1.0
    return {"wins": wins, "n": n, "p_value": p, "ties": ties}


def bootstrap_ci(
    statistic: Callable[[np.ndarray], float],
    data: Sequence | np.ndarray,
    B: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap over rows of ``data``.

    Replicates on which the statistic is undefined (raises ``StatsError``
    or returns NaN) are dropped.
    """
    arr = np.asarray(data)
    n = len(arr)
    if n == 0:
        raise StatsError("bootstrap needs data")
    rng = np.random.default_rng(seed)
    reps = []
    for _ in range(B):
        sample = arr[rng.integers(0, n, n)]
        try:
            val = statistic(sample)
        except StatsError:
            continue
        if not math.isnan(val):
            reps.append(val)
    if not reps:
        raise StatsError("statistic undefined on every bootstrap replicate")
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(np.asarray(reps), [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def pa_statistic(rows: np.ndarray) -> float:
    """Pairwise accuracy on an (n, 2) array of (metric delta, human label)."""
    return pairwise_accuracy(rows[:, 0], rows[:, 1])


def acceptability_statistic(rows: np.ndarray) -> float:
    """Acceptability delta on an (n, 2) array of (score, label)."""
    return acceptability_delta(rows[:, 0], rows[:, 1])


def excludes(interval: tuple[float, float], value: float) -> bool:
    lo, hi = interval
    return value < lo or value > hi


def sentence_length(sentence: str) -> int:
    return len(sentence.split())


def length_buckets(
    sentences: Sequence[str], values: Sequence[float], cap: int = 55
) -> list[tuple[int, float, int]]:
    """``(bucket, mean value, count)`` by whitespace token length; lengths above ``cap`` pool into ``cap``."""
    if len(sentences) != len(values):
        raise StatsError("sentences and values differ in length")
    groups: dict[int, list[float]] = defaultdict(list)
    for snt, v in zip(sentences, values):
        groups[min(sentence_length(snt), cap)].append(float(v))
    return [(b, float(np.mean(groups[b])), len(groups[b])) for b in sorted(groups)]


def write_buckets_csv(rows: Sequence[tuple[int, float, int]], path: str | Path, series: str = "value") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bucket", series, "count"])
        for b, mean, count in rows:
            w.writerow([b, f"{mean:.4f}", count])
