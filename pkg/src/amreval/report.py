"""Corpus assembly, score-table construction and report building.

Everything the CLI prints is produced here, so library callers get the
same numbers the command line does.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .graph import AmrGraph
from .metrics import MICRO_CAPABLE, MetricId, MetricScore, MetricSuite
from .penman import read_corpus
from .stats import (
    RAND_ACCEPTABILITY_DELTA,
    RAND_PA,
    CorpusItem,
    EvalCorpus,
    HumanJudgments,
    ScoreTable,
    StatsError,
    acceptability_delta,
    acceptability_rate,
    acceptability_statistic,
    bootstrap_ci,
    corpus_score_macro,
    corpus_score_micro,
    excludes,
    length_buckets,
    pa_statistic,
    pairwise_accuracy,
    preference_counts,
    preference_test,
    spearman_matrix,
)

log = logging.getLogger(__name__)

METRIC_VERSIONS = {m.value: "1" for m in MetricId}
SIGNIFICANCE = 0.05
RECOMMENDATION = (
    "Report the macro (per-sentence average) score next to the micro score: micro pooling "
    "weights long sentences more, and macro gives a complementary view of parser quality."
)


class AlignmentError(ValueError):
    """Candidate and gold corpora cannot be paired up."""


class InvariantError(RuntimeError):
    """A report failed one of its internal consistency checks."""


def align_corpus(gold: Sequence[AmrGraph], candidates: dict[str, Sequence[AmrGraph]]) -> EvalCorpus:
    """Pair gold and candidate graphs by ``::id`` when every graph has one, else by position."""
    gold_ids = [g.metadata.get("id") for g in gold]
    use_ids = all(gold_ids) and len(set(gold_ids)) == len(gold_ids)
    items = []
    for pos, g in enumerate(gold):
        item_id = gold_ids[pos] if use_ids else str(pos + 1)
        items.append(CorpusItem(item_id, g.metadata.get("snt"), g, {}))
    for name, graphs in candidates.items():
        cand_ids = [c.metadata.get("id") for c in graphs]
        if use_ids and all(cand_ids):
            by_id = {cid: c for cid, c in zip(cand_ids, graphs)}
            missing = [i.id for i in items if i.id not in by_id]
            extra = sorted(set(by_id) - {i.id for i in items})
            if missing or extra or len(by_id) != len(graphs):
                raise AlignmentError(
                    f"{name}: ids do not match gold (missing {missing[:5]}, unexpected {extra[:5]})"
                )
            for it in items:
                it.candidates[name] = by_id[it.id]
        else:
            if len(graphs) != len(gold):
                raise AlignmentError(f"{name}: {len(graphs)} graphs but gold has {len(gold)}")
            if use_ids:
                log.warning("%s: candidate graphs lack ::id lines; aligning by position", name)
            for it, c in zip(items, graphs):
                it.candidates[name] = c
    for it in items:
        if it.sentence is None:
            for c in it.candidates.values():
                if "snt" in c.metadata:
                    it.sentence = c.metadata["snt"]
                    break
    return EvalCorpus(items)


def parser_names(paths: Sequence[str | Path], names: Sequence[str | None] | None = None) -> list[str]:
    """Explicit names, else file stems, else positional letters when stems collide."""
    names = list(names or [None] * len(paths))
    out = [n if n else Path(p).stem for p, n in zip(paths, names)]
    if len(set(out)) != len(out):
        out = [n if n else chr(ord("A") + i) for i, n in enumerate(names)]
    if len(set(out)) != len(out):
        raise AlignmentError(f"parser names are not unique: {out}")
    return out


def load_corpus(gold: str | Path, candidates: Sequence[str | Path], names: Sequence[str | None] | None = None) -> EvalCorpus:
    labels = parser_names(candidates, names)
    return align_corpus(read_corpus(gold), {n: read_corpus(p) for n, p in zip(labels, candidates)})


def _score_task(args: tuple[MetricSuite, Sequence[MetricId], AmrGraph, AmrGraph]) -> list[MetricScore]:
    suite, metrics, cand, gold = args
    return [suite.score(m, cand, gold) for m in metrics]


def build_score_table(
    corpus: EvalCorpus, metrics: Sequence[MetricId], suite: MetricSuite, jobs: int = 1
) -> ScoreTable:
    """Score every (item, parser) pair under every metric.

    Pair evaluations are independent, so ``jobs > 1`` farms them out to
    worker processes; results do not depend on the number of workers.
    """
    metrics = [MetricId(m) for m in metrics]
    keys = [(it.id, p) for it in corpus.items for p in corpus.parsers]
    tasks = [(suite, metrics, it.candidates[p], it.gold) for it in corpus.items for p in corpus.parsers]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_score_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_score_task(t) for t in tasks]
    entries = {}
    for (item_id, parser), scores in zip(keys, results):
        for m, s in zip(metrics, scores):
            entries[(m, parser, item_id)] = s
    return ScoreTable(entries, corpus.ids)


def config_hash(config: dict[str, Any]) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def provenance(config: dict[str, Any], suite: MetricSuite, metrics: Sequence[MetricId]) -> dict[str, Any]:
    return {
        "tool": "amreval",
        "version": __version__,
        "config_hash": config_hash({**config, **suite.settings()}),
        "settings": suite.settings(),
        "metric_versions": {m.value: METRIC_VERSIONS[m.value] for m in metrics},
    }


def _check_delta(row: dict[str, Any], a: str, b: str) -> None:
    if row["delta"] != row[a] - row[b]:
        raise InvariantError(f"delta mismatch in {row}")


def score_report(
    corpus: EvalCorpus, table: ScoreTable, metrics: Sequence[MetricId], parser: str, suite: MetricSuite
) -> dict[str, Any]:
    rows = []
    for m in metrics:
        micro = corpus_score_micro(table, m, parser, suite.sembleu_smoothing) if m in MICRO_CAPABLE else None
        rows.append({"metric": m.value, "macro": corpus_score_macro(table, m, parser), "micro": micro})
    items = []
    for it in corpus.items:
        entry: dict[str, Any] = {"id": it.id}
        for m in metrics:
            entry[m.value] = table[(m, parser, it.id)].similarity
        items.append(entry)
    return {"command": "score", "parser": parser, "n": len(corpus), "rows": rows,
            "recommendation": RECOMMENDATION, "items": items}


def compare_report(
    corpus: EvalCorpus,
    table: ScoreTable,
    metrics: Sequence[MetricId],
    parsers: tuple[str, str],
    suite: MetricSuite,
    ties: str = "split",
    aggregate: str = "both",
    judgments: HumanJudgments | None = None,
) -> dict[str, Any]:
    """Preference counts, corpus scores and their differences for two parsers.

    Delta is always first parser minus second parser.
    """
    a, b = parsers
    n = len(corpus)
    macro_rows, micro_rows = [], []
    if judgments is not None and judgments.preferences:
        macro_rows.append(_human_compare_row(corpus, judgments, a, b))
    for m in metrics:
        va, vb = table.values(m, a), table.values(m, b)
        pa, pb = preference_counts(va, vb)
        if pa + pb != n:
            raise InvariantError(f"{m}: preference counts {pa} + {pb} != {n}")
        test = preference_test(va, vb, ties)
        row: dict[str, Any] = {
            "metric": m.value,
            "preference": {a: pa, b: pb, "delta": pa - pb},
            "significance": {**test, "significant": test["p_value"] < SIGNIFICANCE},
            "score": None,
        }
        _check_delta(row["preference"], a, b)
        if aggregate in ("macro", "both"):
            sa, sb = corpus_score_macro(table, m, a), corpus_score_macro(table, m, b)
            row["score"] = {a: sa, b: sb, "delta": sa - sb}
            _check_delta(row["score"], a, b)
        macro_rows.append(row)
        if aggregate in ("micro", "both") and m in MICRO_CAPABLE:
            sa = corpus_score_micro(table, m, a, suite.sembleu_smoothing)
            sb = corpus_score_micro(table, m, b, suite.sembleu_smoothing)
            micro_rows.append({"metric": m.value, "score": {a: sa, b: sb, "delta": sa - sb}})
    report: dict[str, Any] = {"command": "compare", "parsers": [a, b], "n": n, "ties": ties}
    if aggregate in ("macro", "both"):
        report["macro"] = macro_rows
    else:
        report["preference"] = macro_rows
    if aggregate in ("micro", "both"):
        report["micro"] = micro_rows
    return report


def _human_compare_row(corpus: EvalCorpus, judgments: HumanJudgments, a: str, b: str) -> dict[str, Any]:
    labels = [judgments.preferences.get(i) for i in corpus.ids]
    if any(lab is None for lab in labels):
        raise StatsError("preference labels do not cover every corpus item")
    wins_a = sum(1 for lab in labels if lab == 1)
    wins_b = sum(1 for lab in labels if lab == -1)
    ties = len(labels) - wins_a - wins_b
    pa, pb = wins_a + ties / 2, wins_b + ties / 2
    row: dict[str, Any] = {"metric": "HUM", "preference": {a: pa, b: pb, "delta": pa - pb}, "score": None}
    acc = judgments.acceptability
    if all((i, p) in acc for i in corpus.ids for p in (a, b)):
        sa = acceptability_rate([acc[(i, a)] for i in corpus.ids])
        sb = acceptability_rate([acc[(i, b)] for i in corpus.ids])
        row["score"] = {a: sa, b: sb, "delta": sa - sb}
    return row


def _derived_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1)[0])


def _validate_judgments(corpus: EvalCorpus, judgments: HumanJudgments, parsers: Sequence[str]) -> None:
    ids = set(corpus.ids)
    unknown = sorted(i for i in judgments.preferences if i not in ids)
    unknown += sorted(i for i, _ in judgments.acceptability if i not in ids)
    if unknown:
        raise StatsError(f"annotation ids not in corpus: {sorted(set(unknown))[:10]}")
    bad = sorted({p for _, p in judgments.acceptability if p not in parsers})
    if bad:
        raise StatsError(f"acceptability labels name unknown parsers {bad}; known: {list(parsers)}")


def meta_eval_report(
    corpus: EvalCorpus,
    table: ScoreTable,
    metrics: Sequence[MetricId],
    parsers: tuple[str, str],
    judgments: HumanJudgments,
    bootstrap_b: int = 1000,
    seed: int = 0,
    level: float = 0.95,
) -> dict[str, Any]:
    """Pairwise accuracy and acceptability delta per metric, with bootstrap intervals.

    A result is flagged when the random-baseline value lies outside its
    interval. HUM and RAND rows anchor the scale.
    """
    a, b = parsers
    _validate_judgments(corpus, judgments, parsers)
    pref_ids = [i for i in corpus.ids if i in judgments.preferences]
    human = np.array([judgments.preferences[i] for i in pref_ids], dtype=float)
    acc_keys = [(i, p) for i in corpus.ids for p in (a, b) if (i, p) in judgments.acceptability]
    acc_labels = np.array([judgments.acceptability[k] for k in acc_keys], dtype=float)
    if not pref_ids or not np.any(human != 0):
        raise StatsError("no nonzero preference labels")
    if not acc_keys or acc_labels.min() == acc_labels.max():
        raise StatsError("acceptability labels need both classes")

    rows: list[dict[str, Any]] = [
        {"metric": "HUM", "pa": 1.0, "acceptability_delta": acceptability_delta(acc_labels, acc_labels)},
        {"metric": "RAND", "pa": RAND_PA, "acceptability_delta": RAND_ACCEPTABILITY_DELTA},
    ]
    for k, m in enumerate(metrics):
        va = dict(zip(table.ids, table.values(m, a)))
        vb = dict(zip(table.ids, table.values(m, b)))
        deltas = np.array([va[i] - vb[i] for i in pref_ids])
        scores = np.array([(va if p == a else vb)[i] for i, p in acc_keys])
        pa = pairwise_accuracy(deltas, human)
        ad = acceptability_delta(scores, acc_labels)
        signed = human != 0
        pa_ci = bootstrap_ci(pa_statistic, np.column_stack([deltas[signed], human[signed]]),
                             bootstrap_b, level, _derived_seed(seed, k, 0))
        ad_ci = bootstrap_ci(acceptability_statistic, np.column_stack([scores, acc_labels]),
                             bootstrap_b, level, _derived_seed(seed, k, 1))
        rows.append({
            "metric": m.value,
            "pa": pa,
            "pa_ci": list(pa_ci),
            "pa_significant": excludes(pa_ci, RAND_PA),
            "acceptability_delta": ad,
            "acceptability_delta_ci": list(ad_ci),
            "acceptability_delta_significant": excludes(ad_ci, RAND_ACCEPTABILITY_DELTA),
        })
    return {
        "command": "meta-eval",
        "parsers": [a, b],
        "n_preferences": int(np.sum(human != 0)),
        "n_acceptability": len(acc_keys),
        "bootstrap_b": bootstrap_b,
        "level": level,
        "rows": rows,
    }


def correlation_columns(table: ScoreTable, metrics: Sequence[MetricId], parsers: Sequence[str]) -> dict[str, np.ndarray]:
    """One column per metric over every (parser, item) score, parser-major."""
    return {m.value: np.concatenate([table.values(m, p) for p in parsers]) for m in metrics}


def correlation_report(table: ScoreTable, metrics: Sequence[MetricId], parsers: Sequence[str]) -> dict[str, Any]:
    names, mat = spearman_matrix(correlation_columns(table, metrics, parsers))
    return {
        "command": "correlate",
        "metrics": names,
        "matrix": [[None if math.isnan(x) else float(x) for x in row] for row in mat],
    }


def length_bins_report(
    corpus: EvalCorpus,
    table: ScoreTable | None,
    metrics: Sequence[MetricId],
    parsers: Sequence[str],
    judgments: HumanJudgments | None = None,
    cap: int = 55,
) -> dict[str, Any]:
    missing = [it.id for it in corpus.items if not it.sentence]
    if missing:
        raise StatsError(f"items without ::snt sentence: {missing[:10]}")
    sentences = [it.sentence for it in corpus.items]
    series: dict[str, list[tuple[int, float, int]]] = {}
    if judgments is not None and judgments.acceptability:
        for p in parsers:
            keys = [(i, p) for i in corpus.ids]
            if all(k in judgments.acceptability for k in keys):
                series[f"human:{p}"] = length_buckets(
                    sentences, [judgments.acceptability[k] for k in keys], cap
                )
    if table is not None:
        for m in metrics:
            for p in parsers:
                series[f"{m.value}:{p}"] = length_buckets(sentences, table.values(m, p), cap)
    return {
        "command": "length-bins",
        "cap": cap,
        "series": {
            name: [{"bucket": b, "mean": mean, "count": c} for b, mean, c in rows]
            for name, rows in series.items()
        },
    }
