"""Command-line front end: ``amreval <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from .embeddings import EmbeddingError, resolve_store
from .graph import GraphError, edge_to_node_transform, extract_kgrams, to_triples
from .metrics import MetricId, MetricSuite, UnknownMetricError, parse_metric_list
from .penman import PenmanError, read_corpus
from .report import (
    RECOMMENDATION,
    AlignmentError,
    InvariantError,
    build_score_table,
    compare_report,
    correlation_report,
    length_bins_report,
    load_corpus,
    meta_eval_report,
    provenance,
    score_report,
)
from .stats import StatsError, read_judgments
from .transport import TransportError

log = logging.getLogger("amreval")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, candidates: int) -> None:
    p.add_argument("--gold", required=True, help="reference AMR corpus")
    p.add_argument("--a", required=True, help="candidate corpus of the first parser")
    if candidates == 2:
        p.add_argument("--b", required=True, help="candidate corpus of the second parser")
    else:
        p.add_argument("--b", help="optional second candidate corpus")
    p.add_argument("--a-name", help="parser id for --a (default: file stem)")
    p.add_argument("--b-name", help="parser id for --b (default: file stem)")
    p.add_argument("--metrics", default="all", help="comma list of metric ids, or 'all'")
    p.add_argument("--embeddings", help="GloVe-style vector file (overrides $AMREVAL_EMBEDDINGS)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=4, help="Smatch/S2match hill-climbing restarts")
    p.add_argument("--tau", type=float, default=0.5, help="S2match cosine threshold")
    p.add_argument("--sema-unary", choices=["on", "off"], default="on")
    p.add_argument("--sembleu-smoothing", action="store_true")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for scoring")
    p.add_argument("--format", choices=["json", "csv", "tsv-table"])
    p.add_argument("--out", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="amreval", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("score", help="micro and macro corpus scores for one parser")
    _common(p, 1)
    p.add_argument("--aggregate", choices=["micro", "macro", "both"], default="both")
    p.add_argument("--scores-out", help="write the per-item score table as CSV")

    p = sub.add_parser("compare", help="compare two parsers (preference counts and corpus scores)")
    _common(p, 2)
    p.add_argument("--aggregate", choices=["micro", "macro", "both"], default="both")
    p.add_argument("--ties", choices=["split", "exclude"], default="split")
    p.add_argument("--prefs", help="human preference TSV (adds a HUM row)")
    p.add_argument("--accept", help="human acceptability TSV")

    p = sub.add_parser("meta-eval", help="metric agreement with human judgments")
    _common(p, 2)
    p.add_argument("--prefs", required=True, help="human preference TSV")
    p.add_argument("--accept", required=True, help="human acceptability TSV")
    p.add_argument("--bootstrap-b", type=int, default=1000)

    p = sub.add_parser("correlate", help="Spearman correlation matrix between metrics")
    _common(p, 1)

    p = sub.add_parser("length-bins", help="per-sentence-length means for plotting")
    _common(p, 1)
    p.add_argument("--accept", help="human acceptability TSV (adds human:<parser> series)")
    p.add_argument("--cap", type=int, default=55)

    p = sub.add_parser("graph", help="debug dumps of graph structure")
    p.add_argument("tool", choices=["triples", "e2n", "kgrams"])
    p.add_argument("file")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--out")
    return parser


def _suite(args: argparse.Namespace) -> MetricSuite:
    return MetricSuite(
        store=resolve_store(args.embeddings),
        restarts=args.restarts,
        seed=args.seed,
        tau=args.tau,
        sema_unary=args.sema_unary == "on",
        sembleu_smoothing=args.sembleu_smoothing,
    )


def _config(args: argparse.Namespace) -> dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "verbose", "jobs", "format")}


def _fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, float):
        return f"{x:.4f}"
    return str(x)


def _rows(report: dict[str, Any]) -> tuple[list[str], list[list[Any]]]:
    cmd = report["command"]
    if cmd == "score":
        return ["metric", "macro", "micro"], [[r["metric"], r["macro"], r["micro"]] for r in report["rows"]]
    if cmd == "compare":
        a, b = report["parsers"]
        header = ["section", "metric", f"P:{a}", f"P:{b}", "P:delta", "p_value", "significant",
                  f"S:{a}", f"S:{b}", "S:delta"]
        rows = []
        for section in ("macro", "preference", "micro"):
            for r in report.get(section, []):
                pref = r.get("preference") or {}
                sig = r.get("significance") or {}
                score = r.get("score") or {}
                rows.append([section, r["metric"], pref.get(a), pref.get(b), pref.get("delta"),
                             sig.get("p_value"), sig.get("significant"),
                             score.get(a), score.get(b), score.get("delta")])
        return header, rows
    if cmd == "meta-eval":
        header = ["metric", "pa", "pa_lo", "pa_hi", "pa_dagger", "adelta", "adelta_lo", "adelta_hi", "adelta_dagger"]
        rows = []
        for r in report["rows"]:
            pa_ci = r.get("pa_ci") or [None, None]
            ad_ci = r.get("acceptability_delta_ci") or [None, None]
            rows.append([r["metric"], r["pa"], *pa_ci, r.get("pa_significant"),
                         r["acceptability_delta"], *ad_ci, r.get("acceptability_delta_significant")])
        return header, rows
    if cmd == "correlate":
        names = report["metrics"]
        return ["metric", *names], [[n, *row] for n, row in zip(names, report["matrix"])]
    if cmd == "length-bins":
        rows = [[name, e["bucket"], e["mean"], e["count"]] for name, entries in report["series"].items() for e in entries]
        return ["series", "bucket", "mean", "count"], rows
    raise InvariantError(f"no tabular layout for {cmd}")  # pragma: no cover


def render(report: dict[str, Any], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, ensure_ascii=False) + "\n"
    header, rows = _rows(report)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
        return buf.getvalue()
    cells = [header] + [[_fmt(x) or "-" for x in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "".join("\t".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n" for r in cells)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _candidates(args: argparse.Namespace) -> tuple[list[str], list[str | None]]:
    paths = [args.a] + ([args.b] if getattr(args, "b", None) else [])
    names = [args.a_name] + ([args.b_name] if getattr(args, "b", None) else [])
    return paths, names


def run_report(args: argparse.Namespace) -> dict[str, Any]:
    """Execute a scoring command and return its report (provenance included)."""
    metrics = parse_metric_list(args.metrics)
    suite = _suite(args)
    paths, names = _candidates(args)
    corpus = load_corpus(args.gold, paths, names)
    parsers = corpus.parsers
    cmd = args.command
    if cmd == "length-bins" and not metrics:
        table = None
    else:
        table = build_score_table(corpus, metrics, suite, jobs=args.jobs)

    if cmd == "score":
        if args.aggregate != "both":
            log.warning("score always reports micro and macro aggregates")
        report = score_report(corpus, table, metrics, parsers[0], suite)
        if args.scores_out:
            _write_scores(args.scores_out, corpus.ids, table, metrics, parsers)
    elif cmd == "compare":
        judgments = read_judgments(args.prefs, args.accept) if args.prefs else None
        report = compare_report(corpus, table, metrics, (parsers[0], parsers[1]), suite,
                                args.ties, args.aggregate, judgments)
    elif cmd == "meta-eval":
        judgments = read_judgments(args.prefs, args.accept)
        report = meta_eval_report(corpus, table, metrics, (parsers[0], parsers[1]), judgments,
                                  args.bootstrap_b, args.seed)
    elif cmd == "correlate":
        report = correlation_report(table, metrics, parsers)
    elif cmd == "length-bins":
        judgments = read_judgments(None, args.accept) if args.accept else None
        report = length_bins_report(corpus, table, metrics, parsers, judgments, args.cap)
    else:  # pragma: no cover
        raise UsageError(f"unknown command {cmd}")
    report["provenance"] = provenance(_config(args), suite, metrics)
    return report


def _write_scores(path: str, ids: Sequence[str], table, metrics: Sequence[MetricId], parsers: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "parser", *[m.value for m in metrics]])
        for p in parsers:
            for i in ids:
                w.writerow([i, p, *[repr(table[(m, p, i)].similarity) for m in metrics]])


def graph_dump(tool: str, path: str, k: int = 2) -> str:
    graphs = read_corpus(path)
    blocks = []
    for n, g in enumerate(graphs, 1):
        if tool == "kgrams":
            bag = extract_kgrams(g, k)
            lines = sorted(
                "\t".join(gram) if count == 1 else f"{count}x\t" + "\t".join(gram) for gram, count in bag.items()
            )
        else:
            target = edge_to_node_transform(g) if tool == "e2n" else g
            lines = sorted(f"{t.relation}\t{t.source}\t{t.target}" for t in to_triples(target))
        head = [f"# {g.metadata.get('id', n)}"] if len(graphs) > 1 else []
        blocks.append("\n".join(head + lines))
    return "\n\n".join(blocks) + "\n"


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        if args.command == "graph":
            _emit(graph_dump(args.tool, args.file, args.k), args.out)
            return EXIT_OK
        report = run_report(args)
        default = "csv" if args.command in ("correlate", "length-bins") else "tsv-table"
        fmt = args.format or default
        if args.command == "score" and fmt != "json":
            print(RECOMMENDATION, file=sys.stderr)
        if args.command == "length-bins" and args.out and Path(args.out).is_dir():
            for name, entries in report["series"].items():
                sub = {**report, "series": {name: entries}}
                _emit(render(sub, fmt), str(Path(args.out) / f"{name.replace(':', '_')}.csv"))
            return EXIT_OK
        _emit(render(report, fmt), args.out)
        return EXIT_OK
    except (UnknownMetricError, UsageError) as exc:
        print(f"amreval: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PenmanError, GraphError, AlignmentError, StatsError, EmbeddingError, TransportError, OSError) as exc:
        print(f"amreval: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantError as exc:
        print(f"amreval: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
