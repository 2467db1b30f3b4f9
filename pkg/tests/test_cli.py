import json
import os
import subprocess
import sys

import numpy as np
import pytest

from amreval import cli
from amreval.metrics import ALL_METRICS, MetricId, MetricSuite
from amreval.metrics.smatch import graded_concepts
from amreval.embeddings import fallback_store
from amreval.penman import read_corpus
from amreval.report import InvariantError, build_score_table, load_corpus
from amreval.stats import corpus_score_macro, corpus_score_micro, preference_counts, preference_test


def run(capsys, *args):
    code = cli.main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *args):
    code, out, err = run(capsys, *args, "--format", "json")
    assert code == 0, err
    return json.loads(out)


def test_score_identity(capsys, fixtures):
    path = fixtures / "identity.amr"
    report = run_json(capsys, "score", "--gold", path, "--a", path)
    for row in report["rows"]:
        assert row["macro"] == pytest.approx(1.0, abs=1e-9)
        if row["micro"] is not None:
            assert row["micro"] == pytest.approx(1.0, abs=1e-9)
    assert {r["metric"] for r in report["rows"]} == {m.value for m in ALL_METRICS}
    assert report["provenance"]["metric_versions"]


def test_score_figure2(capsys, fixtures):
    report = run_json(capsys, "score", "--gold", fixtures / "figure2_gold.amr",
                      "--a", fixtures / "figure2_cand1.amr", "--metrics", "smatch")
    (row,) = report["rows"]
    assert row["macro"] == row["micro"] == pytest.approx(0.2, abs=1e-12)


def test_score_table_output_shows_both_and_banner(capsys, fixtures):
    code, out, err = run(capsys, "score", "--gold", fixtures / "divergence" / "gold.amr",
                         "--a", fixtures / "divergence" / "a.amr", "--metrics", "smatch,wlk-k2")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].split() == ["metric", "macro", "micro"]
    smatch_row = next(line.split() for line in lines if line.startswith("smatch"))
    assert smatch_row[1] != smatch_row[2]
    assert all(len(x.split(".")[1]) == 4 for x in smatch_row[1:])
    wlk_row = next(line.split() for line in lines if line.startswith("wlk"))
    assert wlk_row[2] == "-"
    assert "macro" in err


def test_compare_same_files(capsys, fixtures):
    path = fixtures / "identity.amr"
    report = run_json(capsys, "compare", "--gold", path, "--a", path, "--b", path, "--a-name", "x", "--b-name", "y")
    n = report["n"]
    for row in report["macro"]:
        assert row["preference"] == {"x": n / 2, "y": n / 2, "delta": 0.0}
        assert row["score"]["delta"] == 0.0
    assert all(r["score"]["delta"] == 0.0 for r in report["micro"])


def test_compare_dominant_parser(capsys, fixtures):
    gold = fixtures / "identity.amr"
    # every item of the second parser is replaced by an unrelated graph
    worse = fixtures / "worse.amr"
    graphs = read_corpus(gold)
    worse_text = "\n\n".join(f"# ::id {g.metadata['id']}\n(q / qqqq-zzzz-99)" for g in graphs)
    worse.write_text(worse_text + "\n", encoding="utf-8")
    try:
        report = run_json(capsys, "compare", "--gold", gold, "--a", gold, "--b", worse)
    finally:
        worse.unlink()
    n = report["n"]
    for row in report["macro"]:
        assert (row["preference"]["identity"], row["preference"]["worse"]) == (n, 0)
        assert row["significance"]["significant"]


def test_compare_matches_library(capsys, fixtures):
    d = fixtures / "demo"
    report = run_json(capsys, "compare", "--gold", d / "gold.amr", "--a", d / "a.amr", "--b", d / "b.amr",
                      "--ties", "exclude")
    corpus = load_corpus(d / "gold.amr", [d / "a.amr", d / "b.amr"])
    table = build_score_table(corpus, ALL_METRICS, MetricSuite())
    for row in report["macro"]:
        m = MetricId(row["metric"])
        va, vb = table.values(m, "a"), table.values(m, "b")
        pa, pb = preference_counts(va, vb)
        assert row["preference"] == {"a": pa, "b": pb, "delta": pa - pb}
        assert row["significance"]["p_value"] == preference_test(va, vb, "exclude")["p_value"]
        sa, sb = corpus_score_macro(table, m, "a"), corpus_score_macro(table, m, "b")
        assert row["score"] == {"a": sa, "b": sb, "delta": sa - sb}
    for row in report["micro"]:
        m = MetricId(row["metric"])
        assert row["score"]["a"] == corpus_score_micro(table, m, "a")


def test_compare_micro_only_lists_capable_metrics(capsys, fixtures):
    d = fixtures / "demo"
    report = run_json(capsys, "compare", "--gold", d / "gold.amr", "--a", d / "a.amr", "--b", d / "b.amr",
                      "--aggregate", "micro")
    assert "macro" not in report
    assert {r["metric"] for r in report["micro"]} == {"sema", "sembleu-k2", "sembleu-k3", "smatch", "s2match"}


def test_compare_with_human_row(capsys, fixtures):
    d = fixtures / "demo"
    report = run_json(capsys, "compare", "--gold", d / "gold.amr", "--a", d / "a.amr", "--b", d / "b.amr",
                      "--prefs", d / "prefs.tsv", "--accept", d / "accept.tsv")
    hum = report["macro"][0]
    assert hum["metric"] == "HUM"
    assert hum["preference"] == {"a": 2.5, "b": 3.5, "delta": -1.0}
    assert hum["score"]["a"] == pytest.approx(0.5)


def test_meta_eval_golden(capsys, fixtures):
    d = fixtures / "demo"
    report = run_json(capsys, "meta-eval", "--gold", d / "gold.amr", "--a", d / "a.amr", "--b", d / "b.amr",
                      "--prefs", d / "prefs.tsv", "--accept", d / "accept.tsv", "--bootstrap-b", "200")
    golden = json.loads((d / "golden_meta_eval.json").read_text())
    rows = {r["metric"]: r for r in report["rows"]}
    assert rows["HUM"]["pa"] == 1.0
    assert (rows["RAND"]["pa"], rows["RAND"]["acceptability_delta"]) == (0.5, 0.0)
    for metric, expected in golden.items():
        assert rows[metric]["pa"] == expected["pa"]
        assert rows[metric]["acceptability_delta"] == expected["acceptability_delta"]
        lo, hi = rows[metric]["pa_ci"]
        assert rows[metric]["pa_significant"] == (not lo <= 0.5 <= hi)


def test_meta_eval_self_consistent_annotations(capsys, fixtures, tmp_path):
    d = fixtures / "demo"
    corpus = load_corpus(d / "gold.amr", [d / "a.amr", d / "b.amr"])
    table = build_score_table(corpus, [MetricId.SMATCH], MetricSuite())
    va, vb = table.values(MetricId.SMATCH, "a"), table.values(MetricId.SMATCH, "b")
    prefs = tmp_path / "p.tsv"
    prefs.write_text("id\tlabel\n" + "".join(
        f"{i}\t{int(np.sign(x - y))}\n" for i, x, y in zip(corpus.ids, va, vb)), encoding="utf-8")
    report = run_json(capsys, "meta-eval", "--gold", d / "gold.amr", "--a", d / "a.amr", "--b", d / "b.amr",
                      "--prefs", prefs, "--accept", d / "accept.tsv", "--metrics", "smatch", "--bootstrap-b", "50")
    assert report["rows"][2]["pa"] == 1.0


def test_meta_eval_rejects_unknown_ids(capsys, fixtures, tmp_path):
    d = fixtures / "demo"
    prefs = tmp_path / "p.tsv"
    prefs.write_text("id\tlabel\nnope\t1\n", encoding="utf-8")
    code, _, err = run(capsys, "meta-eval", "--gold", d / "gold.amr", "--a", d / "a.amr", "--b", d / "b.amr",
                       "--prefs", prefs, "--accept", d / "accept.tsv", "--metrics", "smatch")
    assert code == 2 and "not in corpus" in err


def test_correlate(capsys, fixtures):
    d = fixtures / "demo"
    code, out, _ = run(capsys, "correlate", "--gold", d / "gold.amr", "--a", d / "a.amr", "--b", d / "b.amr")
    assert code == 0
    rows = [line.split(",") for line in out.splitlines()]
    names = rows[0][1:]
    assert names == [m.value for m in ALL_METRICS]
    cells = {(rows[i + 1][0], names[j]): rows[i + 1][j + 1] for i in range(len(names)) for j in range(len(names))}
    for a in names:
        assert cells[(a, a)] == "1.0000"
        for b in names:
            assert cells[(a, b)] == cells[(b, a)]


def test_correlate_constant_column_is_empty(capsys, fixtures):
    path = fixtures / "identity.amr"
    code, out, _ = run(capsys, "correlate", "--gold", path, "--a", path, "--metrics", "smatch,sema")
    assert code == 0
    assert out.splitlines()[1] == "smatch,,"


def test_correlate_smatch_s2match_degenerate(capsys, fixtures):
    d = fixtures / "divergence"
    graphs = [g for name in ("gold", "a", "b") for g in read_corpus(d / f"{name}.amr")]
    concepts = sorted({c for g in graphs for c in g.nodes.values()})
    match = graded_concepts(fallback_store())
    # precondition: graded matching collapses to exact matching on this corpus
    assert all(match(x, y) == float(x == y) for x in concepts for y in concepts)
    report = run_json(capsys, "correlate", "--gold", d / "gold.amr", "--a", d / "a.amr", "--b", d / "b.amr",
                      "--metrics", "smatch,s2match")
    assert report["matrix"][0][1] == 1.0


def test_length_bins(capsys, fixtures, tmp_path):
    d = fixtures / "demo"
    report = run_json(capsys, "length-bins", "--gold", d / "gold.amr", "--a", d / "a.amr", "--b", d / "b.amr",
                      "--metrics", "smatch", "--accept", d / "accept.tsv")
    assert set(report["series"]) == {"human:a", "human:b", "smatch:a", "smatch:b"}
    assert sum(e["count"] for e in report["series"]["smatch:a"]) == 6
    out_dir = tmp_path / "bins"
    out_dir.mkdir()
    code, _, _ = run(capsys, "length-bins", "--gold", d / "gold.amr", "--a", d / "a.amr",
                     "--metrics", "smatch", "--out", out_dir)
    assert code == 0
    (csv_file,) = out_dir.iterdir()
    assert csv_file.read_text().splitlines()[0] == "series,bucket,mean,count"


def test_length_bins_needs_sentences(capsys, fixtures):
    path = fixtures / "identity.amr"
    code, _, err = run(capsys, "length-bins", "--gold", path, "--a", path, "--metrics", "smatch")
    assert code == 2 and "::snt" in err


def test_graph_tools(capsys, fixtures):
    code, out, _ = run(capsys, "graph", "triples", fixtures / "figure2_gold.amr")
    assert code == 0 and len(out.splitlines()) == 4 and "TOP\tl\tlook-over-06" in out
    _, out, _ = run(capsys, "graph", "kgrams", fixtures / "figure2_gold.amr", "--k", "2")
    assert out.splitlines() == ["look-over-06\tARG1\tflag"]
    single = fixtures / "single.amr"
    single.write_text("(a / alone)\n", encoding="utf-8")
    try:
        _, plain, _ = run(capsys, "graph", "triples", single)
        _, moved, _ = run(capsys, "graph", "e2n", single)
    finally:
        single.unlink()
    assert plain == moved


def test_graph_parse_error_has_location(capsys, tmp_path):
    bad = tmp_path / "bad.amr"
    bad.write_text("(a / b\n", encoding="utf-8")
    code, _, err = run(capsys, "graph", "triples", bad)
    assert code == 2 and "line 1" in err


def test_usage_errors(capsys, fixtures):
    path = fixtures / "identity.amr"
    with pytest.raises(SystemExit) as info:
        cli.main(["score", "--gold", str(path)])
    assert info.value.code == 1
    code, _, err = run(capsys, "score", "--gold", path, "--a", path, "--metrics", "bleu")
    assert code == 1 and "unknown metric" in err


def test_data_errors(capsys, fixtures, tmp_path):
    code, _, _ = run(capsys, "score", "--gold", tmp_path / "missing.amr", "--a", fixtures / "identity.amr")
    assert code == 2
    short = tmp_path / "short.amr"
    short.write_text("(a / b)\n", encoding="utf-8")
    code, _, err = run(capsys, "score", "--gold", fixtures / "demo" / "gold.amr", "--a", short)
    assert code == 2


def test_invariant_violation_exit_code(capsys, fixtures, monkeypatch):
    def broken(*args, **kwargs):
        raise InvariantError("pA + pB != n")

    monkeypatch.setattr(cli, "compare_report", broken)
    d = fixtures / "demo"
    code, _, err = run(capsys, "compare", "--gold", d / "gold.amr", "--a", d / "a.amr", "--b", d / "b.amr",
                       "--metrics", "smatch")
    assert code == 3 and "internal" in err


def test_positional_alignment_warns(capsys, fixtures, tmp_path, caplog):
    stripped = tmp_path / "noids.amr"
    stripped.write_text("\n".join(line for line in (fixtures / "demo" / "a.amr").read_text().splitlines()
                                  if "::id" not in line), encoding="utf-8")
    report = run_json(capsys, "score", "--gold", fixtures / "demo" / "gold.amr", "--a", stripped,
                      "--metrics", "smatch")
    assert report["n"] == 6
    assert "position" in caplog.text


def test_embeddings_flag_overrides_env(capsys, fixtures, tmp_path, monkeypatch):
    vec = tmp_path / "v.txt"
    vec.write_text("dog 1 0\ncat 0 1\n", encoding="utf-8")
    monkeypatch.setenv("AMREVAL_EMBEDDINGS", str(tmp_path / "does-not-exist.txt"))
    path = fixtures / "figure2_gold.amr"
    report = run_json(capsys, "score", "--gold", path, "--a", path, "--metrics", "s2match", "--embeddings", vec)
    assert report["provenance"]["settings"]["embeddings"] == str(vec)


def test_scores_out_and_jobs(capsys, fixtures, tmp_path):
    d = fixtures / "demo"
    serial, parallel = tmp_path / "s.csv", tmp_path / "p.csv"
    run(capsys, "score", "--gold", d / "gold.amr", "--a", d / "a.amr", "--scores-out", serial)
    run(capsys, "score", "--gold", d / "gold.amr", "--a", d / "a.amr", "--scores-out", parallel, "--jobs", "2")
    assert serial.read_bytes() == parallel.read_bytes()
    assert serial.read_text().splitlines()[0] == "id,parser," + ",".join(m.value for m in ALL_METRICS)


def test_output_is_byte_identical_across_processes(fixtures, tmp_path):
    d = fixtures / "demo"
    args = ["-m", "amreval.cli", "meta-eval", "--gold", str(d / "gold.amr"), "--a", str(d / "a.amr"),
            "--b", str(d / "b.amr"), "--prefs", str(d / "prefs.tsv"), "--accept", str(d / "accept.tsv"),
            "--bootstrap-b", "100", "--format", "json"]
    outs = []
    for seed in ("0", "12345"):
        env = {**os.environ, "PYTHONHASHSEED": seed}
        outs.append(subprocess.run([sys.executable, *args], capture_output=True, check=True, env=env).stdout)
    assert outs[0] == outs[1]
