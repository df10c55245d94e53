import math
import random

import pytest

import cvemap


def test_label_grammar():
    a = cvemap.parse_label("20-14")
    assert a.chain == [20, 14]
    assert a.is_causal and not a.is_single
    assert str(a) == "20-14"
    assert a.cwe_ids() == ["CWE-276", "CWE-287"]
    assert cvemap.format_label(cvemap.LabelAssignment([3])) == "3"
    for bad in ["", "0", "26", "1-1", "a", "1--2"]:
        with pytest.raises(cvemap.DataError):
            cvemap.parse_label(bad)
    assert issubclass(cvemap.DataError, cvemap.Error)


def test_catalog():
    cat = cvemap.Catalog.builtin()
    assert len(cat) == 25
    assert cat.by_rank(7).cwe_id == "CWE-416"
    assert cat.rank_of("CWE-94") == 25
    assert cat.rank_of("CWE-1021") is None
    assert len(cat.collated_sentences(1)) > 1


def test_stats_and_split(tmp_path):
    rows = [cvemap.DatasetRow(f"CVE-2021-{1000 + i}", cvemap.LabelAssignment([i % 5 + 1])) for i in range(50)]
    rows.append(cvemap.DatasetRow("CVE-2021-2000", cvemap.parse_label("2-1")))
    path = tmp_path / "d.csv"
    cvemap.save_dataset(rows, str(path))
    loaded = cvemap.load_dataset(str(path))
    assert loaded == rows
    stats = cvemap.dataset_stats(loaded)
    assert (stats.total, stats.single_count, stats.causal_count) == (51, 50, 1)
    assert list(stats.per_label_counts[:5]) == [10] * 5

    singles = [r for r in rows if r.assignment.is_single]
    train, test = cvemap.stratified_split(singles, 0.8, 42)
    assert len(test) == 10
    assert {r.cve_id for r in train}.isdisjoint(r.cve_id for r in test)
    assert cvemap.stratified_split(singles, 0.8, 42) == (train, test)
    with pytest.raises(cvemap.DataError):
        cvemap.stratified_split(rows)


def test_preprocess():
    report = cvemap.cleanup("The issue affects Apache Mina SSHD before 2.9.1. It allows remote code execution.")
    assert report.removed
    assert "2.9.1" not in report.output
    assert cvemap.tokenize("Heap-based buffer overflow") == ["heap", "based", "buffer", "overflow"]
    assert len(cvemap.segment_sentences("One thing. Another thing.")) == 2


def test_bm25_and_metrics():
    record = cvemap.CveRecord("CVE-2021-1001", "SQL injection in the login form allows attackers to run SQL commands.")
    ranking = cvemap.bm25_rank(record)
    assert ranking.top() == 3
    assert sorted(ranking.ranks()) == list(range(1, 26))
    assert not ranking.fallback
    assert cvemap.reciprocal_rank(ranking, 3) == 1.0

    empty = cvemap.bm25_rank(cvemap.CveRecord("CVE-2021-1002", "zzzz qqqq"))
    assert empty.fallback
    assert empty.ranks() == list(range(1, 26))


def test_metric_oracle():
    rng = random.Random(5)
    for _ in range(300):
        order = list(range(1, 26))
        rng.shuffle(order)
        scores = [0.0] * 25
        for i, r in enumerate(order):
            scores[r - 1] = 25 - i
        ranking = cvemap.RankedList.from_scores("CVE-2021-1001", scores)
        truth = rng.randint(1, 25)
        k = rng.randint(1, 25)
        pos = order.index(truth) + 1
        assert cvemap.reciprocal_rank(ranking, truth) == pytest.approx(1 / pos, abs=1e-12)
        assert cvemap.average_precision_at_k(ranking, truth, k) == pytest.approx(1 / pos if pos <= k else 0, abs=1e-12)
        want = 1 / math.log2(pos + 1) if pos <= k else 0
        assert cvemap.ndcg_at_k(ranking, truth, k) == pytest.approx(want, abs=1e-12)


def test_evaluate_and_invariants():
    records = [
        cvemap.CveRecord("CVE-2021-1001", "SQL injection via the id parameter."),
        cvemap.CveRecord("CVE-2021-1002", "Cross-site scripting in the comment field."),
    ]
    gold = [
        cvemap.DatasetRow("CVE-2021-1001", cvemap.LabelAssignment([3])),
        cvemap.DatasetRow("CVE-2021-1002", cvemap.LabelAssignment([2])),
    ]
    report = cvemap.evaluate("bm25", [cvemap.bm25_rank(r) for r in records], gold)
    assert report.n_queries == 2
    assert report.map_at[1] == report.ndcg_at[1]
    assert cvemap.check_invariants(report) == []


def test_export_and_macro_f1():
    rows = [cvemap.DatasetRow("CVE-2021-1001", cvemap.LabelAssignment([7]))]
    records = [cvemap.CveRecord("CVE-2021-1001", "Use after free in the renderer.")]
    pairs = cvemap.export_training_pairs(rows, records, negatives=3, seed=1)
    assert len(pairs) == 4
    assert [p.relevance for p in pairs].count(1) == 1
    assert len({p.cwe_id for p in pairs}) == 4

    macro, classes = cvemap.macro_f1({"CVE-2021-1001": "double-free"}, rows)
    assert macro == 0.0
    assert classes == {"Use After Free": 0.0, "double-free": 0.0}
