import pytest

from conftest import demo_catalog
from eventdistill.backend import BackendConfig, ScriptedBackend
from eventdistill.evaluation import (
    EvaluationError,
    adjacent_pairs,
    assemble_report,
    f1,
    load_judgments,
    precision,
    recall,
    save_judgments,
)
from eventdistill.generation import Corpus, GeneratedSequence, GeneratorConfig


def corpus_of(*label_lists):
    sequences = [
        GeneratedSequence(
            trigger=labels[0],
            labels=list(labels),
            termination="max_len_reached",
            step_attempts=[1] * (len(labels) - 1),
            backend_id="scripted",
        )
        for labels in label_lists
    ]
    return Corpus(sequences=sequences, catalog_digest="", config=GeneratorConfig())


def judge(script, model_name="judge"):
    return ScriptedBackend(BackendConfig(kind="scripted", script=script, model_name=model_name))


def test_adjacent_pairs():
    corpus = corpus_of(["a", "b", "c"])
    assert adjacent_pairs(corpus) == [("a", "b"), ("b", "c")]
    assert adjacent_pairs(corpus_of(["a"])) == []
    assert adjacent_pairs(corpus_of(["a", "b"], ["a", "b"])) == [("a", "b"), ("a", "b")]


def test_precision_arithmetic():
    corpus = corpus_of(["a", "b"], ["b", "c"], ["c", "d"])
    result = precision(corpus, judge(["YES. One.", "YES. Two.", "NO. Three."]))
    assert result.yes == 2 and result.no == 1
    assert abs(result.precision - 2 / 3) < 1e-12
    assert result.completeness == 1.0


def test_precision_all_yes_is_one():
    corpus = corpus_of(["a", "b", "c"], ["d", "e"])
    result = precision(corpus, judge(["YES."] * 3))
    assert result.precision == 1.0


def test_precision_unparseable_handling():
    corpus = corpus_of(["a", "b"], ["b", "c"])
    lax = precision(corpus, judge(["YES. Sure.", "hmm"]))
    assert lax.unparseable == 1
    assert lax.precision == 1.0  # excluded from the denominator
    strict = precision(corpus, judge(["YES. Sure.", "hmm"]), strict=True)
    assert strict.precision == 0.5  # counted as NO


def test_precision_no_pairs_is_an_error():
    with pytest.raises(EvaluationError):
        precision(corpus_of(["a"]), judge(["YES."]))


def test_precision_duplicate_pairs_judged_once_weighted_twice():
    corpus = corpus_of(["a", "b"], ["a", "b"], ["b", "c"])
    # two distinct pairs only: a third backend call would exhaust the script
    result = precision(corpus, judge(["YES. Once.", "NO. Other."]))
    assert result.yes == 2 and result.no == 1
    assert result.total_pairs == 3


def test_precision_cache_survives_reruns():
    corpus = corpus_of(["a", "b"])
    cache = {}
    first = precision(corpus, judge(["YES. Cached."]), cache=cache)
    # empty script: any fresh call would fail, so the cache must serve the verdict
    second = precision(corpus, judge([]), cache=cache)
    assert first.yes == second.yes == 1


def test_precision_backend_failures_reduce_completeness():
    corpus = corpus_of(["a", "b"], ["b", "c"])
    result = precision(corpus, judge(["YES. Only one response."]))
    assert result.yes == 1
    assert result.failed == 1
    assert result.completeness == 0.5


def test_precision_concurrent_judging_matches_serial():
    corpus = corpus_of(["a", "b"], ["b", "c"], ["c", "d"], ["d", "e"])
    script = {
        "Can a cause a b": "YES. 1.",
        "Can b cause a c": "NO. 2.",
        "Can c cause a d": "YES. 3.",
        "Can d cause a e": "NO. 4.",
    }
    serial = precision(corpus, judge(dict(script)))
    threaded = precision(corpus, judge(dict(script)), jobs=4)
    assert (serial.yes, serial.no) == (threaded.yes, threaded.no) == (2, 2)


def test_recall_fixture(tmp_path):
    catalog = demo_catalog(tmp_path)
    reference = catalog.causal_reference()
    corpus = corpus_of(["earthquake", "tsunami", "conflict"])
    result = recall(corpus, reference, catalog)
    assert result.matched == 1
    assert result.attainable == 2
    assert result.recall == 0.5


def test_recall_direction_insensitive(tmp_path):
    catalog = demo_catalog(tmp_path)
    reference = catalog.causal_reference()
    reversed_corpus = corpus_of(["tsunami", "earthquake"])
    assert recall(reversed_corpus, reference, catalog).matched == 1


def test_recall_resolves_aliases_before_matching(tmp_path):
    catalog = demo_catalog(tmp_path)
    reference = {("Q1", "Q3"), ("Q3", "Q1")}
    corpus = corpus_of(["quake", "dispute"])
    assert recall(corpus, reference, catalog).recall == 1.0


def test_recall_empty_corpus_is_zero(tmp_path):
    catalog = demo_catalog(tmp_path)
    result = recall(corpus_of(), catalog.causal_reference(), catalog)
    assert result.recall == 0.0


def test_recall_empty_reference_is_an_error(tmp_path):
    catalog = demo_catalog(tmp_path)
    with pytest.raises(EvaluationError):
        recall(corpus_of(["a", "b"]), set(), catalog)


def test_recall_counts_unattainable_pairs(tmp_path):
    catalog = demo_catalog(tmp_path)
    reference = set(catalog.causal_reference())
    reference |= {("Q1", "ghost"), ("ghost", "Q1")}
    result = recall(corpus_of(["earthquake", "tsunami"]), reference, catalog)
    assert result.unattainable == 1
    assert result.attainable == 2


def test_recall_monotone_in_corpus_growth(tmp_path):
    catalog = demo_catalog(tmp_path)
    reference = catalog.causal_reference()
    small = corpus_of(["earthquake", "tsunami"])
    grown = corpus_of(["earthquake", "tsunami"], ["famine", "refugee crisis"])
    assert (
        recall(grown, reference, catalog).recall
        >= recall(small, reference, catalog).recall
    )


def test_f1_values():
    assert abs(f1(0.81, 0.54) - 0.648) < 1e-3
    assert round(f1(0.81, 0.54), 2) == 0.65
    assert f1(1.0, 1.0) == 1.0
    assert f1(0.0, 0.5) == 0.0
    assert f1(0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        f1(1.2, 0.5)
    with pytest.raises(ValueError):
        f1(0.5, -0.1)


def test_f1_bounded_by_arithmetic_mean():
    grid = [i / 10 for i in range(11)]
    for p in grid:
        for r in grid:
            value = f1(p, r)
            assert 0.0 <= value <= 1.0
            assert value <= (p + r) / 2 + 1e-12
            assert value <= max(p, r) + 1e-12


def test_assemble_report(tmp_path):
    catalog = demo_catalog(tmp_path)
    corpus = corpus_of(["earthquake", "tsunami"])
    p = precision(corpus, judge(["YES. Sure."]))
    r = recall(corpus, catalog.causal_reference(), catalog)
    report = assemble_report(p, r)
    assert report.precision == 1.0
    assert report.recall == 0.5
    assert abs(report.f1 - f1(1.0, 0.5)) < 1e-12
    assert report.counts["yes"] == 1
    assert report.counts["reference_pairs"] == 2
    partial = assemble_report(None, r)
    assert partial.precision is None and partial.f1 is None


def test_judgments_file_round_trip(tmp_path):
    corpus = corpus_of(["a", "b"], ["b", "c"])
    cache = {}
    precision(corpus, judge(["YES. First.", "NO. Second."]), cache=cache)
    path = tmp_path / "judgments.jsonl"
    save_judgments(cache, str(path))
    loaded = load_judgments(str(path))
    assert loaded == cache
    # a corrupt line is rejected with its location
    path.write_text(path.read_text() + "{broken\n")
    with pytest.raises(EvaluationError):
        load_judgments(str(path))
