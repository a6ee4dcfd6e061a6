import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from literale import TripleStore
from literale.errors import ConfigurationError
from literale.evaluation import MetricSet, RankingReport, evaluate, rank_of, ranks_from_scores, read_keyvalue_report

from helpers import make_model, toy_store
from oracles import brute_force_report, metrics, rank_by_sort


class TestRankOf:
    def test_direct(self):
        assert rank_of(1, [0.9, 0.5, 0.1]) == 2

    def test_filtered(self):
        assert rank_of(1, [0.9, 0.5, 0.1], {0}) == 1

    def test_ties(self):
        assert rank_of(2, np.ones(5)) == 3

    def test_true_entity_never_filtered(self):
        assert rank_of(1, [0.9, 0.5, 0.1], {1}) == 2

    @settings(max_examples=60)
    @given(
        arrays(np.float64, 7, elements=st.sampled_from([0.0, 0.5, 1.0, 2.0])),
        st.integers(0, 6),
        st.sets(st.integers(0, 6)),
    )
    def test_matches_sort_oracle(self, scores, true, filt):
        assert rank_of(true, scores, filt) == rank_by_sort(true, list(scores), filt - {true})
        mask = np.zeros((1, 7), bool)
        mask[0, list(filt)] = True
        assert ranks_from_scores(scores[None], np.array([true]), mask)[0] == rank_of(true, scores, filt)


class FixedModel:
    """Looks up scores from a table indexed by (head, relation)."""

    def __init__(self, table, n_entities):
        self.table = table
        self.n_entities = n_entities

    def score_tails(self, heads, rels, batch_size=512):
        return np.array([self.table[(int(h), int(r))] for h, r in zip(heads, rels)])


def test_perfect_model():
    store = TripleStore(4, 1, [(0, 0, 1)], [], [(1, 0, 2), (3, 0, 0)])
    table = {}
    for h, r, t in store.test:
        table[(h, r)] = np.eye(4)[t]
        table[(t, r + 1)] = np.eye(4)[h]
    report = evaluate(FixedModel(table, 4), store, "test")
    assert report.mr == 1 and report.mrr == 1
    assert all(v == 1 for v in report.hits_at.values())


@pytest.mark.parametrize("kind", ["distmult", "complex", "conve"])
@pytest.mark.parametrize("filtered", [True, False])
def test_matches_brute_force(kind, filtered):
    model = make_model(kind, "linear", seed=3)
    store = toy_store()
    known = store.all_known
    head, tail = brute_force_report(model.score, 6, 2, store.test + store.valid, known, filtered)
    store2 = TripleStore(6, 2, store.train, [], store.test + store.valid)
    report = evaluate(model, store2, "test", filtered=filtered)
    assert list(report.head_ranks) == head
    assert list(report.tail_ranks) == tail
    assert report.overall.as_dict() == pytest.approx(metrics(head + tail), rel=1e-15)


def test_filtered_not_worse_than_raw():
    model = make_model("distmult", "tanh", seed=1)
    store = toy_store()
    raw = evaluate(model, store, "valid", filtered=False)
    filt = evaluate(model, store, "valid", filtered=True)
    assert np.all(filt.head_ranks <= raw.head_ranks)
    assert np.all(filt.tail_ranks <= raw.tail_ranks)


def test_order_and_workers_invariant():
    model = make_model("complex", "none", seed=2)
    store = toy_store()
    test = store.train[::-1]
    a = evaluate(model, TripleStore(6, 2, store.train, [], store.train), "test", batch_size=3)
    b = evaluate(model, TripleStore(6, 2, store.train, [], test), "test", batch_size=5, workers=3)
    assert a.as_dict() == b.as_dict()


def test_empty_split():
    with pytest.raises(ConfigurationError):
        evaluate(make_model("distmult", "none"), TripleStore(6, 2, [(0, 0, 1)], [], []), "test")


def test_report_outputs(tmp_path):
    report = RankingReport.from_ranks([1, 2, 4], [1, 1, 20])
    kv = report.to_keyvalue()
    path = tmp_path / "r.kv"
    path.write_text(kv)
    parsed = read_keyvalue_report(path)
    assert parsed["setting"] == "filtered" and parsed["n_test"] == "3"
    assert float(parsed["overall.mrr"]) == report.mrr
    keys = {k.split(".")[1] for k in parsed if "." in k}
    assert keys == {"mr", "mrr", "hits1", "hits3", "hits10"}
    table = report.to_table()
    assert table.splitlines()[1].split() == ["direction", "mr", "mrr", "hits1", "hits3", "hits10"]


def test_metric_values():
    m = MetricSet.from_ranks([1, 2, 4, 20])
    assert m.mr == pytest.approx(6.75)
    assert m.mrr == pytest.approx((1 + 0.5 + 0.25 + 0.05) / 4)
    assert m.hits_at == {1: 0.25, 3: 0.5, 10: 0.75}
