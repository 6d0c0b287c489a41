import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rankqa.ensemble import aggregate_retrieval, aggregate_spans
from rankqa.exceptions import ContractError
from rankqa.types import NULL_DOC, RetrievalRun, SpanRankedList

from helpers import spans


def sum_and_sort(members):
    """Reference: total score per id, sorted by (-total, best member rank, id)."""
    totals, best = {}, {}
    for ranking in members:
        for rank, (key, score) in enumerate(ranking):
            totals.setdefault(key, []).append(score)
            best[key] = min(rank, best.get(key, rank))
    out = [(k, math.fsum(v)) for k, v in totals.items()]
    return sorted(out, key=lambda t: (-t[1], best[t[0]], t[0]))


class TestRetrieval:
    def test_single_run_identity(self):
        run = RetrievalRun({"q": [("b", 3.0), ("a", 2.0), ("c", 2.0)]})
        assert aggregate_retrieval([run]).entries == run.entries

    def test_two_members(self):
        m1 = RetrievalRun({"q": [("p1", 0.9), ("p2", 0.1)]})
        m2 = RetrievalRun({"q": [("p2", 0.8), ("p1", 0.2)]})
        out = aggregate_retrieval([m1, m2])
        assert out.ranking("q") == ["p1", "p2"]
        assert out.scores("q") == [pytest.approx(1.1), pytest.approx(0.9)]

    def test_identical_runs(self):
        run = RetrievalRun({"q": [("x", 5.0), ("y", 1.0), ("z", 1.0)]})
        assert aggregate_retrieval([run, run]).ranking("q") == run.ranking("q")

    def test_truncates(self):
        run = RetrievalRun({"q": [(f"p{i:02d}", 20.0 - i) for i in range(15)]})
        assert len(aggregate_retrieval([run]).ranking("q")) == 10

    def test_null_doc_ignored(self):
        a = RetrievalRun({"q": [(NULL_DOC, 0.0)]})
        b = RetrievalRun({"q": [("p", 1.0)]})
        with pytest.warns(UserWarning, match="null document"):
            out = aggregate_retrieval([a, b])
        assert out.ranking("q") == ["p"]

    def test_union_of_questions_warns(self):
        with pytest.warns(UserWarning, match="different questions"):
            out = aggregate_retrieval([RetrievalRun({"a": [("p", 1.0)]}), RetrievalRun({"b": [("p", 1.0)]})])
        assert out.question_ids() == ["a", "b"]

    def test_empty(self):
        with pytest.raises(ContractError):
            aggregate_retrieval([])


class TestSpans:
    def test_direct_sum(self):
        a = {"s": SpanRankedList("s", tuple(spans((2, 5), scores=[0.6])))}
        b = {"s": SpanRankedList("s", tuple(spans((2, 5), scores=[0.3])))}
        (span,) = aggregate_spans([a, b])["s"].spans
        assert span.key == (2, 5)
        assert span.score == pytest.approx(0.9)

    def test_single_model_spans_carried(self):
        a = {"s": SpanRankedList("s", tuple(spans((0, 0), scores=[0.6])))}
        b = {"s": SpanRankedList("s", tuple(spans((4, 4), scores=[0.5])))}
        out = aggregate_spans([a, b])["s"]
        assert [(s.key, s.score) for s in out.spans] == [((0, 0), 0.6), ((4, 4), 0.5)]

    def test_three_models_four_spans(self):
        members = [
            [((0, 1), 0.5), ((2, 3), 0.4), ((4, 4), 0.3), ((5, 6), 0.1)],
            [((2, 3), 0.9), ((0, 1), 0.2), ((5, 6), 0.15), ((4, 4), 0.05)],
            [((4, 4), 0.7), ((5, 6), 0.6), ((0, 1), 0.1), ((2, 3), 0.0)],
        ]
        runs = [{"s": SpanRankedList("s", tuple(spans(*[k for k, _ in m], scores=[v for _, v in m])))} for m in members]
        out = aggregate_spans(runs)["s"]
        assert [(s.key, s.score) for s in out.spans] == sum_and_sort(members)

    def test_no_answer_scores_summed(self):
        a = {"s": SpanRankedList("s", (), -1.0)}
        b = {"s": SpanRankedList("s", (), -2.5)}
        c = {"s": SpanRankedList("s", ())}
        assert aggregate_spans([a, b, c])["s"].no_answer_score == -3.5
        assert aggregate_spans([c])["s"].no_answer_score is None


score_lists = st.lists(
    st.lists(st.tuples(st.sampled_from("abcdefg"), st.integers(0, 8)), max_size=6, unique_by=lambda t: t[0]),
    min_size=1,
    max_size=4,
)


def as_run(pairs):
    ranked = sorted(((p, s / 4) for p, s in pairs), key=lambda t: -t[1])
    return RetrievalRun({"q": ranked})


class TestProperties:
    @given(score_lists)
    def test_member_order_irrelevant(self, members):
        runs = [as_run(m) for m in members]
        base = aggregate_retrieval(runs)
        for perm in itertools.permutations(runs):
            assert aggregate_retrieval(list(perm)) == base

    @given(score_lists, st.integers(1, 5))
    def test_k_copies_keep_order(self, members, k):
        run = as_run(members[0])
        assert aggregate_retrieval([run] * k).ranking("q") == run.ranking("q")[:10]

    @given(score_lists)
    def test_matches_reference(self, members):
        runs = [as_run(m) for m in members]
        expected = sum_and_sort([r.entries["q"] for r in runs])[:10]
        assert list(aggregate_retrieval(runs).entries["q"]) == expected
