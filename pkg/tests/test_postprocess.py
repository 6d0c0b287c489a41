import pytest
from hypothesis import given
from hypothesis import strategies as st

from rankqa.exceptions import ContractError
from rankqa.metrics.mrc import token_f1
from rankqa.postprocess import NmsConfig, SpanPostprocessor, nms_spans, reject_short
from rankqa.types import SpanRankedList

from helpers import spans
from oracles import nms_reference


def keys(ranked):
    return [s.key for s in ranked.spans]


class TestNms:
    def test_heavy_overlap(self):
        out = nms_spans(spans((2, 5), (3, 5), scores=[0.9, 0.8]))
        assert keys(out) == [(2, 5)]

    def test_disjoint_both_kept(self):
        out = nms_spans(spans((0, 1), (5, 6), scores=[0.2, 0.7]))
        assert keys(out) == [(5, 6), (0, 1)]

    def test_six_candidates(self):
        cands = [(0, 3, 0.9), (1, 4, 0.85), (2, 2, 0.8), (6, 9, 0.7), (8, 9, 0.6), (11, 11, 0.5)]
        out = nms_spans(spans(*[c[:2] for c in cands], scores=[c[2] for c in cands]), NmsConfig(0.3))
        assert keys(out) == [c[:2] for c in nms_reference(cands, 0.3, 10)]

    def test_max_answers(self):
        out = nms_spans(spans(*[(i, i) for i in range(12)]), NmsConfig(max_answers=3))
        assert len(out) == 3

    def test_bad_config(self):
        with pytest.raises(ContractError):
            NmsConfig(overlap_threshold=1.5)
        with pytest.raises(ContractError):
            NmsConfig(max_answers=0)


class TestRejectShort:
    def test_single_token_removed(self):
        assert [s.key for s in reject_short(spans((1, 1), (2, 4)), 2)] == [(2, 4)]

    def test_identity(self):
        cands = spans((1, 1), (2, 4))
        assert reject_short(cands, 1) == cands

    @given(st.lists(st.tuples(st.integers(0, 10), st.integers(0, 4)), max_size=10), st.integers(0, 6))
    def test_filter_oracle(self, raw, min_len):
        cands = spans(*[(s, s + d) for s, d in raw])
        assert reject_short(cands, min_len) == [c for c in cands if c.end_token - c.start_token + 1 >= min_len]


candidates = st.lists(
    st.tuples(st.integers(0, 15), st.integers(0, 4), st.integers(0, 1000)).map(lambda t: (t[0], t[0] + t[1], t[2] / 1000)),
    max_size=15,
)


class TestProperties:
    @given(candidates, st.sampled_from([0.0, 0.3, 0.5, 0.8, 1.0]))
    def test_matches_reference(self, cands, threshold):
        out = nms_spans(spans(*[c[:2] for c in cands], scores=[c[2] for c in cands]), NmsConfig(threshold))
        ref = nms_reference(cands, threshold, 10)
        assert [(s.start_token, s.end_token, s.score) for s in out.spans] == ref

    @given(candidates, st.floats(0, 1))
    def test_overlap_bound_and_idempotence(self, cands, threshold):
        config = NmsConfig(threshold)
        out = nms_spans(spans(*[c[:2] for c in cands], scores=[c[2] for c in cands]), config)
        for i, a in enumerate(out.spans):
            for b in out.spans[i + 1:]:
                assert token_f1(a, b) <= threshold
        assert nms_spans(out.spans, config) == out


def test_postprocessor_keeps_no_answer_score():
    ranked = SpanRankedList("s", tuple(spans((2, 5), (3, 5), (9, 9), scores=[0.9, 0.8, 0.1])), -2.0)
    pp = SpanPostprocessor(min_token_len=2)
    assert pp.get_params()["overlap_threshold"] == 0.5
    (out,) = pp.fit_transform([ranked])
    assert keys(out) == [(2, 5)]
    assert out.no_answer_score == -2.0
    assert out.sample_id == "s"
