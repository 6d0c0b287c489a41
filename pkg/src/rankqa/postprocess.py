"""Non-maximum suppression and short-answer rejection for predicted spans."""

from dataclasses import dataclass
from typing import Iterable, List, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ContractError
from .metrics.mrc import token_f1
from .types import MAX_RANK, AnswerSpan, SpanRankedList


@dataclass(frozen=True)
class NmsConfig:
    overlap_threshold: float = 0.5
    min_token_len: int = 1
    max_answers: int = MAX_RANK

    def __post_init__(self):
        if not 0.0 <= self.overlap_threshold <= 1.0:
            raise ContractError(f"overlap_threshold must be in [0, 1], got {self.overlap_threshold}")
        if self.max_answers < 1:
            raise ContractError("max_answers must be >= 1")
        if self.min_token_len < 0:
            raise ContractError("min_token_len must be >= 0")


def _by_score(spans: Iterable[AnswerSpan]) -> List[AnswerSpan]:
    return sorted(spans, key=lambda s: (-s.score, s.start_token, s.end_token))


def nms_spans(candidates: Sequence[AnswerSpan], config: NmsConfig = NmsConfig(), sample_id: str = "") -> SpanRankedList:
    kept: List[AnswerSpan] = []
    for span in _by_score(candidates):
        if len(kept) == config.max_answers:
            break
        if all(token_f1(span, k) <= config.overlap_threshold for k in kept):
            kept.append(span)
    return SpanRankedList(sample_id, tuple(kept))


def reject_short(spans: Sequence[AnswerSpan], min_token_len: int) -> List[AnswerSpan]:
    return [s for s in spans if len(s) >= min_token_len]


class SpanPostprocessor(TransformerMixin, BaseEstimator):
    """Short-answer rejection followed by NMS, applied per sample.

    Rejection runs first so a short span can never suppress a longer one.
    """

    def __init__(self, overlap_threshold=0.5, min_token_len=1, max_answers=MAX_RANK):
        self.overlap_threshold = overlap_threshold
        self.min_token_len = min_token_len
        self.max_answers = max_answers

    def fit(self, X=None, y=None):
        self.config_ = NmsConfig(self.overlap_threshold, self.min_token_len, self.max_answers)
        return self

    def transform(self, X: Sequence[SpanRankedList]) -> List[SpanRankedList]:
        config = NmsConfig(self.overlap_threshold, self.min_token_len, self.max_answers)
        out = []
        for ranked in X:
            kept = nms_spans(reject_short(ranked.spans, config.min_token_len), config, ranked.sample_id)
            out.append(SpanRankedList(ranked.sample_id, kept.spans, ranked.no_answer_score))
        return out
