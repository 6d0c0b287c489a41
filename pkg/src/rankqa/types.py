"""Domain types shared across the package.

Everything here is immutable after construction, so loaded collections and
runs can be shared freely between threads.
"""

import enum
import math
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .exceptions import ContractError, IntegrityError
from .text import Token, nfc, passage_tokens, render_span

MAX_RANK = 10


class _NullDoc(enum.Enum):
    NULL_DOC = "-1"

    def __repr__(self):
        return "NULL_DOC"


#: The "unanswerable from the whole collection" prediction. Written as ``-1``
#: in run and qrels files, never a valid passage id.
NULL_DOC = _NullDoc.NULL_DOC
NULL_DOC_ID = NULL_DOC.value

DocId = Union[str, _NullDoc]


class AnswerType(str, enum.Enum):
    MULTI = "multi"
    SINGLE = "single"
    ZERO = "zero"

    @classmethod
    def from_count(cls, n: int) -> "AnswerType":
        if n == 0:
            return cls.ZERO
        return cls.SINGLE if n == 1 else cls.MULTI


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    gold_answer_type: Optional[AnswerType] = None

    def __post_init__(self):
        if not self.id:
            raise ContractError("question id must be non-empty")
        if not self.text:
            raise ContractError(f"question {self.id!r} has empty text")


@dataclass(frozen=True)
class Passage:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise ContractError("passage id must be non-empty")
        if self.id == NULL_DOC_ID:
            raise ContractError(f"passage id {NULL_DOC_ID!r} is reserved for the null document")
        if not self.text:
            raise ContractError(f"passage {self.id!r} has empty text")


class Qrels:
    """Binary relevance judgments, question id -> set of relevant passage ids.

    Questions with an empty set are known zero-answer questions.
    """

    def __init__(self, judgments: Mapping[str, Iterable[str]]):
        frozen = {}
        for qid, pids in judgments.items():
            pids = frozenset(pids)
            if NULL_DOC_ID in pids or NULL_DOC in pids:
                raise IntegrityError(f"qrels for {qid!r} list the null document as relevant")
            frozen[qid] = pids
        self._judgments = MappingProxyType(frozen)

    @property
    def judgments(self) -> Mapping[str, FrozenSet[str]]:
        return self._judgments

    def relevant(self, qid: str) -> FrozenSet[str]:
        return self._judgments.get(qid, frozenset())

    def psi(self, qid: str) -> int:
        return len(self.relevant(qid))

    def answer_type(self, qid: str) -> AnswerType:
        return AnswerType.from_count(self.psi(qid))

    def question_ids(self) -> List[str]:
        return list(self._judgments)

    def n_pairs(self) -> int:
        return sum(len(p) for p in self._judgments.values())

    def __contains__(self, qid):
        return qid in self._judgments

    def __len__(self):
        return len(self._judgments)

    def __eq__(self, other):
        return isinstance(other, Qrels) and dict(self._judgments) == dict(other._judgments)

    def __repr__(self):
        return f"Qrels({len(self)} questions, {self.n_pairs()} pairs)"


def _check_score(score) -> float:
    score = float(score)
    if not math.isfinite(score):
        raise ContractError(f"scores must be finite, got {score!r}")
    return score


def check_ranking(qid: str, ranking: Sequence[Tuple[DocId, float]]) -> Tuple[Tuple[DocId, float], ...]:
    """Validate one question's ranked list and return it as a tuple."""
    ranking = tuple((pid, _check_score(score)) for pid, score in ranking)
    ids = [pid for pid, _ in ranking]
    if len(set(ids)) != len(ids):
        raise IntegrityError(f"duplicate passage ids in ranking for {qid!r}")
    if NULL_DOC in ids and len(ids) != 1:
        raise IntegrityError(f"ranking for {qid!r} mixes the null document with passages")
    for (_, a), (_, b) in zip(ranking, ranking[1:]):
        if b > a:
            raise IntegrityError(f"ranking for {qid!r} is not sorted by non-increasing score")
    return ranking


@dataclass(frozen=True)
class RetrievalRun:
    """Per-question ranked passage lists.

    Lists may be deeper than ``MAX_RANK`` (recall at deep cutoffs needs
    them); the MAP and MRR evaluators truncate.
    """

    entries: Mapping[str, Tuple[Tuple[DocId, float], ...]]
    tag: str = "run"

    def __post_init__(self):
        checked = {qid: check_ranking(qid, ranking) for qid, ranking in self.entries.items()}
        object.__setattr__(self, "entries", MappingProxyType(checked))

    def ranking(self, qid: str) -> List[DocId]:
        return [pid for pid, _ in self.entries.get(qid, ())]

    def scores(self, qid: str) -> List[float]:
        return [s for _, s in self.entries.get(qid, ())]

    def is_null(self, qid: str) -> bool:
        return self.ranking(qid) == [NULL_DOC]

    def question_ids(self) -> List[str]:
        return list(self.entries)

    def __eq__(self, other):
        return (
            isinstance(other, RetrievalRun)
            and self.tag == other.tag
            and dict(self.entries) == dict(other.entries)
        )


@dataclass(frozen=True)
class AnswerSpan:
    """Inclusive token range within a passage.

    ``score`` is only meaningful for predictions.
    """

    start_token: int
    end_token: int
    text: str = ""
    score: float = 0.0

    def __post_init__(self):
        if not 0 <= self.start_token <= self.end_token:
            raise ContractError(f"invalid span ({self.start_token}, {self.end_token})")

    @property
    def key(self) -> Tuple[int, int]:
        return (self.start_token, self.end_token)

    def __len__(self):
        return self.end_token - self.start_token + 1

    def token_set(self) -> range:
        return range(self.start_token, self.end_token + 1)


@dataclass(frozen=True)
class MrcSample:
    sample_id: str
    question: Question
    passage: Passage
    gold: Tuple[AnswerSpan, ...] = ()
    tokens: Tuple[Token, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        tokens = tuple(passage_tokens(self.passage.text))
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "gold", tuple(self.gold))
        for span in self.gold:
            if span.end_token >= len(tokens):
                raise ContractError(
                    f"gold span {span.key} of {self.sample_id!r} exceeds passage length {len(tokens)}"
                )

    @property
    def is_zero_answer(self) -> bool:
        return not self.gold

    @property
    def answer_type(self) -> AnswerType:
        return AnswerType.from_count(len(self.gold))

    def span(self, start_token: int, end_token: int, score: float = 0.0) -> AnswerSpan:
        """Build a span over this sample's passage with its rendered text."""
        if end_token >= len(self.tokens):
            raise ContractError(f"span ({start_token}, {end_token}) exceeds passage length {len(self.tokens)}")
        text = render_span(self.passage.text, list(self.tokens), start_token, end_token)
        return AnswerSpan(start_token, end_token, text, score)


@dataclass(frozen=True)
class SpanRankedList:
    """Ranked answer spans for one sample. Empty means "no answer"."""

    sample_id: str
    spans: Tuple[AnswerSpan, ...] = ()
    no_answer_score: Optional[float] = None

    def __post_init__(self):
        spans = tuple(self.spans)
        for a, b in zip(spans, spans[1:]):
            if b.score > a.score:
                raise IntegrityError(f"spans for {self.sample_id!r} are not sorted by non-increasing score")
        object.__setattr__(self, "spans", spans)

    def __len__(self):
        return len(self.spans)

    def __iter__(self):
        return iter(self.spans)

    def truncated(self, k: int = MAX_RANK) -> "SpanRankedList":
        if len(self.spans) <= k:
            return self
        return SpanRankedList(self.sample_id, self.spans[:k], self.no_answer_score)


def make_passage(pid: str, text: str) -> Passage:
    return Passage(pid, nfc(text))


def warn_truncation(what: str, n: int, k: int = MAX_RANK):
    warnings.warn(f"{what} has {n} entries, truncating to {k}", stacklevel=3)


def question_types(qrels: Qrels) -> Dict[str, AnswerType]:
    return {qid: qrels.answer_type(qid) for qid in qrels.question_ids()}
