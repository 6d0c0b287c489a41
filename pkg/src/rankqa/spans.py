"""Span probabilities, losses and decoding from per-token start/end logits.

Logit vectors have one entry per passage token plus the null answer at
index 0, so passage token ``t`` lives at logit index ``t + 1``.
"""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ContractError
from .types import AnswerSpan, MrcSample, SpanRankedList

NULL_INDEX = 0
PROB_FLOOR = 1e-12
LOG_PROB_FLOOR = math.log(PROB_FLOOR)
#: (start loss + end loss) * POSITION_WEIGHT; 0.5 averages the two heads
POSITION_WEIGHT = 0.5


@dataclass(frozen=True)
class TokenLogits:
    sample_id: str
    start_logits: np.ndarray
    end_logits: np.ndarray

    def __post_init__(self):
        start = np.asarray(self.start_logits, dtype=float)
        end = np.asarray(self.end_logits, dtype=float)
        if start.ndim != 1 or start.shape != end.shape:
            raise ContractError(f"{self.sample_id!r}: start/end logits must be 1-d and the same length")
        if start.size < 2:
            raise ContractError(f"{self.sample_id!r}: logits need the null slot plus at least one token")
        if not (np.isfinite(start).all() and np.isfinite(end).all()):
            raise ContractError(f"{self.sample_id!r}: logits must be finite")
        object.__setattr__(self, "start_logits", start)
        object.__setattr__(self, "end_logits", end)

    @property
    def n_tokens(self) -> int:
        return self.start_logits.size - 1


class Loss(NamedTuple):
    value: float
    clipped: bool  # True when some gold probability hit PROB_FLOOR


def _check_vector(logits) -> np.ndarray:
    x = np.asarray(logits, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ContractError("expected a non-empty 1-d vector")
    if np.isnan(x).any():
        raise ContractError("NaN in logits")
    return x


def softmax_probs(logits) -> np.ndarray:
    x = _check_vector(logits)
    e = np.exp(x - x.max())
    return e / e.sum()


def log_softmax(logits) -> np.ndarray:
    x = _check_vector(logits)
    return x - logsumexp(x)


def _gold_log_probs(logits: TokenLogits, gold: AnswerSpan):
    s, e = gold.start_token + 1, gold.end_token + 1
    if e >= logits.start_logits.size:
        raise ContractError(
            f"{logits.sample_id!r}: gold span {gold.key} outside logits for {logits.n_tokens} tokens"
        )
    return log_softmax(logits.start_logits)[s], log_softmax(logits.end_logits)[e]


def _span_loss(logits: TokenLogits, golds: Sequence[AnswerSpan]) -> Loss:
    total = 0.0
    clipped = False
    for g in golds:
        for lp in _gold_log_probs(logits, g):
            if lp < LOG_PROB_FLOOR:
                lp, clipped = LOG_PROB_FLOOR, True
            total -= lp
    return Loss(POSITION_WEIGHT * total, clipped)


def fal_loss(logits: TokenLogits, gold: Sequence[AnswerSpan]) -> Loss:
    """Negative log-likelihood of the first gold answer only."""
    gold = list(gold)
    if not gold:
        raise ContractError("fal_loss needs at least one gold answer")
    return _span_loss(logits, gold[:1])


def mal_loss(logits: TokenLogits, gold: Sequence[AnswerSpan]) -> Loss:
    """Negative log-likelihood summed over every gold answer."""
    gold = list(gold)
    if not gold:
        raise ContractError("mal_loss needs at least one gold answer")
    return _span_loss(logits, gold)


def _span_grid(start: np.ndarray, end: np.ndarray, max_span_len: Optional[int]) -> np.ndarray:
    """Scores for every (start, end) token pair; invalid pairs are -inf."""
    grid = start[1:, None] + end[None, 1:]
    n = grid.shape[0]
    i, j = np.indices((n, n))
    valid = j >= i
    if max_span_len is not None:
        valid &= (j - i) < max_span_len
    return np.where(valid, grid, -np.inf)


def decode_spans(logits: TokenLogits, max_span_len: int = 30, n_best: int = 20,
                 sample: Optional[MrcSample] = None) -> List[AnswerSpan]:
    """Top ``n_best`` non-null spans scored by log P(start) + log P(end).

    Ties are broken by (start, end) ascending. With ``sample`` given, spans
    carry their rendered passage text.
    """
    if max_span_len < 1 or n_best < 1:
        raise ContractError("max_span_len and n_best must be >= 1")
    grid = _span_grid(log_softmax(logits.start_logits), log_softmax(logits.end_logits), max_span_len)
    flat = grid.ravel()
    n = grid.shape[0]
    finite = np.flatnonzero(np.isfinite(flat))
    # lexsort: last key is primary; flat index order == (start, end) order
    order = finite[np.lexsort((finite, -flat[finite]))][:n_best]
    spans = []
    for idx in order:
        s, e = divmod(int(idx), n)
        score = float(flat[idx])
        if sample is not None:
            spans.append(sample.span(s, e, score))
        else:
            spans.append(AnswerSpan(s, e, "", score))
    return spans


def no_answer_score(logits: TokenLogits, max_span_len: Optional[int] = None) -> float:
    """Null-position score minus the best non-null span score, on raw logits."""
    null = logits.start_logits[NULL_INDEX] + logits.end_logits[NULL_INDEX]
    best = _span_grid(logits.start_logits, logits.end_logits, max_span_len).max()
    return float(null - best)


class SpanDecoder(TransformerMixin, BaseEstimator):
    """Turn :class:`TokenLogits` into ranked candidate spans.

    Stateless; ``fit`` only exists for pipeline compatibility. ``transform``
    returns one :class:`SpanRankedList` per input, carrying the no-answer
    score for later thresholding.
    """

    def __init__(self, max_span_len=30, n_best=20):
        self.max_span_len = max_span_len
        self.n_best = n_best

    def fit(self, X=None, y=None):
        return self

    def transform(self, X, samples=None):
        samples = samples or {}
        out = []
        for lg in X:
            spans = decode_spans(lg, self.max_span_len, self.n_best, samples.get(lg.sample_id))
            out.append(SpanRankedList(lg.sample_id, tuple(spans), no_answer_score(lg, self.max_span_len)))
        return out
