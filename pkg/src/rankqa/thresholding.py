"""Zero-answer decisions: unanswerability scores, thresholds and threshold search.

Raw unanswerability scores (higher means "more likely unanswerable") are
min-max normalized over the evaluated batch, and an item is marked
unanswerable when its normalized score is strictly greater than the
threshold ``zeta``.
"""

import math
from dataclasses import dataclass
from statistics import fmean
from typing import Callable, Dict, FrozenSet, Hashable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ContractError
from .metrics.mrc import pap_task_b
from .metrics.retrieval import question_ap
from .types import MAX_RANK, NULL_DOC, AnswerType, MrcSample, Qrels, RetrievalRun, SpanRankedList

#: Task-B default threshold
DEFAULT_MRC_ZETA = 0.8

Metric = Callable[[FrozenSet[Hashable]], float]


@dataclass(frozen=True)
class UnanswerabilityScores:
    raw: Mapping[Hashable, float]
    normalized: Mapping[Hashable, float]

    def __len__(self):
        return len(self.raw)

    def ids(self) -> List[Hashable]:
        return list(self.raw)


def gamma_retrieval(run_scores: Union[RetrievalRun, Mapping[str, Sequence[float]]], top: int = MAX_RANK) -> Dict[str, float]:
    """Negated sum of the top returned relevance scores, per question."""
    if isinstance(run_scores, RetrievalRun):
        run_scores = {
            q: [s for p, s in run_scores.entries[q] if p is not NULL_DOC] for q in run_scores.question_ids()
        }
    gamma = {}
    for qid, scores in run_scores.items():
        scores = list(scores)[:top]
        if not scores:
            raise ContractError(f"question {qid!r} has no scored passages")
        gamma[qid] = -math.fsum(scores)
    return gamma


def gamma_mrc(predictions: Mapping[str, SpanRankedList]) -> Dict[str, float]:
    """No-answer scores carried by span predictions (samples without one are skipped)."""
    return {sid: r.no_answer_score for sid, r in predictions.items() if r.no_answer_score is not None}


def normalize(raw: Mapping[Hashable, float]) -> UnanswerabilityScores:
    if not raw:
        raise ContractError("cannot normalize an empty score set")
    values = np.array(list(raw.values()), dtype=float)
    if not np.isfinite(values).all():
        raise ContractError("unanswerability scores must be finite")
    lo, hi = values.min(), values.max()
    if hi > lo:
        scaled = (values - lo) / (hi - lo)
    else:
        scaled = np.zeros_like(values)
    return UnanswerabilityScores(dict(raw), dict(zip(raw, scaled.tolist())))


def _normalized(scores) -> Mapping[Hashable, float]:
    return scores.normalized if isinstance(scores, UnanswerabilityScores) else scores


def sigma(scores, zeta: float) -> FrozenSet[Hashable]:
    """Ids whose normalized score is strictly above ``zeta``."""
    return frozenset(k for k, v in _normalized(scores).items() if v > zeta)


def target_count(n: int, fraction: float) -> int:
    """Nearest integer to ``fraction * n``, halves rounded up."""
    return int(math.floor(fraction * n + 0.5))


def quantile_zeta(scores, fraction: float) -> float:
    """Threshold marking ``round(fraction * N)`` items, fewer when ties straddle the cut."""
    if not 0.0 <= fraction <= 1.0:
        raise ContractError(f"fraction must be in [0, 1], got {fraction}")
    values = sorted(_normalized(scores).values(), reverse=True)
    if not values:
        raise ContractError("no scores")
    t = target_count(len(values), fraction)
    if t == 0:
        return max(1.0, values[0])
    if t >= len(values):
        return float(np.nextafter(values[-1], -np.inf))
    return float(values[t])


def candidate_thresholds(scores) -> List[float]:
    """+inf, midpoints between consecutive distinct scores (descending), -inf."""
    distinct = sorted(set(_normalized(scores).values()), reverse=True)
    mids = [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]
    return [math.inf] + mids + [-math.inf]


def _as_zero(label) -> bool:
    if isinstance(label, AnswerType):
        return label is AnswerType.ZERO
    if isinstance(label, str):
        if label in ("zero", "unanswerable", "no-answer"):
            return True
        if label in ("answerable", "single", "multi", "ans"):
            return False
        raise ContractError(f"unknown label {label!r}")
    return bool(label)


def accuracy_metric(gold_labels: Mapping[Hashable, object]) -> Metric:
    """Has-answer vs no-answer accuracy; labels are truthy for zero-answer items."""
    truth = {k: _as_zero(v) for k, v in gold_labels.items()}

    def metric(marked):
        return fmean((k in marked) == z for k, z in truth.items())

    return metric


def threshold_trace(scores, metric_eval: Metric) -> List[Tuple[float, float, int]]:
    """(threshold, metric, n_marked) for every candidate threshold."""
    trace = []
    for zeta in candidate_thresholds(scores):
        marked = sigma(scores, zeta)
        trace.append((zeta, float(metric_eval(marked)), len(marked)))
    return trace


def find_best_zeta(scores, gold_labels=None, metric_eval: Optional[Metric] = None, return_trace: bool = False):
    """Exhaustive scan over every distinct marking; returns ``(zeta, metric)``.

    Ties go to the larger threshold (fewer items marked). Without
    ``metric_eval`` the has-answer/no-answer accuracy against ``gold_labels``
    is maximized.
    """
    if not _normalized(scores):
        raise ContractError("find_best_zeta needs at least one item")
    if metric_eval is None:
        if gold_labels is None:
            raise ContractError("either gold_labels or metric_eval is required")
        metric_eval = accuracy_metric(gold_labels)
    trace = threshold_trace(scores, metric_eval)
    best_zeta, best_metric, _ = trace[0]
    for zeta, value, _ in trace[1:]:
        if value > best_metric:
            best_zeta, best_metric = zeta, value
    if return_trace:
        return best_zeta, best_metric, trace
    return best_zeta, best_metric


def apply_null_doc(run: RetrievalRun, marked) -> RetrievalRun:
    entries = {q: ([(NULL_DOC, 0.0)] if q in marked else r) for q, r in run.entries.items()}
    return RetrievalRun(entries, run.tag)


def apply_empty(predictions: Mapping[str, SpanRankedList], marked) -> Dict[str, SpanRankedList]:
    return {
        sid: (SpanRankedList(sid, (), r.no_answer_score) if sid in marked else r) for sid, r in predictions.items()
    }


def retrieval_objective(run: RetrievalRun, qrels: Qrels) -> Metric:
    """MAP over the qrels questions as a function of the marked question set.

    Each question's score depends only on whether it is marked, so both
    outcomes are computed once up front.
    """
    qids = qrels.question_ids()
    kept = {q: question_ap(run.ranking(q)[:MAX_RANK], qrels, q) for q in qids}
    nulled = {q: question_ap([NULL_DOC], qrels, q) for q in qids}

    def metric(marked):
        if not qids:
            return 0.0
        return fmean(nulled[q] if q in marked else kept[q] for q in qids)

    return metric


def mrc_objective(predictions: Mapping[str, SpanRankedList], samples: Sequence[MrcSample], credit="optimal") -> Metric:
    kept = {}
    emptied = {}
    for s in samples:
        ranked = predictions.get(s.sample_id)
        kept[s.sample_id] = pap_task_b(ranked.spans if ranked else (), s.gold, credit)
        emptied[s.sample_id] = pap_task_b((), s.gold, credit)

    def metric(marked):
        if not kept:
            return 0.0
        return fmean(emptied[k] if k in marked else v for k, v in kept.items())

    return metric


class ZeroAnswerThreshold(BaseEstimator):
    """Choose and apply a zero-answer threshold.

    Parameters
    ----------
    mode : {"fixed", "quantile", "optimal"}
        ``fixed`` uses ``value`` as the threshold, ``quantile`` marks the
        fraction ``value`` of items, ``optimal`` scans all thresholds for the
        best metric.
    value : float
        Threshold (fixed) or fraction (quantile); ignored for optimal.

    ``fit`` takes raw unanswerability scores keyed by item id. Scores passed
    to ``predict`` are normalized over that batch before thresholding.
    """

    def __init__(self, mode="quantile", value=0.15):
        self.mode = mode
        self.value = value

    def fit(self, X: Mapping[Hashable, float], y=None, metric_eval: Optional[Metric] = None):
        scores = normalize(X)
        self.trace_ = None
        if self.mode == "fixed":
            self.zeta_ = float(self.value)
        elif self.mode == "quantile":
            self.zeta_ = quantile_zeta(scores, float(self.value))
        elif self.mode == "optimal":
            self.zeta_, self.best_metric_, self.trace_ = find_best_zeta(scores, y, metric_eval, return_trace=True)
        else:
            raise ContractError(f"unknown threshold mode {self.mode!r}")
        self.scores_ = scores
        return self

    def predict(self, X: Mapping[Hashable, float]) -> FrozenSet[Hashable]:
        if not hasattr(self, "zeta_"):
            raise ContractError("ZeroAnswerThreshold is not fitted")
        return sigma(normalize(X), self.zeta_)

    def fit_predict(self, X, y=None, metric_eval=None):
        return self.fit(X, y, metric_eval).predict(X)
