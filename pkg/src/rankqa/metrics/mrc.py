"""Partial-match ranked MRC metrics (token F1, pPrec@k, pAP).

Each entry of a ranked list may be credited against at most one gold answer
and each gold answer may be credited at most once. Three credit policies are
available:

``"optimal"`` (default)
    the one-to-one rank/gold assignment that maximizes pAP.
``"greedy"``
    ranks are visited in order; a rank is matched to its best still-unused
    gold and consumes it.
``"max"``
    no consumption: every rank takes its best F1 over all golds.
"""

import itertools
import json
from dataclasses import asdict, dataclass
from statistics import fmean
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..exceptions import ContractError, IntegrityError
from ..types import MAX_RANK, AnswerSpan, AnswerType, MrcSample, SpanRankedList

SCHEMA_VERSION = 1
CREDIT_POLICIES = ("optimal", "greedy", "max")
_FORBIDDEN = -1e9


def token_f1(pred: AnswerSpan, gold: AnswerSpan) -> float:
    overlap = min(pred.end_token, gold.end_token) - max(pred.start_token, gold.start_token) + 1
    if overlap <= 0:
        return 0.0
    return 2.0 * overlap / (len(pred) + len(gold))


def best_f1(span: AnswerSpan, gold_set: Sequence[AnswerSpan]) -> float:
    return max((token_f1(span, g) for g in gold_set), default=0.0)


def _spans(ranked) -> List[AnswerSpan]:
    return list(ranked.spans if isinstance(ranked, SpanRankedList) else ranked)


def f1_matrix(spans: Sequence[AnswerSpan], gold_set: Sequence[AnswerSpan]) -> np.ndarray:
    return np.array([[token_f1(s, g) for g in gold_set] for s in spans], dtype=float).reshape(
        len(spans), len(gold_set)
    )


def _pap_from_credits(credits: Sequence[float]) -> float:
    """Sum of pPrec@i over ranks with positive credit (not divided by |G|)."""
    total = 0.0
    running = 0.0
    for i, f in enumerate(credits, start=1):
        running += f
        if f > 0:
            total += running / i
    return total


def _greedy_credits(f1: np.ndarray) -> List[float]:
    used = set()
    credits = []
    for row in f1:
        best, best_g = 0.0, None
        for g, value in enumerate(row):
            if g not in used and value > best:
                best, best_g = value, g
        if best_g is not None:
            used.add(best_g)
        credits.append(best)
    return credits


def _optimal_credits(f1: np.ndarray) -> List[float]:
    n_ranks, n_gold = f1.shape
    candidates = [i for i in range(n_ranks) if f1[i].max(initial=0.0) > 0]
    best_value, best_credits = 0.0, [0.0] * n_ranks
    for size in range(1, min(len(candidates), n_gold) + 1):
        for matched in itertools.combinations(candidates, size):
            # weight of rank j's F1 in pAP: sum of 1/i over matched ranks i >= j
            tail = np.cumsum([1.0 / (i + 1) for i in matched][::-1])[::-1]
            block = f1[list(matched)]
            weights = np.where(block > 0, block * tail[:, None], _FORBIDDEN)
            rows, cols = linear_sum_assignment(weights, maximize=True)
            if (block[rows, cols] <= 0).any():
                continue
            credits = [0.0] * n_ranks
            for r, c in zip(rows, cols):
                credits[matched[r]] = float(block[r, c])
            value = _pap_from_credits(credits)
            if value > best_value:
                best_value, best_credits = value, credits
    return best_credits


def rank_credits(ranked, gold_set: Sequence[AnswerSpan], credit: str = "optimal") -> List[float]:
    """Per-rank F1 credit under the given policy."""
    spans = _spans(ranked)
    gold_set = list(gold_set)
    if not spans or not gold_set:
        return [0.0] * len(spans)
    f1 = f1_matrix(spans, gold_set)
    if credit == "optimal":
        return _optimal_credits(f1)
    if credit == "greedy":
        return _greedy_credits(f1)
    if credit == "max":
        return [float(v) for v in f1.max(axis=1)]
    raise ContractError(f"unknown credit policy {credit!r}; expected one of {CREDIT_POLICIES}")


def pprec_at_k(ranked, gold_set: Sequence[AnswerSpan], k: int, credit: str = "optimal") -> float:
    spans = _spans(ranked)
    if not 1 <= k <= len(spans):
        raise ContractError(f"k={k} outside [1, {len(spans)}]")
    return sum(rank_credits(spans, gold_set, credit)[:k]) / k


def pap(ranked, gold_set: Sequence[AnswerSpan], credit: str = "optimal") -> float:
    gold_set = list(gold_set)
    if not gold_set:
        raise ContractError("pap needs at least one gold answer; use pap_task_b for zero-answer samples")
    spans = _spans(ranked)[:MAX_RANK]
    return _pap_from_credits(rank_credits(spans, gold_set, credit)) / len(gold_set)


def pap_task_b(ranked, gold_set: Sequence[AnswerSpan], credit: str = "optimal") -> float:
    gold_set = list(gold_set)
    if not gold_set:
        return 1.0 if not _spans(ranked) else 0.0
    return pap(ranked, gold_set, credit)


@dataclass
class PapReport:
    pap: float
    per_sample: Dict[str, float]
    per_type: Dict[str, float]
    n_samples: int = 0
    zeta: Optional[float] = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    def summary_rows(self):
        return [("pAP", self.pap)] + [(f"pAP[{t}]", v) for t, v in self.per_type.items()]

    def to_text(self) -> str:
        rows = self.summary_rows()
        width = max(len(name) for name, _ in rows)
        lines = [f"{name:<{width}}  {100 * value:6.2f}" for name, value in rows]
        lines.append(f"{'samples':<{width}}  {self.n_samples:6d}")
        return "\n".join(lines)


def evaluate_mrc(
    predictions: Mapping[str, SpanRankedList],
    samples: Sequence[MrcSample],
    credit: str = "optimal",
    map_fn=map,
) -> PapReport:
    """pAP over every sample; a sample without predictions counts as an empty list.

    ``map_fn`` lets callers plug in a parallel map; results do not depend on it.
    """
    known = {s.sample_id for s in samples}
    unknown = sorted(set(predictions) - known)
    if unknown:
        raise IntegrityError(f"predictions for unknown samples: {unknown}")

    def score(sample):
        ranked = predictions.get(sample.sample_id)
        spans = ranked.spans if ranked is not None else ()
        return pap_task_b(spans, sample.gold, credit)

    per_sample = dict(zip((s.sample_id for s in samples), map_fn(score, samples)))
    per_type = {}
    for t in AnswerType:
        vals = [per_sample[s.sample_id] for s in samples if s.answer_type is t]
        if vals:
            per_type[t.value] = fmean(vals)
    return PapReport(
        pap=fmean(per_sample.values()) if samples else 0.0,
        per_sample=per_sample,
        per_type=per_type,
        n_samples=len(samples),
    )
