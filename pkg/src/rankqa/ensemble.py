"""Voting ensembles: summed relevance scores and summed span scores.

Scores are summed with ``math.fsum`` so the result does not depend on the
order of member runs. Equal totals are ordered by the best rank the item
reached in any member, then by id, which keeps a single member's ordering
intact when it is ensembled with copies of itself.
"""

import math
import warnings
from collections import defaultdict
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .exceptions import ContractError
from .types import MAX_RANK, NULL_DOC, AnswerSpan, RetrievalRun, SpanRankedList


def aggregate_retrieval(runs: Sequence[RetrievalRun], top_k: int = MAX_RANK, tag: str = "ensemble") -> RetrievalRun:
    if not runs:
        raise ContractError("need at least one run")
    question_sets = [set(r.question_ids()) for r in runs]
    if any(qs != question_sets[0] for qs in question_sets):
        warnings.warn("member runs cover different questions; using the union", stacklevel=2)

    scores: Dict[str, Dict[str, List[float]]] = defaultdict(lambda: defaultdict(list))
    best_rank: Dict[Tuple[str, str], int] = {}
    for run in runs:
        for qid, ranking in run.entries.items():
            scores[qid]  # keep questions whose members all predicted the null document
            for rank, (pid, score) in enumerate(ranking):
                if pid is NULL_DOC:
                    warnings.warn(f"ignoring null document for {qid!r}; ensemble raw runs", stacklevel=2)
                    continue
                scores[qid][pid].append(score)
                key = (qid, pid)
                best_rank[key] = min(rank, best_rank.get(key, rank))

    entries = {}
    for qid in sorted(scores):
        totals = [(pid, math.fsum(vals)) for pid, vals in scores[qid].items()]
        totals.sort(key=lambda item: (-item[1], best_rank[(qid, item[0])], item[0]))
        entries[qid] = totals[:top_k]
    return RetrievalRun(entries, tag)


def aggregate_spans(
    runs: Sequence[Mapping[str, SpanRankedList]], top_k: Optional[int] = None
) -> Dict[str, SpanRankedList]:
    """Sum span scores per sample; spans are identified by their token range.

    The no-answer score of the result is the sum of the members' no-answer
    scores, or None when no member carries one.
    """
    if not runs:
        raise ContractError("need at least one run")
    span_scores: Dict[str, Dict[Tuple[int, int], List[float]]] = defaultdict(lambda: defaultdict(list))
    best_rank: Dict[Tuple[str, Tuple[int, int]], int] = {}
    texts: Dict[Tuple[str, Tuple[int, int]], str] = {}
    gammas: Dict[str, List[float]] = defaultdict(list)
    for run in runs:
        for sid, ranked in run.items():
            span_scores[sid]
            if ranked.no_answer_score is not None:
                gammas[sid].append(ranked.no_answer_score)
            for rank, span in enumerate(ranked.spans):
                key = (sid, span.key)
                span_scores[sid][span.key].append(span.score)
                best_rank[key] = min(rank, best_rank.get(key, rank))
                texts.setdefault(key, span.text)

    out = {}
    for sid in sorted(span_scores):
        totals = [(k, math.fsum(v)) for k, v in span_scores[sid].items()]
        totals.sort(key=lambda item: (-item[1], best_rank[(sid, item[0])], item[0]))
        if top_k is not None:
            totals = totals[:top_k]
        spans = tuple(AnswerSpan(s, e, texts[(sid, (s, e))], total) for (s, e), total in totals)
        gamma = math.fsum(gammas[sid]) if gammas.get(sid) else None
        out[sid] = SpanRankedList(sid, spans, gamma)
    return out
