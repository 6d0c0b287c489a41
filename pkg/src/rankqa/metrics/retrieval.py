"""Passage retrieval metrics with null-document semantics.

A question with no relevant passage earns full credit only when the
submitted ranking is exactly the null document. MAP and MRR look at the first
``MAX_RANK`` entries of each ranking; recall uses the full list so deep
cutoffs such as R@100 remain meaningful.
"""

import json
import warnings
from dataclasses import asdict, dataclass
from statistics import fmean
from typing import Dict, Iterable, List, Optional, Sequence

from ..exceptions import ContractError, IntegrityError
from ..types import MAX_RANK, NULL_DOC, AnswerType, DocId, Qrels, RetrievalRun

SCHEMA_VERSION = 1


def psi(qrels: Qrels, qid: str) -> int:
    """Number of passages judged relevant to ``qid`` (0 when unknown)."""
    return qrels.psi(qid)


def average_precision(ranking: Sequence[DocId], qrels: Qrels, qid: str) -> float:
    relevant = qrels.relevant(qid)
    if not relevant:
        raise ContractError(f"{qid!r} has no relevant passages; score it with map_task_a")
    if NULL_DOC in ranking:
        raise ContractError("average_precision is undefined for a null-document ranking")
    hits = 0
    total = 0.0
    for i, pid in enumerate(ranking, start=1):
        if pid in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def _truncate(ranking: List[DocId], qid: str, warn: bool) -> List[DocId]:
    if len(ranking) > MAX_RANK:
        if warn:
            warnings.warn(f"ranking for {qid!r} has {len(ranking)} entries, truncating to {MAX_RANK}", stacklevel=3)
        return ranking[:MAX_RANK]
    return ranking


def _check_known(run: RetrievalRun, qrels: Qrels):
    unknown = [qid for qid in run.question_ids() if qid not in qrels]
    if unknown:
        raise IntegrityError(f"run contains questions absent from qrels: {sorted(unknown)}")


def question_ap(ranking: Sequence[DocId], qrels: Qrels, qid: str) -> float:
    """Per-question MAP_A: null-document rule for zero-answer questions, AP otherwise."""
    if qrels.psi(qid) == 0:
        return 1.0 if list(ranking) == [NULL_DOC] else 0.0
    return average_precision([p for p in ranking if p is not NULL_DOC], qrels, qid)


def question_rr(ranking: Sequence[DocId], qrels: Qrels, qid: str) -> float:
    relevant = qrels.relevant(qid)
    if not relevant:
        return 1.0 if list(ranking) == [NULL_DOC] else 0.0
    for i, pid in enumerate(ranking, start=1):
        if pid in relevant:
            return 1.0 / i
    return 0.0


def question_recall(ranking: Sequence[DocId], qrels: Qrels, qid: str, k: int) -> float:
    relevant = qrels.relevant(qid)
    return len(relevant.intersection(ranking[:k])) / len(relevant)


def mrr(run: RetrievalRun, qrels: Qrels, warn: bool = True) -> float:
    _check_known(run, qrels)
    qids = qrels.question_ids()
    if not qids:
        return 0.0
    return fmean(question_rr(_truncate(run.ranking(q), q, warn), qrels, q) for q in qids)


def recall_at_k(run: RetrievalRun, qrels: Qrels, k: int) -> float:
    """Mean recall@k over answerable questions; zero-answer questions are skipped."""
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    _check_known(run, qrels)
    answerable = [q for q in qrels.question_ids() if qrels.psi(q) > 0]
    if not answerable:
        return 0.0
    return fmean(question_recall(run.ranking(q), qrels, q, k) for q in answerable)


@dataclass
class RetrievalMetricsReport:
    map_a: float
    mrr: float
    recall_at: Dict[int, float]
    per_question: Dict[str, float]
    per_type: Dict[str, float]
    n_questions: int = 0
    zeta: Optional[float] = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        d = asdict(self)
        d["recall_at"] = {str(k): v for k, v in self.recall_at.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=False)

    def summary_rows(self):
        rows = [("MAP", self.map_a), ("MRR", self.mrr)]
        rows += [(f"R@{k}", v) for k, v in self.recall_at.items()]
        rows += [(f"MAP[{t}]", v) for t, v in self.per_type.items()]
        return rows

    def to_text(self) -> str:
        rows = self.summary_rows()
        width = max(len(name) for name, _ in rows)
        lines = [f"{name:<{width}}  {100 * value:6.2f}" for name, value in rows]
        lines.append(f"{'questions':<{width}}  {self.n_questions:6d}")
        return "\n".join(lines)


def map_task_a(
    run: RetrievalRun,
    qrels: Qrels,
    recall_cutoffs: Iterable[int] = (10, 100),
    warn: bool = True,
) -> RetrievalMetricsReport:
    """Evaluate a run over every question in ``qrels``.

    Questions missing from the run are scored as an empty ranking.
    """
    _check_known(run, qrels)
    qids = qrels.question_ids()
    per_question = {}
    rr = {}
    for qid in qids:
        ranking = _truncate(run.ranking(qid), qid, warn)
        per_question[qid] = question_ap(ranking, qrels, qid)
        rr[qid] = question_rr(ranking, qrels, qid)
    per_type = {}
    for t in AnswerType:
        vals = [per_question[q] for q in qids if qrels.answer_type(q) is t]
        if vals:
            per_type[t.value] = fmean(vals)
    return RetrievalMetricsReport(
        map_a=fmean(per_question.values()) if qids else 0.0,
        mrr=fmean(rr.values()) if qids else 0.0,
        recall_at={k: recall_at_k(run, qrels, k) for k in recall_cutoffs},
        per_question=per_question,
        per_type=per_type,
        n_questions=len(qids),
    )


def map_a(run: RetrievalRun, qrels: Qrels) -> float:
    return map_task_a(run, qrels, recall_cutoffs=(), warn=False).map_a
