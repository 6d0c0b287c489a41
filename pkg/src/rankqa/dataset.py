"""Dataset statistics and referential integrity checks."""

from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, Optional, Sequence

from .exceptions import IntegrityError
from .types import AnswerType, MrcSample, Passage, Qrels, Question


@dataclass(frozen=True)
class ValidationReport:
    n_questions: int = 0
    n_relevance_pairs: int = 0
    question_types: Dict[str, int] = field(default_factory=dict)
    n_pairs: int = 0
    n_triplets: int = 0
    pair_types: Dict[str, int] = field(default_factory=dict)

    @property
    def zero_answer_ratio(self) -> float:
        return self.question_types.get("zero", 0) / self.n_questions if self.n_questions else 0.0

    @property
    def zero_answer_pair_ratio(self) -> float:
        return self.pair_types.get("zero", 0) / self.n_pairs if self.n_pairs else 0.0

    def to_dict(self):
        d = asdict(self)
        d["zero_answer_ratio"] = self.zero_answer_ratio
        d["zero_answer_pair_ratio"] = self.zero_answer_pair_ratio
        return d


def _type_counts(types: Iterable[AnswerType]) -> Dict[str, int]:
    counts = Counter(t.value for t in types)
    return {t.value: counts.get(t.value, 0) for t in AnswerType}


def validate_dataset(
    questions: Optional[Sequence[Question]] = None,
    qrels: Optional[Qrels] = None,
    samples: Optional[Sequence[MrcSample]] = None,
    collection: Optional[Sequence[Passage]] = None,
) -> ValidationReport:
    """Count questions, relevance pairs, MRC pairs and triplets.

    Question answer types come from the qrels (number of relevant passages);
    pair answer types come from the number of gold spans of each sample.
    Raises :class:`IntegrityError` listing every dangling reference.
    """
    problems = []
    if questions is not None:
        ids = [q.id for q in questions]
        dup = sorted(k for k, v in Counter(ids).items() if v > 1)
        if dup:
            problems.append(f"duplicate question ids: {dup}")
    if qrels is not None and questions is not None:
        known = {q.id for q in questions}
        missing = sorted(qid for qid in qrels.question_ids() if qid not in known)
        if missing:
            problems.append(f"qrels reference unknown questions: {missing}")
    if qrels is not None and collection is not None:
        known_p = {p.id for p in collection}
        dangling = sorted(
            {f"{qid}->{pid}" for qid, pids in qrels.judgments.items() for pid in pids if pid not in known_p}
        )
        if dangling:
            problems.append(f"qrels reference unknown passages: {dangling}")
    if samples is not None:
        dup = sorted(k for k, v in Counter(s.sample_id for s in samples).items() if v > 1)
        if dup:
            problems.append(f"duplicate sample ids: {dup}")
    if problems:
        raise IntegrityError("; ".join(problems))

    report = {}
    if qrels is not None:
        qids = qrels.question_ids()
        report.update(
            n_questions=len(qids),
            n_relevance_pairs=qrels.n_pairs(),
            question_types=_type_counts(qrels.answer_type(q) for q in qids),
        )
    elif questions is not None:
        report["n_questions"] = len(questions)
        if all(q.gold_answer_type is not None for q in questions):
            report["question_types"] = _type_counts(q.gold_answer_type for q in questions)
    if samples is not None:
        report.update(
            n_pairs=len(samples),
            n_triplets=sum(len(s.gold) for s in samples),
            pair_types=_type_counts(s.answer_type for s in samples),
        )
    return ValidationReport(**report)
