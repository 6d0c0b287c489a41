"""Leakage categories, leakage groups and the faithful train/dev split.

Texts are compared after lexical normalization (:func:`rankqa.text.text_key`).
A zero-answer sample is treated as carrying the empty answer, so two
zero-answer samples over the same passage or the same question form a
repeated pair just like two samples sharing an answer string.

Categories, evaluated in order:

D1  some (passage, answer) or (question, answer) pair of the sample occurs in
    another sample
D2  not D1, and the passage occurs in another sample
D3  unique passage, question occurs at most ``repeat_threshold`` times
D4  unique passage, question occurs more often
"""

import enum
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from scipy.cluster.hierarchy import DisjointSet
from sklearn.base import BaseEstimator

from .exceptions import ContractError
from .thresholding import target_count
from .text import text_key
from .types import MrcSample

#: dev share of the original shared-task splits
DEV_FRACTION = 0.133
DEFAULT_ZERO_RATIO = 0.067
REPEAT_THRESHOLD = 3
NO_ANSWER = ""


class LeakageCategory(str, enum.Enum):
    D1_IN_LEAKAGE = "D1_in_leakage"
    D2_IN_NO_LEAKAGE = "D2_in_no_leakage"
    D3_OOD_HARD = "D3_ood_hard"
    D4_OOD_EASY = "D4_ood_easy"


D1, D2, D3, D4 = LeakageCategory


@dataclass(frozen=True)
class _Keys:
    question: str
    passage: str
    answers: frozenset


def _keys(sample: MrcSample) -> _Keys:
    answers = frozenset(text_key(g.text) for g in sample.gold) or frozenset([NO_ANSWER])
    return _Keys(text_key(sample.question.text), text_key(sample.passage.text), answers)


def _pair_keys(k: _Keys):
    for a in k.answers:
        yield ("pa", k.passage, a)
        yield ("qa", k.question, a)


def categorize(samples: Sequence[MrcSample], repeat_threshold: int = REPEAT_THRESHOLD) -> Dict[str, LeakageCategory]:
    keys = {s.sample_id: _keys(s) for s in samples}
    pair_count = Counter(pk for k in keys.values() for pk in set(_pair_keys(k)))
    passage_count = Counter(k.passage for k in keys.values())
    question_count = Counter(k.question for k in keys.values())
    out = {}
    for sid, k in keys.items():
        if any(pair_count[pk] > 1 for pk in _pair_keys(k)):
            out[sid] = D1
        elif passage_count[k.passage] > 1:
            out[sid] = D2
        elif question_count[k.question] <= repeat_threshold:
            out[sid] = D3
        else:
            out[sid] = D4
    return out


@dataclass(frozen=True)
class LeakageGroup:
    group_id: int
    members: Tuple[str, ...]
    contains_zero_answer: bool
    n_zero_answer: int = 0

    def __len__(self):
        return len(self.members)


def group_leakage(d1_samples: Sequence[MrcSample]) -> List[LeakageGroup]:
    """Connected components of samples linked by a shared passage-answer or
    question-answer pair. Groups are numbered by their smallest member id."""
    ds = DisjointSet(s.sample_id for s in d1_samples)
    first_holder = {}
    for s in d1_samples:
        for pk in _pair_keys(_keys(s)):
            if pk in first_holder:
                ds.merge(first_holder[pk], s.sample_id)
            else:
                first_holder[pk] = s.sample_id
    zero = {s.sample_id for s in d1_samples if s.is_zero_answer}
    components = sorted((tuple(sorted(c)) for c in ds.subsets()), key=lambda m: m[0])
    return [
        LeakageGroup(i, members, any(m in zero for m in members), sum(m in zero for m in members))
        for i, members in enumerate(components)
    ]


@dataclass
class SplitAssignment:
    assignment: Dict[str, str]
    categories: Dict[str, LeakageCategory]
    zero_answer: Dict[str, bool]
    moved_groups: List[LeakageGroup] = field(default_factory=list)

    def ids(self, split: str) -> List[str]:
        return [sid for sid, s in self.assignment.items() if s == split]

    def summary(self) -> Dict[str, Dict[str, Dict[str, int]]]:
        """category -> split -> {"n", "zero"}; includes a "total" row and column."""
        table = {c.value: {sp: {"n": 0, "zero": 0} for sp in ("train", "dev", "total")} for c in LeakageCategory}
        table["total"] = {sp: {"n": 0, "zero": 0} for sp in ("train", "dev", "total")}
        for sid, split in self.assignment.items():
            z = int(self.zero_answer[sid])
            for row in (self.categories[sid].value, "total"):
                for col in (split, "total"):
                    table[row][col]["n"] += 1
                    table[row][col]["zero"] += z
        return table

    def zero_ratio(self, split: str) -> float:
        ids = self.ids(split)
        return sum(self.zero_answer[i] for i in ids) / len(ids) if ids else 0.0

    def format_table(self) -> str:
        table = self.summary()
        labels = {c.value: c.value for c in LeakageCategory}
        labels["total"] = "Total"
        width = max(len(v) for v in labels.values())

        def cell(d):
            return f"{d['n']} ({d['zero']})"

        lines = [f"{'Category':<{width}}  {'Train':>12}  {'Development':>12}  {'Total':>12}"]
        for key, label in labels.items():
            row = table[key]
            lines.append(f"{label:<{width}}  {cell(row['train']):>12}  {cell(row['dev']):>12}  {cell(row['total']):>12}")
        pct = []
        for col in ("train", "dev", "total"):
            d = table["total"][col]
            pct.append(f"{100 * d['zero'] / d['n']:.2f} %" if d["n"] else "-")
        lines.append(f"{'Zero-answer %':<{width}}  {pct[0]:>12}  {pct[1]:>12}  {pct[2]:>12}")
        return "\n".join(lines)

    def to_dict(self):
        return {
            "assignment": self.assignment,
            "categories": {k: v.value for k, v in self.categories.items()},
            "moved_groups": [list(g.members) for g in self.moved_groups],
            "summary": self.summary(),
            "zero_ratio": {"train": self.zero_ratio("train"), "dev": self.zero_ratio("dev")},
        }


def _distribute_d2(samples: Sequence[MrcSample], dev_fraction: float) -> Dict[str, str]:
    """Spread samples sharing a passage over both splits.

    Each passage keeps at least half of its samples in train. Dev slots are
    handed out one per passage per round (larger passages first) until the
    global dev share reaches ``dev_fraction``.
    """
    by_passage = defaultdict(list)
    for s in samples:
        by_passage[text_key(s.passage.text)].append(s.sample_id)
    groups = sorted(by_passage.values(), key=lambda m: (-len(m), m[0]))
    quota = target_count(len(samples), dev_fraction)
    dev_count = [0] * len(groups)
    out = {s.sample_id: "train" for s in samples}
    progress = True
    while quota > 0 and progress:
        progress = False
        for gi, members in enumerate(groups):
            if quota == 0:
                break
            if dev_count[gi] < len(members) // 2:
                out[members[len(members) - 1 - dev_count[gi]]] = "dev"
                dev_count[gi] += 1
                quota -= 1
                progress = True
    return out


def faithful_split(
    samples: Sequence[MrcSample],
    target_zero_ratio: float = DEFAULT_ZERO_RATIO,
    dev_fraction: float = DEV_FRACTION,
    repeat_threshold: int = REPEAT_THRESHOLD,
) -> SplitAssignment:
    """D3 to dev, D4 and D1 to train, D2 spread over both; then whole
    zero-answer D1 groups move to dev (smallest first) until the dev
    zero-answer ratio reaches ``target_zero_ratio``."""
    if not 0.0 <= target_zero_ratio <= 1.0:
        warnings.warn(f"target zero-answer ratio {target_zero_ratio} is unattainable; best effort", stacklevel=2)
    categories = categorize(samples, repeat_threshold)
    by_cat = defaultdict(list)
    for s in samples:
        by_cat[categories[s.sample_id]].append(s)

    assignment = {}
    for s in by_cat[D1] + by_cat[D4]:
        assignment[s.sample_id] = "train"
    for s in by_cat[D3]:
        assignment[s.sample_id] = "dev"
    assignment.update(_distribute_d2(by_cat[D2], dev_fraction))
    assignment = {s.sample_id: assignment[s.sample_id] for s in samples}
    zero = {s.sample_id: s.is_zero_answer for s in samples}

    n_dev = sum(v == "dev" for v in assignment.values())
    n_dev_zero = sum(zero[k] for k, v in assignment.items() if v == "dev")
    candidates = sorted(
        (g for g in group_leakage(by_cat[D1]) if g.contains_zero_answer), key=lambda g: (len(g), g.group_id)
    )
    moved = []
    for group in candidates:
        if n_dev and n_dev_zero / n_dev >= target_zero_ratio:
            break
        for sid in group.members:
            assignment[sid] = "dev"
        n_dev += len(group)
        n_dev_zero += group.n_zero_answer
        moved.append(group)
    if candidates and (not n_dev or n_dev_zero / n_dev < target_zero_ratio):
        warnings.warn(
            f"dev zero-answer ratio {n_dev_zero / max(n_dev, 1):.4f} is below target {target_zero_ratio}", stacklevel=2
        )
    return SplitAssignment(assignment, categories, zero, moved)


def check_split_invariants(split: SplitAssignment, samples: Sequence[MrcSample]) -> List[str]:
    """Return violated invariants (empty when the split is valid)."""
    problems = []
    ids = [s.sample_id for s in samples]
    if set(split.assignment) != set(ids) or len(split.assignment) != len(ids):
        problems.append("assignment is not a partition of the samples")
    if any(v not in ("train", "dev") for v in split.assignment.values()):
        problems.append("unknown split label")
    for sid, cat in split.categories.items():
        where = split.assignment.get(sid)
        if cat is D3 and where != "dev":
            problems.append(f"D3 sample {sid} not in dev")
        if cat is D4 and where != "train":
            problems.append(f"D4 sample {sid} not in train")
    moved = {m for g in split.moved_groups for m in g.members}
    for g in split.moved_groups:
        if not g.contains_zero_answer:
            problems.append(f"group {g.group_id} moved without zero-answer samples")
        if any(split.assignment[m] != "dev" for m in g.members):
            problems.append(f"group {g.group_id} split across train and dev")
    for sid, cat in split.categories.items():
        if cat is D1 and sid not in moved and split.assignment.get(sid, "train") != "train":
            problems.append(f"D1 sample {sid} in dev without its group being moved")
    return problems


class FaithfulSplitter(BaseEstimator):
    """Estimator wrapper around :func:`faithful_split`."""

    def __init__(self, target_zero_ratio=DEFAULT_ZERO_RATIO, dev_fraction=DEV_FRACTION, repeat_threshold=REPEAT_THRESHOLD):
        self.target_zero_ratio = target_zero_ratio
        self.dev_fraction = dev_fraction
        self.repeat_threshold = repeat_threshold

    def fit(self, X: Sequence[MrcSample], y=None):
        if not all(isinstance(s, MrcSample) for s in X):
            raise ContractError("FaithfulSplitter expects MrcSample instances")
        self.split_ = faithful_split(X, self.target_zero_ratio, self.dev_fraction, self.repeat_threshold)
        return self

    def split(self, X: Sequence[MrcSample]) -> Tuple[List[MrcSample], List[MrcSample]]:
        self.fit(X)
        train = [s for s in X if self.split_.assignment[s.sample_id] == "train"]
        dev = [s for s in X if self.split_.assignment[s.sample_id] == "dev"]
        return train, dev
