"""BM25 and TF-IDF retrieval over a passage collection."""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple, Union

from sklearn.base import BaseEstimator

from .exceptions import ContractError
from .text import normalize_text
from .types import MAX_RANK, Passage, Question, RetrievalRun


@dataclass
class InvertedIndex:
    postings: Dict[str, List[Tuple[str, int]]]
    doc_lengths: Dict[str, int]
    avg_doc_len: float
    n_docs: int
    tfidf_norms: Dict[str, float] = field(default_factory=dict, repr=False)

    def doc_freq(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def bm25_idf(self, term: str) -> float:
        """Lucene-style idf, ``log(1 + (N - df + .5) / (df + .5))``; never negative."""
        df = self.doc_freq(term)
        return max(0.0, math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5)))

    def tfidf_idf(self, term: str) -> float:
        """Smoothed idf, ``ln((1 + N) / (1 + df)) + 1``."""
        return math.log((1.0 + self.n_docs) / (1.0 + self.doc_freq(term))) + 1.0


def build_index(collection: Sequence[Passage]) -> InvertedIndex:
    postings: Dict[str, List[Tuple[str, int]]] = {}
    doc_lengths = {}
    for p in collection:
        tokens = normalize_text(p.text)
        doc_lengths[p.id] = len(tokens)
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((p.id, tf))
    n = len(doc_lengths)
    avg = sum(doc_lengths.values()) / n if n else 0.0
    index = InvertedIndex(postings, doc_lengths, avg, n)
    sq = dict.fromkeys(doc_lengths, 0.0)
    for term, plist in postings.items():
        idf = index.tfidf_idf(term)
        for pid, tf in plist:
            sq[pid] += (tf * idf) ** 2
    index.tfidf_norms = {pid: math.sqrt(v) for pid, v in sq.items()}
    return index


def _top_k(scores: Mapping[str, float], k: int) -> List[Tuple[str, float]]:
    ranked = sorted(((pid, s) for pid, s in scores.items() if s > 0), key=lambda x: (-x[1], x[0]))
    return ranked[:k]


def _check(index: InvertedIndex, k: int):
    if index.n_docs == 0:
        raise ContractError("cannot search an empty collection")
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")


def bm25_search(index: InvertedIndex, query: str, k: int = MAX_RANK, k1: float = 1.2, b: float = 0.75):
    """Okapi BM25 over the distinct query terms. Documents scoring 0 are dropped."""
    _check(index, k)
    scores: Dict[str, float] = {}
    for term in sorted(set(normalize_text(query))):
        idf = index.bm25_idf(term)
        for pid, tf in index.postings.get(term, ()):
            norm = k1 * (1.0 - b + b * index.doc_lengths[pid] / index.avg_doc_len)
            scores[pid] = scores.get(pid, 0.0) + idf * tf * (k1 + 1.0) / (tf + norm)
    return _top_k(scores, k)


def tfidf_search(index: InvertedIndex, query: str, k: int = MAX_RANK):
    """Cosine similarity of raw-tf x smoothed-idf vectors; unknown query terms are ignored."""
    _check(index, k)
    q_weights = {t: tf * index.tfidf_idf(t) for t, tf in Counter(normalize_text(query)).items() if t in index.postings}
    q_norm = math.sqrt(sum(w * w for w in q_weights.values()))
    if q_norm == 0:
        return []
    dots: Dict[str, float] = {}
    for term in sorted(q_weights):
        qw = q_weights[term]
        idf = index.tfidf_idf(term)
        for pid, tf in index.postings[term]:
            dots[pid] = dots.get(pid, 0.0) + qw * tf * idf
    scores = {pid: d / (q_norm * index.tfidf_norms[pid]) for pid, d in dots.items()}
    return _top_k(scores, k)


Queries = Union[Mapping[str, str], Sequence[Question]]


def _query_items(X: Queries):
    if isinstance(X, Mapping):
        return list(X.items())
    return [(q.id, q.text) for q in X]


class _LexicalRetriever(BaseEstimator):
    def fit(self, X: Sequence[Passage], y=None):
        self.index_ = build_index(X)
        return self

    def _search(self, query):
        raise NotImplementedError

    def predict(self, X: Queries) -> RetrievalRun:
        if not hasattr(self, "index_"):
            raise ContractError(f"{type(self).__name__} is not fitted")
        # every question keeps an entry, possibly empty, so downstream steps see it
        return RetrievalRun({qid: self._search(text) for qid, text in _query_items(X)}, self.tag)


class BM25Retriever(_LexicalRetriever):
    """Okapi BM25 baseline.

    >>> from rankqa.types import Passage
    >>> r = BM25Retriever(top_k=1).fit([Passage("a", "red fish"), Passage("b", "blue sky")])
    >>> r.predict({"q": "fish"}).ranking("q")
    ['a']
    """

    def __init__(self, k1=1.2, b=0.75, top_k=MAX_RANK, tag="bm25"):
        self.k1 = k1
        self.b = b
        self.top_k = top_k
        self.tag = tag

    def _search(self, query):
        return bm25_search(self.index_, query, self.top_k, self.k1, self.b)


class TfidfRetriever(_LexicalRetriever):
    def __init__(self, top_k=MAX_RANK, tag="tfidf"):
        self.top_k = top_k
        self.tag = tag

    def _search(self, query):
        return tfidf_search(self.index_, query, self.top_k)
