from .mrc import PapReport, best_f1, evaluate_mrc, pap, pap_task_b, pprec_at_k, rank_credits, token_f1
from .retrieval import (
    RetrievalMetricsReport,
    average_precision,
    map_a,
    map_task_a,
    mrr,
    psi,
    recall_at_k,
)

__all__ = [
    "PapReport",
    "RetrievalMetricsReport",
    "average_precision",
    "best_f1",
    "evaluate_mrc",
    "map_a",
    "map_task_a",
    "mrr",
    "pap",
    "pap_task_b",
    "pprec_at_k",
    "psi",
    "rank_credits",
    "recall_at_k",
    "token_f1",
]
