"""Evaluation, thresholding, ensembling, leakage-aware splitting and lexical
baselines for ranking-based question answering over a passage collection."""

from .dataset import ValidationReport, validate_dataset
from .ensemble import aggregate_retrieval, aggregate_spans
from .exceptions import ContractError, IntegrityError, ParseError, RankQAError
from .io import load_collection, load_mrc_dataset, load_qrels, parse_run, write_run
from .leakage import FaithfulSplitter, LeakageCategory, categorize, faithful_split, group_leakage
from .lexical import BM25Retriever, TfidfRetriever, bm25_search, build_index, tfidf_search
from .metrics import map_task_a, mrr, pap, pap_task_b, recall_at_k
from .postprocess import NmsConfig, SpanPostprocessor, nms_spans, reject_short
from .spans import SpanDecoder, TokenLogits, decode_spans, fal_loss, mal_loss, no_answer_score, softmax_probs
from .thresholding import ZeroAnswerThreshold, find_best_zeta, normalize, quantile_zeta, sigma
from .types import NULL_DOC, AnswerSpan, MrcSample, Passage, Qrels, Question, RetrievalRun, SpanRankedList

__version__ = "0.1.0"
