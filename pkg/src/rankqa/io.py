"""Readers and writers for collections, qrels, runs, MRC datasets and logits.

File formats
------------
collection  TSV ``passage_id<TAB>text``
questions   TSV ``question_id<TAB>text``
qrels       ``question_id 0 passage_id relevance`` (tab or space separated);
            passage id ``-1`` declares a zero-answer question
run         ``question_id Q0 passage_id rank score tag``; ``-1`` is the null document
dataset     JSON array (or JSON lines) of ``{"pq_id", "question", "passage",
            "answers": [{"text", "start_char"}]}``
span run    JSON array of ``{"pq_id", "answers": [{"text", "start_char", "score"}],
            "no_answer_score"?}`` or an object mapping pq_id to the answers list
logits      JSON lines of ``{"pq_id", "start_logits", "end_logits"}``; index 0
            of both vectors is the null answer
"""

import json
import logging
import math
import warnings
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .exceptions import IntegrityError, ParseError
from .text import char_span_to_tokens, nfc
from .types import (
    NULL_DOC,
    NULL_DOC_ID,
    AnswerSpan,
    MrcSample,
    Passage,
    Qrels,
    Question,
    RetrievalRun,
    SpanRankedList,
    make_passage,
)

logger = logging.getLogger(__name__)


def _lines(path):
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if line.strip():
                yield lineno, line


def load_collection(path) -> List[Passage]:
    passages = []
    seen = set()
    for lineno, line in _lines(path):
        pid, sep, text = line.partition("\t")
        pid, text = pid.strip(), text.strip()
        if not sep or not pid or not text:
            raise ParseError("expected 'passage_id<TAB>text'", path, lineno)
        if pid == NULL_DOC_ID:
            raise ParseError(f"passage id {NULL_DOC_ID!r} is reserved", path, lineno)
        if pid in seen:
            raise IntegrityError(f"{path}:{lineno}: duplicate passage id {pid!r}")
        seen.add(pid)
        passages.append(make_passage(pid, text))
    if not passages:
        warnings.warn(f"collection {path} is empty", stacklevel=2)
    return passages


def write_collection(passages: Iterable[Passage], path):
    with open(path, "w", encoding="utf-8") as f:
        for p in passages:
            f.write(f"{p.id}\t{p.text}\n")


def load_questions(path) -> List[Question]:
    questions = []
    seen = set()
    for lineno, line in _lines(path):
        qid, sep, text = line.partition("\t")
        qid, text = qid.strip(), text.strip()
        if not sep or not qid or not text:
            raise ParseError("expected 'question_id<TAB>text'", path, lineno)
        if qid in seen:
            raise IntegrityError(f"{path}:{lineno}: duplicate question id {qid!r}")
        seen.add(qid)
        questions.append(Question(qid, nfc(text)))
    return questions


def write_questions(questions: Iterable[Question], path):
    with open(path, "w", encoding="utf-8") as f:
        for q in questions:
            f.write(f"{q.id}\t{q.text}\n")


def load_qrels(path) -> Qrels:
    judgments: Dict[str, set] = OrderedDict()
    for lineno, line in _lines(path):
        cols = line.split()
        if len(cols) != 4:
            raise ParseError(f"expected 4 columns, got {len(cols)}", path, lineno)
        qid, _, pid, rel = cols
        try:
            rel = float(rel)
        except ValueError:
            raise ParseError(f"relevance {rel!r} is not a number", path, lineno) from None
        relevant = judgments.setdefault(qid, set())
        if pid == NULL_DOC_ID or rel <= 0:
            continue
        relevant.add(pid)
    return Qrels(judgments)


def write_qrels(qrels: Qrels, path):
    with open(path, "w", encoding="utf-8") as f:
        for qid, pids in qrels.judgments.items():
            if not pids:
                f.write(f"{qid}\t0\t{NULL_DOC_ID}\t1\n")
            for pid in sorted(pids):
                f.write(f"{qid}\t0\t{pid}\t1\n")


def parse_run(path) -> RetrievalRun:
    rows: Dict[str, list] = OrderedDict()
    tag = None
    for lineno, line in _lines(path):
        cols = line.split()
        if len(cols) != 6:
            raise ParseError(f"expected 6 columns, got {len(cols)}", path, lineno)
        qid, _, pid, rank, score, run_tag = cols
        try:
            rank = int(rank)
            score = float(score)
        except ValueError:
            raise ParseError("rank must be an integer and score a real", path, lineno) from None
        if not math.isfinite(score):
            raise ParseError(f"non-finite score {cols[4]!r}", path, lineno)
        tag = tag or run_tag
        doc = NULL_DOC if pid == NULL_DOC_ID else pid
        rows.setdefault(qid, []).append((rank, lineno, doc, score))
    entries = {}
    for qid, items in rows.items():
        items.sort(key=lambda r: (r[0], r[1]))
        entries[qid] = [(doc, score) for _, _, doc, score in items]
    try:
        return RetrievalRun(entries, tag or "run")
    except IntegrityError as e:
        raise ParseError(str(e), path) from None


def format_run(run: RetrievalRun) -> str:
    out = []
    for qid, ranking in run.entries.items():
        for rank, (pid, score) in enumerate(ranking, start=1):
            pid = NULL_DOC_ID if pid is NULL_DOC else pid
            out.append(f"{qid}\tQ0\t{pid}\t{rank}\t{score!r}\t{run.tag}\n")
    return "".join(out)


def write_run(run: RetrievalRun, path):
    Path(path).write_text(format_run(run), encoding="utf-8")


def _read_json_records(path) -> list:
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if not stripped:
        return []
    if stripped[0] in "[{":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            if stripped[0] != "{":
                raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
        else:
            return data
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON line: {e.msg}", path, lineno) from None
    return records


_ID_KEYS = ("pq_id", "sample_id", "id")


def _is_record(data) -> bool:
    """True for a single JSON object carrying its own sample id."""
    return isinstance(data, dict) and any(k in data for k in _ID_KEYS)


def _sample_id(record, path, idx):
    if not isinstance(record, dict):
        raise ParseError(f"record {idx} is not a JSON object", path)
    for key in _ID_KEYS:
        if key in record:
            return str(record[key])
    raise ParseError(f"record {idx} has no 'pq_id'", path)


def _shift_offset(raw: str, offset: int) -> int:
    # offsets in files refer to the raw text; passages are stored NFC
    return len(nfc(raw[:offset]))


def _char_span(record, raw_text, path, sid):
    answer_text = record.get("text", record.get("answer", ""))
    if "start_char" not in record:
        raise ParseError(f"answer of {sid!r} needs 'start_char' or token indices", path)
    start = int(record["start_char"])
    end = int(record["end_char"]) if "end_char" in record else start + len(answer_text)
    if answer_text and raw_text[start:end] != answer_text:
        warnings.warn(f"{path}: answer text of {sid!r} does not match passage at offset {start}", stacklevel=4)
    if raw_text != nfc(raw_text):
        start, end = _shift_offset(raw_text, start), _shift_offset(raw_text, end)
    return start, end


def _to_span(record, raw_text, sample: MrcSample, path, with_score=False) -> AnswerSpan:
    sid = sample.sample_id
    score = float(record.get("score", 0.0)) if with_score else 0.0
    if with_score and not math.isfinite(score):
        raise ParseError(f"non-finite span score for {sid!r}", path)
    if "start_token" in record and "end_token" in record:
        s, e = int(record["start_token"]), int(record["end_token"])
    else:
        start, end = _char_span(record, raw_text, path, sid)
        try:
            s, e = char_span_to_tokens(list(sample.tokens), start, end)
        except ValueError as err:
            raise ParseError(f"answer of {sid!r}: {err}", path) from None
    if not 0 <= s <= e < len(sample.tokens):
        raise ParseError(f"span ({s}, {e}) of {sid!r} outside passage of {len(sample.tokens)} tokens", path)
    return sample.span(s, e, score)


def _split_pq_id(pq_id: str):
    pid, sep, qid = pq_id.rpartition("_")
    if sep and pid and qid:
        return pid, qid
    return None, None


def load_mrc_dataset(path) -> List[MrcSample]:
    records = _read_json_records(path)
    if _is_record(records):
        records = [records]
    elif isinstance(records, dict):
        if not isinstance(records.get("data"), list):
            raise ParseError("expected a list of samples, a 'data' list or one sample object", path)
        records = records["data"]
    samples = []
    seen = set()
    for idx, rec in enumerate(records):
        sid = _sample_id(rec, path, idx)
        if sid in seen:
            raise IntegrityError(f"{path}: duplicate sample id {sid!r}")
        seen.add(sid)
        try:
            raw_passage, question_text = rec["passage"], rec["question"]
        except KeyError as e:
            raise ParseError(f"record {sid!r} lacks {e.args[0]!r}", path) from None
        pid_guess, qid_guess = _split_pq_id(sid)
        pid = str(rec.get("passage_id") or pid_guess or sid)
        qid = str(rec.get("question_id") or qid_guess or sid)
        bare = MrcSample(sid, Question(qid, nfc(question_text)), make_passage(pid, raw_passage))
        gold = tuple(_to_span(a, raw_passage, bare, path) for a in rec.get("answers", []))
        samples.append(MrcSample(sid, bare.question, bare.passage, gold))
    return samples


def _span_record(sample: Optional[MrcSample], span: AnswerSpan, rank: int, with_score=True) -> dict:
    rec = {"text": span.text, "start_token": span.start_token, "end_token": span.end_token}
    if sample is not None and sample.tokens:
        rec["start_char"] = sample.tokens[span.start_token].start
        rec["end_char"] = sample.tokens[span.end_token].end
    if with_score:
        rec["rank"] = rank
        rec["score"] = span.score
    return rec


def dump_mrc_dataset(samples: Sequence[MrcSample]) -> list:
    return [
        {
            "pq_id": s.sample_id,
            "question_id": s.question.id,
            "question": s.question.text,
            "passage_id": s.passage.id,
            "passage": s.passage.text,
            "answers": [_span_record(s, g, i, with_score=False) for i, g in enumerate(s.gold, start=1)],
        }
        for s in samples
    ]


def write_mrc_dataset(samples: Sequence[MrcSample], path):
    Path(path).write_text(json.dumps(dump_mrc_dataset(samples), ensure_ascii=False, indent=1), encoding="utf-8")


def load_span_run(path, samples: Mapping[str, MrcSample]) -> Dict[str, SpanRankedList]:
    """Read predicted spans; ``samples`` supplies passages for offset alignment."""
    data = _read_json_records(path)
    if _is_record(data):
        data = [data]
    elif isinstance(data, dict):
        data = [{"pq_id": k, "answers": v} for k, v in data.items()]
    out: Dict[str, SpanRankedList] = OrderedDict()
    for idx, rec in enumerate(data):
        sid = _sample_id(rec, path, idx)
        if sid not in samples:
            raise IntegrityError(f"{path}: prediction for unknown sample {sid!r}")
        sample = samples[sid]
        answers = list(rec.get("answers", []))
        if answers and all("rank" in a for a in answers):
            answers.sort(key=lambda a: a["rank"])
        spans = [_to_span(a, sample.passage.text, sample, path, with_score=True) for a in answers]
        gamma = rec.get("no_answer_score")
        try:
            out[sid] = SpanRankedList(sid, tuple(spans), None if gamma is None else float(gamma))
        except IntegrityError as e:
            raise ParseError(str(e), path) from None
    return out


def dump_span_run(run: Mapping[str, SpanRankedList], samples: Optional[Mapping[str, MrcSample]] = None) -> list:
    records = []
    for sid, ranked in run.items():
        sample = samples.get(sid) if samples else None
        rec = {
            "pq_id": sid,
            "answers": [_span_record(sample, s, i) for i, s in enumerate(ranked.spans, start=1)],
        }
        if ranked.no_answer_score is not None:
            rec["no_answer_score"] = ranked.no_answer_score
        records.append(rec)
    return records


def write_span_run(run, path, samples=None):
    Path(path).write_text(json.dumps(dump_span_run(run, samples), ensure_ascii=False, indent=1), encoding="utf-8")


def load_logits(path):
    from .spans import TokenLogits

    data = _read_json_records(path)
    if _is_record(data):
        data = [data]
    elif isinstance(data, dict):
        data = [{"pq_id": k, **v} if isinstance(v, dict) else v for k, v in data.items()]
    out = OrderedDict()
    for idx, rec in enumerate(data):
        sid = _sample_id(rec, path, idx)
        try:
            out[sid] = TokenLogits(sid, np.asarray(rec["start_logits"], float), np.asarray(rec["end_logits"], float))
        except KeyError as e:
            raise ParseError(f"logits for {sid!r} lack {e.args[0]!r}", path) from None
    return out


def write_logits(logits, path):
    with open(path, "w", encoding="utf-8") as f:
        for lg in logits:
            rec = {"pq_id": lg.sample_id, "start_logits": list(map(float, lg.start_logits)),
                   "end_logits": list(map(float, lg.end_logits))}
            f.write(json.dumps(rec) + "\n")
