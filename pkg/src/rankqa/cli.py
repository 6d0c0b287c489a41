"""Command-line entry point.

Every subcommand accepts ``--config FILE`` (a JSON object whose keys are
option names); options given on the command line override the file.
Exit status is 0 on success, 1 on data or contract errors, 2 on usage errors.
"""

import argparse
import csv
import io as _io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

from . import io
from .dataset import validate_dataset
from .ensemble import aggregate_retrieval, aggregate_spans
from .exceptions import IntegrityError, RankQAError
from .leakage import DEFAULT_ZERO_RATIO, LeakageCategory, categorize, faithful_split, group_leakage
from .lexical import BM25Retriever, TfidfRetriever
from .metrics.mrc import CREDIT_POLICIES, evaluate_mrc
from .metrics.retrieval import map_task_a
from .postprocess import SpanPostprocessor
from .spans import SpanDecoder
from .types import NULL_DOC
from .thresholding import (
    DEFAULT_MRC_ZETA,
    apply_empty,
    apply_null_doc,
    find_best_zeta,
    gamma_mrc,
    gamma_retrieval,
    mrc_objective,
    normalize,
    quantile_zeta,
    retrieval_objective,
    sigma,
)

SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def dumps(obj) -> str:
    return json.dumps(_finite(obj), ensure_ascii=False, indent=2)


def _rows_csv(rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    for name, value in rows:
        w.writerow([name, repr(value) if isinstance(value, float) else value])
    return buf.getvalue().rstrip("\n")


def _emit(args, payload: dict, text: str, rows):
    fmt = args.format
    if fmt == "json":
        out = dumps(payload)
    elif fmt == "csv":
        out = _rows_csv(rows)
    else:
        out = text
    print(out)
    if getattr(args, "report", None):
        with open(args.report, "w", encoding="utf-8") as f:
            f.write(dumps(payload) + "\n")


@contextmanager
def _mapper(threads):
    n = threads or os.cpu_count() or 1
    if n <= 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=n) as pool:
        yield pool.map


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, [], "")]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _samples_by_id(path):
    samples = io.load_mrc_dataset(path)
    return samples, {s.sample_id: s for s in samples}


def _retrieval_marking(args, run, qrels):
    """Return (thresholded run, zeta, marked) according to the zeta options."""
    if args.zeta is None and args.zeta_quantile is None and not args.optimal:
        return run, None, frozenset()
    scored = {q: [s for p, s in run.entries[q] if p is not NULL_DOC] for q in run.question_ids()}
    scored = {q: s for q, s in scored.items() if s}
    if not scored:
        return run, None, frozenset()
    scores = normalize(gamma_retrieval(scored))
    if args.optimal:
        zeta, _ = find_best_zeta(scores, metric_eval=retrieval_objective(run, qrels))
    elif args.zeta_quantile is not None:
        zeta = quantile_zeta(scores, args.zeta_quantile)
    else:
        zeta = args.zeta
    marked = sigma(scores, zeta)
    return apply_null_doc(run, marked), zeta, marked


def cmd_eval_retrieval(args):
    _need(args, "run", "qrels")
    run = io.parse_run(args.run)
    qrels = io.load_qrels(args.qrels)
    run, zeta, marked = _retrieval_marking(args, run, qrels)
    cutoffs = [int(c) for c in str(args.cutoffs).split(",") if c]
    report = map_task_a(run, qrels, recall_cutoffs=cutoffs)
    report.zeta = zeta
    payload = report.to_dict()
    payload["marked"] = sorted(marked)
    _emit(args, payload, report.to_text(), report.summary_rows())
    return 0


def _mrc_marking(args, preds, samples):
    if args.no_threshold and not args.optimal:
        return preds, None, frozenset()
    raw = gamma_mrc(preds)
    if not raw:
        return preds, None, frozenset()
    scores = normalize(raw)
    if args.optimal:
        zeta, _ = find_best_zeta(scores, metric_eval=mrc_objective(preds, samples, args.credit))
    else:
        zeta = args.zeta
    marked = sigma(scores, zeta)
    return apply_empty(preds, marked), zeta, marked


def cmd_eval_mrc(args):
    _need(args, "pred", "gold")
    samples, by_id = _samples_by_id(args.gold)
    preds = io.load_span_run(args.pred, by_id)
    preds, zeta, marked = _mrc_marking(args, preds, samples)
    with _mapper(args.threads) as map_fn:
        report = evaluate_mrc(preds, samples, credit=args.credit, map_fn=map_fn)
    report.zeta = zeta
    payload = report.to_dict()
    payload["marked"] = sorted(marked)
    _emit(args, payload, report.to_text(), report.summary_rows())
    return 0


def cmd_span_decode(args):
    _need(args, "logits", "dataset", "out")
    _, by_id = _samples_by_id(args.dataset)
    logits = list(io.load_logits(args.logits).values())
    missing = [lg.sample_id for lg in logits if lg.sample_id not in by_id]
    if missing:
        raise IntegrityError(f"logits for unknown samples: {missing}")
    ranked = SpanDecoder(args.max_span_len, args.n_best).fit().transform(logits, samples=by_id)
    run = {r.sample_id: r for r in ranked}
    io.write_span_run(run, args.out, by_id)
    rows = [("samples", len(run)), ("spans", sum(len(r) for r in ranked))]
    _emit(args, {"schema_version": SCHEMA_VERSION, **dict(rows)}, f"decoded {len(run)} samples -> {args.out}", rows)
    return 0


def cmd_postprocess(args):
    _need(args, "pred", "dataset", "out")
    _, by_id = _samples_by_id(args.dataset)
    preds = io.load_span_run(args.pred, by_id)
    pp = SpanPostprocessor(args.overlap, args.min_len, args.max_answers).fit()
    out = {r.sample_id: r for r in pp.transform(list(preds.values()))}
    io.write_span_run(out, args.out, by_id)
    rows = [("samples", len(out)), ("spans_in", sum(len(r) for r in preds.values())),
            ("spans_out", sum(len(r) for r in out.values()))]
    _emit(args, {"schema_version": SCHEMA_VERSION, **dict(rows)}, "\n".join(f"{k}: {v}" for k, v in rows), rows)
    return 0


def _write_trace(path, trace):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["zeta", "metric", "n_marked"])
        for zeta, metric, n in trace:
            w.writerow([repr(zeta), repr(metric), n])


def cmd_threshold_tune(args):
    if args.task == "a":
        _need(args, "run", "qrels")
        run = io.parse_run(args.run)
        qrels = io.load_qrels(args.qrels)
        scored = {q: [s for p, s in run.entries[q] if p is not NULL_DOC] for q in run.question_ids()}
        raw = gamma_retrieval({q: s for q, s in scored.items() if s})
        metric = retrieval_objective(run, qrels)
    else:
        _need(args, "pred", "gold")
        samples, by_id = _samples_by_id(args.gold)
        preds = io.load_span_run(args.pred, by_id)
        raw = gamma_mrc(preds)
        if not raw:
            raise IntegrityError("predictions carry no no_answer_score to threshold")
        metric = mrc_objective(preds, samples, args.credit)
    scores = normalize(raw)
    if args.mode == "optimal":
        zeta, value, trace = find_best_zeta(scores, metric_eval=metric, return_trace=True)
    else:
        if args.value is None:
            raise UsageError(f"--value is required for --mode {args.mode}")
        zeta = quantile_zeta(scores, args.value) if args.mode == "quantile" else args.value
        _, _, trace = find_best_zeta(scores, metric_eval=metric, return_trace=True)
        value = None
    marked = sigma(scores, zeta)
    value = metric(marked) if value is None else value
    if args.trace_out:
        _write_trace(args.trace_out, trace)
    if args.out:
        if args.task == "a":
            io.write_run(apply_null_doc(run, marked), args.out)
        else:
            io.write_span_run(apply_empty(preds, marked), args.out, by_id)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "task": args.task,
        "mode": args.mode,
        "zeta": zeta,
        "metric": value,
        "n_items": len(raw),
        "marked": sorted(marked),
    }
    text = f"zeta    {zeta!r}\nmetric  {100 * value:.2f}\nmarked  {len(marked)}/{len(raw)}"
    _emit(args, payload, text, [("zeta", zeta), ("metric", value), ("n_marked", len(marked))])
    return 0


def cmd_ensemble(args):
    _need(args, "inputs", "out")
    if args.task == "a":
        runs = [io.parse_run(p) for p in args.inputs]
        result = aggregate_retrieval(runs, top_k=args.top_k, tag=args.tag)
        io.write_run(result, args.out)
        n = len(result.entries)
    else:
        _need(args, "dataset")
        _, by_id = _samples_by_id(args.dataset)
        runs = [io.load_span_run(p, by_id) for p in args.inputs]
        result = aggregate_spans(runs, top_k=args.top_k)
        io.write_span_run(result, args.out, by_id)
        n = len(result)
    rows = [("members", len(args.inputs)), ("items", n)]
    _emit(args, {"schema_version": SCHEMA_VERSION, **dict(rows)}, f"ensembled {len(args.inputs)} runs -> {args.out}", rows)
    return 0


def cmd_analyze_leakage(args):
    _need(args, "input")
    samples = io.load_mrc_dataset(args.input)
    cats = categorize(samples, args.repeat_threshold)
    d1 = [s for s in samples if cats[s.sample_id] is LeakageCategory.D1_IN_LEAKAGE]
    groups = group_leakage(d1)
    counts = {c.value: {"n": 0, "zero": 0} for c in LeakageCategory}
    for s in samples:
        counts[cats[s.sample_id].value]["n"] += 1
        counts[cats[s.sample_id].value]["zero"] += int(s.is_zero_answer)
    zero_total = sum(s.is_zero_answer for s in samples)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "n_samples": len(samples),
        "categories": counts,
        "d1_zero_answer_share": counts["D1_in_leakage"]["zero"] / zero_total if zero_total else 0.0,
        "groups": [
            {"group_id": g.group_id, "members": list(g.members), "contains_zero_answer": g.contains_zero_answer}
            for g in groups
        ],
        "assignment": {k: v.value for k, v in cats.items()},
    }
    width = max(len(c) for c in counts)
    text = "\n".join(f"{c:<{width}}  {d['n']:5d} ({d['zero']})" for c, d in counts.items())
    text += f"\n{'leakage groups':<{width}}  {len(groups):5d}"
    _emit(args, payload, text, [(c, d["n"]) for c, d in counts.items()] + [("groups", len(groups))])
    return 0


def cmd_split_faithful(args):
    _need(args, "input", "out_train", "out_dev")
    samples = io.load_mrc_dataset(args.input)
    split = faithful_split(samples, args.zero_ratio, args.dev_fraction, args.repeat_threshold)
    train = [s for s in samples if split.assignment[s.sample_id] == "train"]
    dev = [s for s in samples if split.assignment[s.sample_id] == "dev"]
    io.write_mrc_dataset(train, args.out_train)
    io.write_mrc_dataset(dev, args.out_dev)
    payload = {"schema_version": SCHEMA_VERSION, **split.to_dict()}
    rows = [("train", len(train)), ("dev", len(dev)), ("train_zero", split.summary()["total"]["train"]["zero"]),
            ("dev_zero", split.summary()["total"]["dev"]["zero"])]
    _emit(args, payload, split.format_table(), rows)
    return 0


def _lexical_search(args, retriever):
    _need(args, "collection", "queries", "out")
    collection = io.load_collection(args.collection)
    questions = io.load_questions(args.queries)
    run = retriever.fit(collection).predict(questions)
    marked = frozenset()
    if args.zeta_quantile is not None:
        scored = {q: run.scores(q) for q in run.question_ids() if run.scores(q)}
        if scored:
            scores = normalize(gamma_retrieval(scored))
            marked = sigma(scores, quantile_zeta(scores, args.zeta_quantile))
            run = apply_null_doc(run, marked)
    # questions with no matching passage have nothing to rank; predict the null document
    run = apply_null_doc(run, {q for q in run.question_ids() if not run.ranking(q)})
    io.write_run(run, args.out)
    rows = [("questions", len(questions)), ("null_predictions", sum(run.is_null(q) for q in run.question_ids()))]
    _emit(args, {"schema_version": SCHEMA_VERSION, **dict(rows)}, f"wrote {args.out}", rows)
    return 0


def cmd_bm25_search(args):
    return _lexical_search(args, BM25Retriever(args.k1, args.b, args.k, args.tag or "bm25"))


def cmd_tfidf_search(args):
    return _lexical_search(args, TfidfRetriever(args.k, args.tag or "tfidf"))


def cmd_validate(args):
    if not any([args.questions, args.qrels, args.dataset]):
        raise UsageError("give at least one of --questions, --qrels, --dataset")
    questions = io.load_questions(args.questions) if args.questions else None
    qrels = io.load_qrels(args.qrels) if args.qrels else None
    collection = io.load_collection(args.collection) if args.collection else None
    samples = io.load_mrc_dataset(args.dataset) if args.dataset else None
    report = validate_dataset(questions, qrels, samples, collection)
    payload = {"schema_version": SCHEMA_VERSION, **report.to_dict()}
    rows = [(k, v) for k, v in report.to_dict().items() if not isinstance(v, dict)]
    rows += [(f"question_{k}", v) for k, v in report.question_types.items()]
    rows += [(f"pair_{k}", v) for k, v in report.pair_types.items()]
    width = max(len(k) for k, _ in rows)
    text = "\n".join(f"{k:<{width}}  {v}" for k, v in rows)
    _emit(args, payload, text, rows)
    return 0


def _common(p):
    p.add_argument("--config", help="JSON file with option defaults")
    p.add_argument("--format", choices=("json", "text", "csv"), default="text")
    p.add_argument("--report", help="also write the JSON report to this file")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")


def _zeta_options(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--zeta", type=float, default=None, help="fixed zero-answer threshold")
    g.add_argument("--zeta-quantile", type=float, default=None, help="mark this fraction as unanswerable")
    g.add_argument("--optimal", action="store_true", help="use the metric-maximizing threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankqa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("eval-retrieval", help="MAP/MRR/R@k of a passage run")
    _common(p)
    p.add_argument("--run")
    p.add_argument("--qrels")
    p.add_argument("--cutoffs", default="10,100")
    _zeta_options(p)
    p.set_defaults(func=cmd_eval_retrieval)

    p = sub.add_parser("eval-mrc", help="pAP of ranked answer spans")
    _common(p)
    p.add_argument("--pred")
    p.add_argument("--gold")
    p.add_argument("--zeta", type=float, default=DEFAULT_MRC_ZETA)
    p.add_argument("--no-threshold", action="store_true")
    p.add_argument("--optimal", action="store_true")
    p.add_argument("--credit", choices=CREDIT_POLICIES, default="optimal")
    p.set_defaults(func=cmd_eval_mrc)

    p = sub.add_parser("span-decode", help="decode logits into ranked spans")
    _common(p)
    p.add_argument("--logits")
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--max-span-len", type=int, default=30)
    p.add_argument("--n-best", type=int, default=20)
    p.set_defaults(func=cmd_span_decode)

    p = sub.add_parser("postprocess", help="short-answer rejection and NMS")
    _common(p)
    p.add_argument("--pred")
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--min-len", type=int, default=1)
    p.add_argument("--max-answers", type=int, default=10)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("threshold-tune", help="choose a zero-answer threshold")
    _common(p)
    p.add_argument("--mode", choices=("fixed", "quantile", "optimal"), default="optimal")
    p.add_argument("--value", type=float)
    p.add_argument("--task", choices=("a", "b"), default="a")
    p.add_argument("--run")
    p.add_argument("--qrels")
    p.add_argument("--pred")
    p.add_argument("--gold")
    p.add_argument("--credit", choices=CREDIT_POLICIES, default="optimal")
    p.add_argument("--trace-out", help="CSV of threshold, metric, n_marked")
    p.add_argument("--out", help="write the thresholded run here")
    p.set_defaults(func=cmd_threshold_tune)

    p = sub.add_parser("ensemble", help="sum member scores")
    _common(p)
    p.add_argument("--inputs", nargs="+")
    p.add_argument("--task", choices=("a", "b"), default="a")
    p.add_argument("--dataset", help="task b: dataset the span runs refer to")
    p.add_argument("--out")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--tag", default="ensemble")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("analyze-leakage", help="leakage categories and groups")
    _common(p)
    p.add_argument("--in", dest="input")
    p.add_argument("--repeat-threshold", type=int, default=3)
    p.set_defaults(func=cmd_analyze_leakage)

    p = sub.add_parser("split-faithful", help="leakage-aware train/dev split")
    _common(p)
    p.add_argument("--in", dest="input")
    p.add_argument("--zero-ratio", type=float, default=DEFAULT_ZERO_RATIO)
    p.add_argument("--dev-fraction", type=float, default=0.133)
    p.add_argument("--repeat-threshold", type=int, default=3)
    p.add_argument("--out-train")
    p.add_argument("--out-dev")
    p.set_defaults(func=cmd_split_faithful)

    for name, func, help_ in (
        ("bm25-search", cmd_bm25_search, "BM25 baseline run"),
        ("tfidf-search", cmd_tfidf_search, "TF-IDF baseline run"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--collection")
        p.add_argument("--queries")
        p.add_argument("--out")
        p.add_argument("--k", type=int, default=10)
        p.add_argument("--tag")
        p.add_argument("--zeta-quantile", type=float, default=None)
        if name == "bm25-search":
            p.add_argument("--k1", type=float, default=1.2)
            p.add_argument("--b", type=float, default=0.75)
        p.set_defaults(func=func)

    p = sub.add_parser("validate", help="dataset statistics and integrity")
    _common(p)
    p.add_argument("--questions")
    p.add_argument("--qrels")
    p.add_argument("--collection")
    p.add_argument("--dataset")
    p.set_defaults(func=cmd_validate)
    return parser


def _apply_config(parser, argv):
    """Re-parse with config-file values as defaults so explicit flags win."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config, encoding="utf-8") as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        parser.error(f"cannot read config {args.config}: {e}")
    if not isinstance(cfg, dict):
        parser.error("config file must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - known)
    if unknown:
        parser.error(f"unknown config keys for {args.command}: {unknown}")
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = _apply_config(parser, argv)
    except SystemExit as e:
        return int(e.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"rankqa {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (RankQAError, OSError) as e:
        print(f"rankqa {args.command}: {e}", file=sys.stderr)
        return 1


def run_cli(argv) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
