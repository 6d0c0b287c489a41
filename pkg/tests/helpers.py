from rankqa.types import AnswerSpan, MrcSample, Passage, Question


def make_sample(sid, question, passage, gold_tokens=(), qid=None, pid=None):
    """Build an MrcSample whose gold spans are given as token ranges."""
    bare = MrcSample(sid, Question(qid or sid, question), Passage(pid or sid, passage))
    gold = tuple(bare.span(s, e) for s, e in gold_tokens)
    return MrcSample(sid, bare.question, bare.passage, gold)


def spans(*pairs, scores=None):
    scores = scores or [0.0] * len(pairs)
    return [AnswerSpan(s, e, "", sc) for (s, e), sc in zip(pairs, scores)]


def random_corpus(rng, n, vocab=8, passage_len=6, zero_rate=0.15):
    """Synthetic MRC samples drawn from small passage/question pools so that
    passages, questions and answer strings repeat often."""
    words = [f"w{i}" for i in range(vocab)]
    passages = [" ".join(rng.choice(words) for _ in range(passage_len)) for _ in range(max(2, n // 4))]
    questions = [f"question {i}" for i in range(max(2, n // 3))]
    out = []
    for i in range(n):
        passage = rng.choice(passages)
        golds = []
        if rng.random() >= zero_rate:
            for _ in range(rng.randint(1, 2)):
                s = rng.randrange(passage_len)
                golds.append((s, min(passage_len - 1, s + rng.randint(0, 1))))
        golds = sorted(set(golds))
        out.append(make_sample(f"s{i:04d}", rng.choice(questions), passage, golds,
                               qid=None, pid=f"p{passages.index(passage)}"))
    return out
