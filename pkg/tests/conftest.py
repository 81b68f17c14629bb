import numpy as np
import pytest

from opinionqa.corpus import Corpus, QaRecord, ReviewDoc, Source
from opinionqa.textproc import BowVector


def tiny_corpus(rng, n_questions=4, reviews_per=3, n_words=12, labeled=True, q_len=4, r_len=5):
    """Random corpus over ``n_words`` words, one product per question."""
    words = [f"w{i}" for i in range(n_words)]
    docs, qa = [], []
    for i in range(n_questions):
        pid = f"p{i}"
        for _ in range(reviews_per):
            toks = list(rng.choice(words, size=r_len))
            docs.append(ReviewDoc(pid, " ".join(toks), tuple(toks), Source.REVIEW))
        q = " ".join(rng.choice(words, size=q_len))
        a = " ".join(rng.choice(words, size=3))
        lab = ("yes" if rng.random() < 0.5 else "no") if labeled else None
        qa.append(QaRecord(pid, q, a, lab))
    # make sure every word occurs so the vocabulary has exactly n_words terms
    docs.append(ReviewDoc("pall", " ".join(words), tuple(words), Source.REVIEW))
    return Corpus(tuple(docs), tuple(qa))


def random_bow(rng, F, max_nnz=6):
    nnz = int(rng.integers(0, max_nnz + 1))
    idx = rng.choice(F, size=min(nnz, F), replace=False)
    return BowVector.from_counts({int(i): float(rng.integers(1, 4)) for i in idx})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def question_set(rng, n_questions=4, reviews_per=3, F=12):
    """A QuestionSet over a random tiny corpus with exactly F vocabulary terms."""
    from opinionqa.batch import QuestionSet
    from opinionqa.textproc import build_vocabulary, compute_stats, corpus_token_streams

    corpus = tiny_corpus(rng, n_questions, reviews_per, n_words=F)
    vocab = build_vocabulary(corpus_token_streams(corpus), F)
    stats = compute_stats([d.tokens for d in corpus.documents()], vocab)
    return corpus, QuestionSet(corpus.trainable("train"), corpus, vocab, stats)


def objectives(rng, K=2, J=3, **kw):
    """(binary objective, open-ended objective, layout) on one random instance."""
    from opinionqa.batch import BinaryObjective, OpenEndedObjective, encode_texts
    from opinionqa.model import ParamLayout

    corpus, qs = question_set(rng, **kw)
    layout = ParamLayout(qs.vocab.F, K)
    recs = qs.records
    binary = BinaryObjective(qs, [r.binary_label for r in recs], layout, l2=0.01)
    _, answers = encode_texts([r.answer for r in recs], qs.vocab)
    words = list(qs.vocab.terms)
    neg_texts = [" ".join(rng.choice(words, size=3)) for _ in range(len(recs) * J)]
    _, negatives = encode_texts(neg_texts, qs.vocab)
    open_ = OpenEndedObjective(qs, answers, negatives, J, layout, l2=0.01)
    return binary, open_, layout


def fd_relative_error(objective, x, h=1e-5):
    """max |analytic - central difference| / max |analytic|."""
    g = objective(x)[1]
    fd = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        fd[i] = (objective(x + e)[0] - objective(x - e)[0]) / (2 * h)
    return float(np.max(np.abs(g - fd)) / max(np.max(np.abs(g)), 1e-300))
