import numpy as np
import pytest

from opinionqa.corpus import Source
from opinionqa.evalharness import auc_from_scores, sample_candidates
from opinionqa.model import BINARY
from opinionqa.synthetic import SynthConfig, generate_polarity_corpus, generate_synthetic


def test_same_seed_same_corpus():
    a = generate_synthetic(SynthConfig(n_questions=200, seed=5))
    b = generate_synthetic(SynthConfig(n_questions=200, seed=5))
    assert a.corpus == b.corpus and a.planted == b.planted
    assert generate_synthetic(SynthConfig(n_questions=200, seed=6)).corpus != a.corpus


def test_minimum_sizes():
    with pytest.raises(ValueError):
        SynthConfig(n_products=10)
    with pytest.raises(ValueError):
        SynthConfig(n_questions=100)


def test_shape_and_sources():
    syn = generate_synthetic(SynthConfig(n_questions=200))
    c = syn.corpus
    assert len(c.documents(Source.REVIEW)) == 250 and len(c.products()) == 50
    assert len(c.documents(Source.DESCRIPTION)) == 250
    assert len(c.splits["train"]) == 160 and len(c.splits["test"]) == 40
    assert all(c.docs[d].product_id == r.product_id for d, r in zip(syn.planted, c.qa))


def test_relevance_map_is_rank_three():
    syn = generate_synthetic(SynthConfig(n_questions=200))
    assert np.linalg.matrix_rank(syn.relevance_map) == 3


def test_oracle_picks_planted_sentence():
    syn = generate_synthetic(SynthConfig(n_questions=200))
    c = syn.corpus
    for qi, rec in enumerate(c.qa[:50]):
        docs = c.product_docs(rec.product_id)
        scores = syn.oracle_relevance(rec.question, docs)
        assert docs[int(np.argmax(scores))] == c.docs[syn.planted[qi]]


def test_oracle_auc_high():
    syn = generate_synthetic(SynthConfig(n_questions=200))
    c = syn.corpus
    ids = list(range(len(c.qa)))
    cand = sample_candidates(c, ids, 50, 0)
    aucs = []
    for qi in ids:
        rec = c.qa[qi]
        docs = c.product_docs(rec.product_id)
        w = np.exp(50 * syn.oracle_relevance(rec.question, docs))
        w /= w.sum()
        score = lambda a: w @ syn.oracle_vote(a, docs)
        aucs.append(auc_from_scores(score(rec.answer), [score(c.qa[j].answer) for j in cand[qi]]))
    assert np.mean(aucs) >= 0.99


def test_binary_labels_follow_polarity():
    syn = generate_synthetic(SynthConfig(n_questions=400, mode=BINARY))
    c = syn.corpus
    assert all(r.binary_label in ("yes", "no") for r in c.qa)
    for qi, rec in enumerate(c.qa):
        if syn.answerable[qi]:
            toks = c.docs[syn.planted[qi]].tokens
            assert (rec.binary_label == "yes") == any(t.startswith("pos") for t in toks)


def test_polarity_corpus_noise_rate():
    pc = generate_polarity_corpus(n_questions=4000, noise=0.05, seed=1)
    pairs = [(r.binary_label, t) for r, t in zip(pc.corpus.qa, pc.truth) if t is not None]
    flipped = np.mean([a != b for a, b in pairs])
    assert 0.03 < flipped < 0.07
    assert all(r.binary_label is None for r, y in zip(pc.corpus.qa, pc.is_yesno) if not y)
