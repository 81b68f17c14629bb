import json

import pytest
from hypothesis import given, strategies as st

from opinionqa.corpus import (Corpus, CorpusError, QaRecord, ReviewDoc, Source, ingest, load_corpus, make_docs,
                              make_splits, relabel, save_corpus, split_sentences, split_sizes)


def write_jsonl(path, rows, raw=()):
    with open(path, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
        for line in raw:
            fh.write(line + "\n")


def test_split_sentences_examples():
    assert split_sentences("Great. Works!") == ["Great.", "Works!"]
    assert split_sentences("") == []
    assert split_sentences("fits my 5.8 daughter fine") == ["fits my 5.8 daughter fine"]
    assert split_sentences("  Really?   Yes.\nOk ") == ["Really?", "Yes.", "Ok"]


@given(st.text(alphabet="ab .!?\n", max_size=40))
def test_split_sentences_properties(text):
    out = split_sentences(text)
    assert all(s.strip() == s and s for s in out)
    assert "".join("".join(out).split()) == "".join(text.split())
    for s in out:
        assert split_sentences(s) == [s]


def test_make_docs_drops_empty_token_sentences():
    docs, dropped = make_docs("p", "Nice. ... !!! Fine")
    assert [d.text for d in docs] == ["Nice.", "Fine"]
    assert dropped == 2
    assert docs[0].tokens == ("nice",)


def test_ingest_counts_malformed(tmp_path):
    r, q = tmp_path / "r.jsonl", tmp_path / "q.jsonl"
    write_jsonl(r, [{"product_id": "a", "text": "Great. Works!"}, {"text": "no id"}], raw=["{not json"])
    write_jsonl(q, [{"product_id": "a", "question": "Is it ok?", "answer": "yes", "label": "yes"},
                    {"product_id": "a", "question": "What?", "answer": "blue"}])
    corpus, rep = ingest(str(r), str(q))
    assert len(corpus.product_docs("a")) == 2
    assert rep.skipped == 2
    assert [x.binary_label for x in corpus.qa] == ["yes", None]


def test_ingest_empty_is_error(tmp_path):
    r, q = tmp_path / "r.jsonl", tmp_path / "q.jsonl"
    r.write_text("")
    q.write_text("")
    with pytest.raises(CorpusError):
        ingest(str(r), str(q))
    with pytest.raises(OSError):
        ingest(str(tmp_path / "missing"), str(q))


def _corpus(n):
    docs = (ReviewDoc("p", "x", ("x",), Source.REVIEW),)
    return Corpus(docs, tuple(QaRecord("p", f"q{i}", "a") for i in range(n)))


def test_split_sizes_floor_then_distribute():
    assert split_sizes(100, (0.8, 0.1, 0.1)) == [80, 10, 10]
    assert split_sizes(10, (0.8, 0.1, 0.1)) == [8, 1, 1]
    assert split_sizes(7, (0.5, 0.25, 0.25)) == [3, 2, 2]  # 3.5/1.75/1.75: remainders .75 win


def test_make_splits_deterministic_partition():
    c = _corpus(10)
    a, b = make_splits(c, (0.8, 0.1, 0.1), 7), make_splits(c, (0.8, 0.1, 0.1), 7)
    assert a.splits == b.splits
    allidx = sorted(i for k in a.splits.values() for i in k)
    assert allidx == list(range(10))
    assert make_splits(_corpus(100)).splits["test"].__len__() == 10


@pytest.mark.parametrize("fr", [(0.5, 0.5, 0.5), (1.0, 0.0, 0.0), (0.5, 0.5)])
def test_make_splits_bad_fractions(fr):
    with pytest.raises(CorpusError):
        make_splits(_corpus(10), fr)


def test_make_splits_too_few():
    with pytest.raises(CorpusError):
        make_splits(_corpus(2))


def test_trainable_requires_docs():
    docs = (ReviewDoc("p", "x", ("x",), Source.REVIEW),)
    c = Corpus(docs, (QaRecord("p", "q", "a", "yes"), QaRecord("zz", "q", "a", "no"), QaRecord("p", "q", "a")))
    assert len(c.trainable("train")) == 2
    assert len(c.trainable("train", labeled=True)) == 1


def test_save_load_roundtrip(tmp_path):
    c = _corpus(5)
    c = Corpus(c.docs + (ReviewDoc("p", "desc one", ("desc", "one"), Source.DESCRIPTION),), c.qa)
    c = make_splits(relabel(c, {1: "no"}), (0.6, 0.2, 0.2), 3)
    save_corpus(c, str(tmp_path / "c"))
    back = load_corpus(str(tmp_path / "c"))
    assert back.qa == c.qa and back.splits == c.splits
    assert back.documents(Source.DESCRIPTION) == c.documents(Source.DESCRIPTION)
