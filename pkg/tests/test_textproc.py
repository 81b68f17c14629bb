import numpy as np
import pytest
from hypothesis import given, strategies as st

from opinionqa.textproc import (BowVector, Vocabulary, bow_matrix, build_vocabulary, compute_stats, load_stats,
                                load_vocabulary, save_stats, save_vocabulary, tokenize, vectorize)


def test_tokenize():
    assert tokenize("Is this bike a MEDIUM?") == ["is", "this", "bike", "a", "medium"]
    assert tokenize("5.8 in_stock") == ["5", "8", "in", "stock"]
    assert tokenize("") == []


def test_vocabulary_order_and_truncation():
    v = build_vocabulary([["b", "a", "c"], ["a", "b"], ["d"]], F=3)
    assert v.terms == ("a", "b", "c")
    with pytest.warns(UserWarning):
        assert build_vocabulary([["x"]], F=5).F == 1
    with pytest.raises(ValueError):
        build_vocabulary([], F=5)


def test_vectorize_counts_and_oov():
    v = Vocabulary(("a", "b", "c"))
    bow = vectorize(["c", "a", "zz", "c"], v)
    assert bow.entries == {0: 1.0, 2: 2.0}
    assert bow.norm == pytest.approx(np.sqrt(5))
    assert len(vectorize(["zz"], v)) == 0


@given(st.dictionaries(st.integers(0, 30), st.integers(1, 5), max_size=8),
       st.dictionaries(st.integers(0, 30), st.integers(1, 5), max_size=8))
def test_bow_dot_matches_dense(a, b):
    u, w = BowVector.from_counts(a), BowVector.from_counts(b)
    assert u.dot(w) == pytest.approx(u.to_dense(31) @ w.to_dense(31))
    n = u.normalized()
    if u.norm:
        assert np.linalg.norm(n.to_dense(31)) == pytest.approx(1.0)


def test_stats_and_bow_matrix():
    v = Vocabulary(("a", "b"))
    docs = [["a", "a", "x"], ["b"], ["a", "b", "q", "q"]]
    st_ = compute_stats(docs, v)
    assert st_.N == 3 and st_.avgdl == pytest.approx(8 / 3)
    assert st_.doc_freq.tolist() == [2, 2]
    m = bow_matrix([vectorize(d, v) for d in docs], v.F, normalize=True).toarray()
    assert np.allclose(np.linalg.norm(m, axis=1), 1.0)


def test_vocab_and_stats_roundtrip(tmp_path):
    v = Vocabulary(("a", "b", "c"))
    s = compute_stats([["a", "b"], ["c", "c", "a"]], v)
    save_vocabulary(v, tmp_path / "v.txt")
    save_stats(s, v, tmp_path / "s.tsv")
    v2 = load_vocabulary(tmp_path / "v.txt")
    s2 = load_stats(tmp_path / "s.tsv", v2)
    assert v2 == v and s2.N == s.N and s2.avgdl == s.avgdl
    assert np.array_equal(s2.doc_freq, s.doc_freq)
