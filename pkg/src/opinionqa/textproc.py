"""Tokenization, vocabulary, bag-of-words vectors and collection statistics."""

from __future__ import annotations

import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercased maximal runs of letters/digits; everything else separates.

    >>> tokenize("It's GREAT...loud!")
    ['it', 's', 'great', 'loud']
    """
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    index: Mapping[str, int] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        index = {t: i for i, t in enumerate(self.terms)}
        if len(index) != len(self.terms):
            raise ValueError("duplicate terms in vocabulary")
        object.__setattr__(self, "index", index)

    @property
    def F(self) -> int:
        return len(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def ids(self, tokens: Iterable[str]) -> list[int]:
        """Positions of the in-vocabulary tokens, in order, repeats kept."""
        index = self.index
        return [index[t] for t in tokens if t in index]


@dataclass(frozen=True)
class BowVector:
    """Sparse nonnegative term-count vector. ``indices`` are sorted and
    unique; zero weights are never stored."""

    indices: np.ndarray
    values: np.ndarray
    norm: float

    @classmethod
    def from_counts(cls, counts: Mapping[int, float]) -> "BowVector":
        items = sorted((int(i), float(v)) for i, v in counts.items() if v != 0)
        idx = np.array([i for i, _ in items], dtype=np.int64)
        val = np.array([v for _, v in items], dtype=np.float64)
        return cls(idx, val, float(math.sqrt(float(val @ val))) if len(val) else 0.0)

    @classmethod
    def zeros(cls) -> "BowVector":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0), 0.0)

    @property
    def entries(self) -> dict[int, float]:
        return dict(zip(self.indices.tolist(), self.values.tolist()))

    def __len__(self) -> int:
        return len(self.indices)

    def normalized(self) -> "BowVector":
        if self.norm == 0:
            return self
        return BowVector(self.indices, self.values / self.norm, 1.0)

    def dot(self, other: "BowVector") -> float:
        common, ia, ib = np.intersect1d(self.indices, other.indices, assume_unique=True, return_indices=True)
        if not len(common):
            return 0.0
        return float(self.values[ia] @ other.values[ib])

    def to_dense(self, F: int) -> np.ndarray:
        out = np.zeros(F)
        out[self.indices] = self.values
        return out


@dataclass(frozen=True)
class CorpusStats:
    N: int
    avgdl: float
    doc_freq: np.ndarray  # length F, aligned with the vocabulary

    def n(self, term_id: int) -> int:
        return int(self.doc_freq[term_id])


def build_vocabulary(texts: Iterable[Sequence[str]], F: int = 5000) -> Vocabulary:
    """Keep the ``F`` most frequent tokens; ties broken lexicographically.

    ``texts`` is any iterable of token sequences (documents, questions and
    answers pooled). Warns and shrinks F when fewer distinct tokens exist.
    """
    if F < 1:
        raise ValueError("F must be >= 1")
    counts: Counter = Counter()
    for toks in texts:
        counts.update(toks)
    if not counts:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if len(ranked) < F:
        warnings.warn(f"only {len(ranked)} distinct tokens; vocabulary size reduced from {F}", stacklevel=2)
    return Vocabulary(tuple(t for t, _ in ranked[:F]))


def corpus_token_streams(corpus, source="review", qa=None):
    """Token sequences a vocabulary is built from: documents of one source
    plus questions and answers."""
    for d in corpus.documents(source):
        yield d.tokens
    for rec in corpus.qa if qa is None else qa:
        yield tokenize(rec.question)
        yield tokenize(rec.answer)


def vectorize(tokens: Sequence[str], vocab: Vocabulary) -> BowVector:
    """Raw term counts; out-of-vocabulary tokens are dropped."""
    return BowVector.from_counts(Counter(vocab.ids(tokens)))


def compute_stats(docs: Sequence[Sequence[str]], vocab: Vocabulary) -> CorpusStats:
    """Document count, per-term document frequency and mean length (in tokens,
    OOV included) over the given documents."""
    if not docs:
        raise ValueError("cannot compute statistics over zero documents")
    df = np.zeros(vocab.F, dtype=np.int64)
    total = 0
    for toks in docs:
        total += len(toks)
        ids = np.unique(np.asarray(vocab.ids(toks), dtype=np.int64))
        df[ids] += 1
    return CorpusStats(len(docs), total / len(docs), df)


def bow_matrix(vectors: Sequence[BowVector], F: int, normalize: bool = False) -> sp.csr_matrix:
    """Stack vectors as CSR rows, optionally L2-normalized."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v)
    if len(vectors):
        indices = np.concatenate([v.indices for v in vectors])
        data = np.concatenate([v.values / v.norm if normalize and v.norm else v.values for v in vectors])
    else:
        indices, data = np.zeros(0, dtype=np.int64), np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), F))


def save_vocabulary(vocab: Vocabulary, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(t + "\n" for t in vocab.terms)


def load_vocabulary(path: str) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        return Vocabulary(tuple(line.rstrip("\n") for line in fh if line.rstrip("\n")))


def save_stats(stats: CorpusStats, vocab: Vocabulary, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"N\t{stats.N}\n")
        fh.write(f"avgdl\t{stats.avgdl!r}\n")
        for t, n in zip(vocab.terms, stats.doc_freq.tolist()):
            fh.write(f"{t}\t{n}\n")


def load_stats(path: str, vocab: Vocabulary) -> CorpusStats:
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    head = dict(lines[:2])
    df = np.zeros(vocab.F, dtype=np.int64)
    for term, n in lines[2:]:
        df[vocab.index[term]] = int(n)
    return CorpusStats(int(head["N"]), float(head["avgdl"]), df)
