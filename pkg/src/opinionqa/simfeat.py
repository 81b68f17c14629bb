"""Off-the-shelf similarity features: cosine, BM25+ and ROUGE-L."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .textproc import BowVector, CorpusStats, Vocabulary

FEATURE_NAMES = ("cosine", "bm25p", "rouge_l")
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class Bm25Config:
    k1: float = 1.2
    b: float = 0.75
    delta: float = 1.0
    # False: delta*IDF only for query terms present in the document.
    # True: flat delta * sum of IDF over all query terms (nonzero even without overlap).
    flat_delta: bool = False

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError("k1 must be positive")
        if not 0 <= self.b <= 1:
            raise ValueError("b must lie in [0, 1]")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")


@dataclass(frozen=True)
class SimilarityFeatures:
    cosine: float
    bm25p: float
    rouge_l: float

    def as_array(self) -> np.ndarray:
        return np.array([self.cosine, self.bm25p, self.rouge_l])


def cosine(q: BowVector, d: BowVector) -> float:
    if q.norm == 0 or d.norm == 0:
        return 0.0
    return q.dot(d) / (q.norm * d.norm)


def weighted_cosine(q: BowVector, d: BowVector, theta: np.ndarray) -> float:
    """((q * d) . theta) / (|q| |d|); can exceed 1 for large weights."""
    if q.norm == 0 or d.norm == 0:
        return 0.0
    common, iq, idd = np.intersect1d(q.indices, d.indices, assume_unique=True, return_indices=True)
    return float((q.values[iq] * d.values[idd]) @ np.asarray(theta)[common]) / (q.norm * d.norm)


def idf(n_t, N):
    """Nonnegative IDF: ln((N - n + 0.5) / (n + 0.5) + 1)."""
    return np.log((N - n_t + 0.5) / (n_t + 0.5) + 1.0)


def bm25_plus(q_ids: Sequence[int], d: BowVector, d_len: int, stats: CorpusStats,
              cfg: Bm25Config = Bm25Config()) -> float:
    """BM25+ score of a document for a query given as vocabulary ids.

    Every query position counts, so a repeated query term contributes once per
    occurrence. ``d`` holds raw counts; ``d_len`` is the document length in
    tokens.
    """
    if not len(q_ids) or stats.avgdl <= 0:
        return 0.0
    counts = d.entries
    norm = cfg.k1 * (1.0 - cfg.b + cfg.b * d_len / stats.avgdl)
    score = 0.0
    for t in q_ids:
        w = float(idf(stats.doc_freq[t], stats.N))
        f = counts.get(t, 0.0)
        if f > 0:
            score += w * f * (cfg.k1 + 1.0) / (f + norm) + cfg.delta * w
        elif cfg.flat_delta:
            score += cfg.delta * w
    return score


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Longest common subsequence length by the classic O(|a||b|) table."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def _f_measure(lcs, len_q, len_d):
    if lcs == 0 or len_q == 0 or len_d == 0:
        return 0.0
    r = lcs / len_q
    p = lcs / len_d
    return 2 * r * p / (r + p)


def rouge_l(q_tokens: Sequence[str], d_tokens: Sequence[str]) -> float:
    """ROUGE-L F-measure with beta = 1 (symmetric in its arguments)."""
    return _f_measure(lcs_length(q_tokens, d_tokens), len(q_tokens), len(d_tokens))


def pad_ids(docs: Sequence[Sequence[int]]) -> np.ndarray:
    """Right-pad integer id sequences with -1 into an (n, max_len) matrix."""
    n = len(docs)
    L = max((len(d) for d in docs), default=0)
    pad = np.full((n, L), -1, dtype=np.int64)
    for i, d in enumerate(docs):
        pad[i, : len(d)] = d
    return pad


def lcs_lengths_batch(query: Sequence[int], docs) -> np.ndarray:
    """LCS of one query against many documents at once.

    ``docs`` is a list of id sequences or a matrix from :func:`pad_ids`.
    Tokens absent from the query cannot be part of a common subsequence, so
    each document is first compressed to its query-matching tokens (in
    order); the table is then filled column by column over all documents.
    """
    pad = docs if isinstance(docs, np.ndarray) else pad_ids(docs)
    n = pad.shape[0]
    out = np.zeros(n, dtype=np.int64)
    if n == 0 or len(query) == 0 or pad.shape[1] == 0:
        return out
    q = np.asarray(query, dtype=np.int64)
    hit = np.isin(pad, q)  # padding (-1) never occurs in a query
    cnt = hit.sum(axis=1)
    rows = np.flatnonzero(cnt)
    if not len(rows):
        return out
    cnt = cnt[rows]
    L = int(cnt.max())
    order = np.argsort(~hit[rows], axis=1, kind="stable")[:, :L]
    comp = np.take_along_axis(pad[rows], order, axis=1)
    comp[np.arange(L)[None, :] >= cnt[:, None]] = -1
    eq = comp[:, :, None] == q[None, None, :]  # rows x L x |q|
    prev = np.zeros((len(rows), len(q) + 1), dtype=np.int32)
    for j in range(L):
        cur = np.zeros_like(prev)
        hitj = eq[:, j, :]
        for i in range(len(q)):
            cur[:, i + 1] = np.where(hitj[:, i], prev[:, i] + 1, np.maximum(prev[:, i + 1], cur[:, i]))
        prev = cur
    out[rows] = prev[:, -1]
    return out


def rouge_l_batch(query: Sequence[int], docs, doc_lens=None) -> np.ndarray:
    lcs = lcs_lengths_batch(query, docs).astype(np.float64)
    lq = float(len(query))
    if doc_lens is None:
        doc_lens = [len(d) for d in docs]
    ld = np.asarray(doc_lens, dtype=np.float64)
    out = np.zeros(len(lcs))
    ok = (lcs > 0) & (ld > 0) & (lq > 0)
    r = lcs[ok] / lq
    p = lcs[ok] / ld[ok]
    out[ok] = 2 * r * p / (r + p)
    return out


def features(q_tokens: Sequence[str], q_vec: BowVector, d_tokens: Sequence[str], d_vec: BowVector,
             vocab: Vocabulary, stats: CorpusStats, cfg: Bm25Config = Bm25Config()) -> SimilarityFeatures:
    """phi(r, q) for one query/document pair; cosine uses raw counts."""
    return SimilarityFeatures(
        cosine(q_vec, d_vec),
        bm25_plus(vocab.ids(q_tokens), d_vec, len(d_tokens), stats, cfg),
        rouge_l(q_tokens, d_tokens),
    )


def token_ids_all(tokens: Sequence[str], vocab: Vocabulary, oov: dict, grow: bool = True) -> list[int]:
    """Integer ids for LCS: in-vocabulary tokens keep their position, OOV
    tokens get stable negative ids from ``oov`` (below -1, which is padding).

    With ``grow=False`` the table is left untouched; unseen tokens get ids
    that cannot collide with any document token.
    """
    out, local = [], {}
    for t in tokens:
        i = vocab.index.get(t)
        if i is None:
            i = oov.get(t)
            if i is None:
                if grow:
                    i = oov.setdefault(t, -2 - len(oov))
                else:
                    i = local.setdefault(t, -2 - len(oov) - len(local))
        out.append(i)
    return out


def features_batch(q_tokens: Sequence[str], q_vec: BowVector, doc_ids,
                   doc_lens: np.ndarray, doc_counts, doc_norms: np.ndarray,
                   vocab: Vocabulary, stats: CorpusStats, cfg: Bm25Config, oov: dict) -> np.ndarray:
    """phi for one query against many documents; returns an (n, 3) array.

    ``doc_counts`` is a CSR matrix of raw counts (n x F) and ``doc_ids`` the
    LCS id sequences from :func:`token_ids_all` sharing the ``oov`` table
    (a list, or already padded by :func:`pad_ids`). ``doc_lens`` must equal
    the id sequence lengths.
    """
    n = doc_counts.shape[0]
    out = np.zeros((n, N_FEATURES))
    if n == 0:
        return out
    if q_vec.norm > 0:
        dots = doc_counts[:, q_vec.indices] @ q_vec.values
        nz = doc_norms > 0
        out[nz, 0] = dots[nz] / (doc_norms[nz] * q_vec.norm)
    qids = vocab.ids(q_tokens)
    if qids and stats.avgdl > 0:
        f = doc_counts[:, qids].toarray()
        w = idf(stats.doc_freq[qids].astype(np.float64), stats.N)
        norm = cfg.k1 * (1.0 - cfg.b + cfg.b * doc_lens / stats.avgdl)
        present = f > 0
        sat = np.where(present, f * (cfg.k1 + 1.0) / (f + norm[:, None]), 0.0)
        bonus = cfg.delta * (np.ones_like(f) if cfg.flat_delta else present)
        out[:, 1] = ((sat + bonus) * w).sum(axis=1)
    # ROUGE-L compares the full token streams, OOV included
    q_all = token_ids_all(q_tokens, vocab, oov, grow=False)
    out[:, 2] = rouge_l_batch(q_all, doc_ids, doc_lens)
    return out
