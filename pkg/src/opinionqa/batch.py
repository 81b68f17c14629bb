"""Vectorized question sets: every (question, product sentence) pair of a
collection of questions laid out in flat arrays, grouped by question.

Pairs of one question are contiguous, so per-question softmax and
log-sum-exp reduce to ``reduceat`` calls over segment starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, log_expit

from .model import (PairBlock, ParamLayout, RelevanceParams, VoteParams, segment_logsumexp,
                    segment_starts)
from .simfeat import Bm25Config, features_batch, pad_ids, token_ids_all
from .textproc import CorpusStats, Vocabulary, bow_matrix, tokenize, vectorize


@dataclass
class DocTable:
    """Sentence documents of the products in play, grouped per product."""

    rows: dict  # product_id -> np.ndarray of row ids
    counts: sp.csr_matrix
    normed: sp.csr_matrix
    norms: np.ndarray
    lengths: np.ndarray
    lcs_ids: list
    oov: dict
    lcs_pad: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.lcs_pad = pad_ids(self.lcs_ids)

    @classmethod
    def build(cls, corpus, product_ids, vocab: Vocabulary, source="review") -> "DocTable":
        rows, docs = {}, []
        for pid in dict.fromkeys(product_ids):
            group = corpus.product_docs(pid, source)
            rows[pid] = np.arange(len(docs), len(docs) + len(group))
            docs.extend(group)
        vecs = [vectorize(d.tokens, vocab) for d in docs]
        oov: dict = {}
        return cls(rows, bow_matrix(vecs, vocab.F), bow_matrix(vecs, vocab.F, normalize=True),
                   np.array([v.norm for v in vecs]), np.array([len(d.tokens) for d in docs], dtype=np.float64),
                   [token_ids_all(d.tokens, vocab, oov) for d in docs], oov)

    def features(self, tokens, vec, pid, vocab, stats, bm25) -> np.ndarray:
        r = self.rows[pid]
        return features_batch(tokens, vec, self.lcs_pad[r], self.lengths[r], self.counts[r],
                              self.norms[r], vocab, stats, bm25, self.oov)


def encode_texts(texts, vocab: Vocabulary) -> tuple[list, sp.csr_matrix]:
    toks = [tokenize(t) for t in texts]
    return toks, bow_matrix([vectorize(t, vocab) for t in toks], vocab.F, normalize=True)


class QuestionSet:
    """Questions paired with every sentence of their product."""

    def __init__(self, records, corpus, vocab: Vocabulary, stats: CorpusStats, bm25: Bm25Config = Bm25Config(),
                 source="review", docs: DocTable | None = None):
        if not records:
            raise ValueError("empty question set")
        self.records = list(records)
        self.vocab = vocab
        self.docs = docs or DocTable.build(corpus, [r.product_id for r in self.records], vocab, source)
        self.q_tokens, self.q_mat = encode_texts([r.question for r in self.records], vocab)
        pair_q, pair_r, feats = [], [], []
        for i, rec in enumerate(self.records):
            rows = self.docs.rows.get(rec.product_id)
            if rows is None or not len(rows):
                raise ValueError(f"question {i} has no documents for product {rec.product_id!r}")
            pair_q.append(np.full(len(rows), i))
            pair_r.append(rows)
            feats.append(self.docs.features(self.q_tokens[i], vectorize(self.q_tokens[i], vocab),
                                            rec.product_id, vocab, stats, bm25))
        self.pair_q = np.concatenate(pair_q)
        self.pair_r = np.concatenate(pair_r)
        self.feats = np.vstack(feats)
        self.sizes = np.bincount(self.pair_q, minlength=len(self.records))
        self.starts = segment_starts(self.sizes)
        self.block = PairBlock(self.q_mat[self.pair_q], self.docs.normed[self.pair_r])

    def __len__(self) -> int:
        return len(self.records)

    def relevance(self, rel: RelevanceParams):
        s, cache = self.block.forward(rel.vartheta, rel.A, rel.B)
        return self.feats @ rel.theta + s, cache

    def lhs_block(self, lhs_mat: sp.csr_matrix) -> PairBlock:
        """Pairs (lhs row of the pair's question, sentence) for per-question
        left-hand vectors such as true answers."""
        return PairBlock(lhs_mat[self.pair_q], self.docs.normed[self.pair_r])

    def candidate_triples(self, J: int):
        """Index arrays for J candidates per question, ordered (question,
        candidate, sentence): the pair index and the candidate row ``t*J + j``."""
        trip_pair, trip_row = [], []
        for t in range(len(self)):
            pairs = np.arange(self.starts[t], self.starts[t] + self.sizes[t])
            trip_pair.append(np.tile(pairs, J))
            trip_row.append(np.repeat(t * J + np.arange(J), self.sizes[t]))
        return np.concatenate(trip_pair), np.concatenate(trip_row)


def binary_probs(qs: QuestionSet, rel: RelevanceParams, vot: VoteParams) -> np.ndarray:
    """p(yes | q) for every question of the set."""
    s, _ = qs.relevance(rel)
    v, _ = qs.block.forward(vot.vartheta_p, vot.X, vot.Y)
    seg = qs.pair_q
    lse_s = segment_logsumexp(s, qs.starts, seg)
    w = np.exp(s - lse_s[seg])
    return 0.5 + np.add.reduceat(w * (expit(v) - 0.5), qs.starts)


def candidate_prefs(qs: QuestionSet, s: np.ndarray, v_true: np.ndarray, v_cand_fn, J: int) -> np.ndarray:
    """p(a > c | q) for J candidates per question, shape (n, J).

    ``v_cand_fn(trip_pair, trip_row)`` returns candidate votes per triple.
    """
    trip_pair, trip_row = qs.candidate_triples(J)
    d = v_true[trip_pair] - v_cand_fn(trip_pair, trip_row)
    lse_s = segment_logsumexp(s, qs.starts, qs.pair_q)
    sizes = np.repeat(qs.sizes, J)
    gstarts = segment_starts(sizes)
    gseg = np.repeat(np.arange(len(sizes)), sizes)
    lse_t = segment_logsumexp(s[trip_pair] + log_expit(d), gstarts, gseg)
    return np.exp(lse_t - np.repeat(lse_s, J)).reshape(len(qs), J)


class BinaryObjective:
    """Negative log-likelihood of yes/no labels plus (l2/2)||x||^2."""

    def __init__(self, qs: QuestionSet, labels, layout: ParamLayout, l2: float):
        self.qs = qs
        self.layout = layout
        self.l2 = float(l2)
        y = np.array([1.0 if lab == "yes" else -1.0 for lab in labels])
        if len(y) != len(qs):
            raise ValueError("one label per question required")
        self.sign = y[qs.pair_q]

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        qs, seg, starts = self.qs, self.qs.pair_q, self.qs.starts
        rel, vot = self.layout.unpack(x)
        s, cs = qs.relevance(rel)
        v, cv = qs.block.forward(vot.vartheta_p, vot.X, vot.Y)
        u = self.sign * v
        t = s + log_expit(u)
        lse_s = segment_logsumexp(s, starts, seg)
        lse_t = segment_logsumexp(t, starts, seg)
        loss = -float(np.sum(lse_t - lse_s)) + 0.5 * self.l2 * float(x @ x)

        w = np.exp(s - lse_s[seg])
        rho = np.exp(t - lse_t[seg])
        gs = w - rho
        gv = self.sign * (-rho * expit(-u))
        d_vt, d_A, d_B = qs.block.backward(gs, cs)
        d_vp, d_X, d_Y = qs.block.backward(gv, cv)
        grad = self.layout.pack(RelevanceParams(qs.feats.T @ gs, d_vt, d_A, d_B), VoteParams(d_vp, d_X, d_Y))
        return loss, grad + self.l2 * x


class OpenEndedObjective:
    """Pairwise logistic loss -sum log p(a > abar | q) over sampled
    non-answers, plus (l2/2)||x||^2.

    ``answers`` holds the true answer row per question; ``negatives`` has
    ``J`` rows per question, row ``t*J + j`` being the j-th non-answer of
    question t. All rows L2-normalized.
    """

    def __init__(self, qs: QuestionSet, answers: sp.csr_matrix, negatives: sp.csr_matrix, J: int,
                 layout: ParamLayout, l2: float):
        if J < 1:
            raise ValueError("need at least one non-answer per question")
        if answers.shape[0] != len(qs) or negatives.shape[0] != len(qs) * J:
            raise ValueError("answer/non-answer rows do not match the question set")
        self.qs, self.J, self.layout, self.l2 = qs, J, layout, float(l2)
        self.true_block = qs.lhs_block(answers)
        self.trip_pair, trip_row = qs.candidate_triples(J)
        self.neg_block = PairBlock(negatives[trip_row], qs.docs.normed[qs.pair_r[self.trip_pair]])
        sizes = np.repeat(qs.sizes, J)
        self.gstarts = segment_starts(sizes)
        self.gseg = np.repeat(np.arange(len(sizes)), sizes)

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        qs, J = self.qs, self.J
        rel, vot = self.layout.unpack(x)
        s, cs = qs.relevance(rel)
        vt, ct = self.true_block.forward(vot.vartheta_p, vot.X, vot.Y)
        vn, cn = self.neg_block.forward(vot.vartheta_p, vot.X, vot.Y)
        tp = self.trip_pair
        d = vt[tp] - vn
        tt = s[tp] + log_expit(d)
        lse_s = segment_logsumexp(s, qs.starts, qs.pair_q)
        lse_t = segment_logsumexp(tt, self.gstarts, self.gseg)
        loss = -float(np.sum(lse_t) - J * np.sum(lse_s)) + 0.5 * self.l2 * float(x @ x)

        w = np.exp(s - lse_s[qs.pair_q])
        rho = np.exp(tt - lse_t[self.gseg])
        gs = J * w - np.bincount(tp, weights=rho, minlength=len(s))
        gd = -rho * expit(-d)
        gvt = np.bincount(tp, weights=gd, minlength=len(s))
        d_vt, d_A, d_B = qs.block.backward(gs, cs)
        t_vp, t_X, t_Y = self.true_block.backward(gvt, ct)
        n_vp, n_X, n_Y = self.neg_block.backward(-gd, cn)
        grad = self.layout.pack(RelevanceParams(qs.feats.T @ gs, d_vt, d_A, d_B),
                                VoteParams(t_vp + n_vp, t_X + n_X, t_Y + n_Y))
        return loss, grad + self.l2 * x
