"""Mixture-of-experts scoring: relevance, votes, answer probabilities.

Every review sentence is an expert. Its weight for a question is a softmax
over the relevance scores of the product's sentences, and it votes through a
logistic function. Both scores share one shape::

    phi . theta  +  (u * w) . diag  +  (u P) . (w Q)

where ``u``, ``w`` are L2-normalized bag-of-words vectors, ``diag`` is the
diagonal of the interaction matrix and ``P``, ``Q`` its rank-K factors. The
F x F interaction matrix itself is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .simfeat import N_FEATURES, Bm25Config
from .textproc import BowVector, CorpusStats, Vocabulary

BINARY = "binary"
OPEN_ENDED = "open_ended"
MODES = (BINARY, OPEN_ENDED)


class ModelError(ValueError):
    """Dimension mismatches and other contract violations."""


@dataclass(frozen=True)
class ModelConfig:
    K: int = 5
    F: int = 5000
    l2: float = 1e-3
    seed: int = 0
    mode: str = BINARY

    def __post_init__(self):
        if self.K < 1 or self.F < 1:
            raise ModelError("K and F must be >= 1")
        if self.l2 < 0:
            raise ModelError("l2 must be nonnegative")
        if self.mode not in MODES:
            raise ModelError(f"mode must be one of {MODES}")


@dataclass
class RelevanceParams:
    theta: np.ndarray
    vartheta: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        F, K = self.A.shape
        if self.theta.shape != (N_FEATURES,) or self.vartheta.shape != (F,) or self.B.shape != (F, K):
            raise ModelError(f"inconsistent relevance parameter shapes for F={F}, K={K}")

    @classmethod
    def zeros(cls, F: int, K: int) -> "RelevanceParams":
        return cls(np.zeros(N_FEATURES), np.zeros(F), np.zeros((F, K)), np.zeros((F, K)))

    def dense(self) -> np.ndarray:
        """diag(vartheta) + A B^T. Only for tests on small F."""
        return np.diag(self.vartheta) + self.A @ self.B.T


@dataclass
class VoteParams:
    vartheta_p: np.ndarray
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        F, K = self.X.shape
        if self.vartheta_p.shape != (F,) or self.Y.shape != (F, K):
            raise ModelError(f"inconsistent vote parameter shapes for F={F}, K={K}")

    @classmethod
    def zeros(cls, F: int, K: int) -> "VoteParams":
        return cls(np.zeros(F), np.zeros((F, K)), np.zeros((F, K)))

    def dense(self) -> np.ndarray:
        return np.diag(self.vartheta_p) + self.X @ self.Y.T


# -- flat parameter vector ---------------------------------------------------

@dataclass(frozen=True)
class ParamLayout:
    """Offsets of theta, vartheta, A, B, vartheta', X, Y in one flat vector."""

    F: int
    K: int

    @property
    def size(self) -> int:
        return N_FEATURES + 2 * self.F + 4 * self.F * self.K

    def slices(self) -> dict[str, slice]:
        F, FK = self.F, self.F * self.K
        out, start = {}, 0
        for name, n in (("theta", N_FEATURES), ("vartheta", F), ("A", FK), ("B", FK),
                        ("vartheta_p", F), ("X", FK), ("Y", FK)):
            out[name] = slice(start, start + n)
            start += n
        return out

    def unpack(self, x: np.ndarray) -> tuple[RelevanceParams, VoteParams]:
        if x.shape != (self.size,):
            raise ModelError(f"expected {self.size} parameters, got {x.shape}")
        s = self.slices()
        mat = (self.F, self.K)
        rel = RelevanceParams(x[s["theta"]], x[s["vartheta"]], x[s["A"]].reshape(mat), x[s["B"]].reshape(mat))
        vot = VoteParams(x[s["vartheta_p"]], x[s["X"]].reshape(mat), x[s["Y"]].reshape(mat))
        return rel, vot

    def pack(self, rel: RelevanceParams, vot: VoteParams) -> np.ndarray:
        return np.concatenate([rel.theta, rel.vartheta, rel.A.ravel(), rel.B.ravel(),
                               vot.vartheta_p, vot.X.ravel(), vot.Y.ravel()])


# -- single-item scoring -----------------------------------------------------

def _project(v: BowVector, P: np.ndarray) -> np.ndarray:
    return v.values @ P[v.indices] if len(v) else np.zeros(P.shape[1])


def bilinear(u: BowVector, w: BowVector, diag: np.ndarray, P: np.ndarray, Q: np.ndarray) -> float:
    """(u * w) . diag + (u P) . (w Q) on L2-normalized copies of u and w."""
    F = P.shape[0]
    if diag.shape != (F,) or Q.shape != P.shape:
        raise ModelError("parameter shapes disagree")
    for v in (u, w):
        if len(v) and v.indices[-1] >= F:
            raise ModelError(f"vector index {v.indices[-1]} out of range for F={F}")
    un, wn = u.normalized(), w.normalized()
    common, iu, iw = np.intersect1d(un.indices, wn.indices, assume_unique=True, return_indices=True)
    diag_term = float((un.values[iu] * wn.values[iw]) @ diag[common]) if len(common) else 0.0
    return diag_term + float(_project(un, P) @ _project(wn, Q))


def relevance_score(q: BowVector, r: BowVector, feats, params: RelevanceParams) -> float:
    """s(q, r) = phi . theta + psi(q) (diag + A B^T) psi(r)^T."""
    phi = np.asarray(feats.as_array() if hasattr(feats, "as_array") else feats, dtype=np.float64)
    if phi.shape != (N_FEATURES,):
        raise ModelError(f"expected {N_FEATURES} similarity features, got {phi.shape}")
    return float(phi @ params.theta) + bilinear(q, r, params.vartheta, params.A, params.B)


def vote(lhs: BowVector, r: BowVector, params: VoteParams) -> float:
    """v(lhs, r); lhs is the question (binary) or a candidate answer (open-ended)."""
    return bilinear(lhs, r, params.vartheta_p, params.X, params.Y)


def softmax(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ModelError("softmax over an empty review set")
    e = np.exp(s - s.max())
    return e / e.sum()


def relevance_distribution(q: BowVector, reviews: Sequence[BowVector], feats, params: RelevanceParams) -> np.ndarray:
    """p(r | q) over one product's sentences; ``feats`` has one row per review."""
    if not len(reviews):
        raise ModelError("relevance over an empty review set")
    return softmax([relevance_score(q, r, f, params) for r, f in zip(reviews, np.asarray(feats))])


def mixture_prob(w: np.ndarray, v: np.ndarray) -> float:
    """sum_r w_r sigma(v_r), written as 1/2 + sum_r w_r (sigma(v_r) - 1/2) so
    that all-zero votes give exactly 1/2 even when sum(w) is off by an ulp."""
    return float(0.5 + w @ (expit(v) - 0.5))


def binary_answer_prob(q: BowVector, reviews: Sequence[BowVector], feats,
                       relevance: RelevanceParams, votes: VoteParams) -> float:
    """p(yes | q) = sum_r p(r|q) sigma(v(q, r))."""
    w = relevance_distribution(q, reviews, feats, relevance)
    v = np.array([vote(q, r, votes) for r in reviews])
    return mixture_prob(w, v)


def pairwise_answer_pref(a: BowVector, abar: BowVector, q: BowVector, reviews: Sequence[BowVector], feats,
                         relevance: RelevanceParams, votes: VoteParams) -> float:
    """p(a > abar | q) = sum_r p(r|q) sigma(v(a, r) - v(abar, r))."""
    w = relevance_distribution(q, reviews, feats, relevance)
    d = np.array([vote(a, r, votes) - vote(abar, r, votes) for r in reviews])
    return mixture_prob(w, d)


# -- vectorized pair scoring -------------------------------------------------

class PairBlock:
    """Bilinear scores for many (left, right) vector pairs at once.

    ``left`` and ``right`` are CSR matrices whose i-th rows form the i-th pair
    (rows already L2-normalized). The Hadamard rows are precomputed so the
    diagonal term is a single sparse mat-vec.
    """

    def __init__(self, left: sp.csr_matrix, right: sp.csr_matrix):
        if left.shape != right.shape:
            raise ModelError("pair matrices must have equal shapes")
        self.left = left.tocsr()
        self.right = right.tocsr()
        self.hadamard = self.left.multiply(self.right).tocsr()
        self._left_t = self.left.T.tocsr()
        self._right_t = self.right.T.tocsr()
        self._hadamard_t = self.hadamard.T.tocsr()

    def __len__(self) -> int:
        return self.left.shape[0]

    def forward(self, diag, P, Q):
        lp = self.left @ P
        rq = self.right @ Q
        return self.hadamard @ diag + np.einsum("ij,ij->i", lp, rq), (lp, rq)

    def backward(self, g, cache):
        lp, rq = cache
        return self._hadamard_t @ g, self._left_t @ (g[:, None] * rq), self._right_t @ (g[:, None] * lp)


def segment_starts(sizes: np.ndarray) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)


def segment_logsumexp(x: np.ndarray, starts: np.ndarray, seg: np.ndarray) -> np.ndarray:
    m = np.maximum.reduceat(x, starts)
    return m + np.log(np.add.reduceat(np.exp(x - m[seg]), starts))


def segment_softmax(x: np.ndarray, starts: np.ndarray, seg: np.ndarray) -> np.ndarray:
    lse = segment_logsumexp(x, starts, seg)
    return np.exp(x - lse[seg])


# -- trained model and query path ------------------------------------------

MODEL_MAGIC = "OPINIONQA-MODEL v1"
CACHE_MAGIC = "OPINIONQA-CACHE v1"


@dataclass
class TrainedModel:
    config: ModelConfig
    vocab: Vocabulary
    stats: CorpusStats
    relevance: RelevanceParams
    votes: VoteParams
    bm25: Bm25Config = field(default_factory=Bm25Config)
    source: str = "review"
    variant: str = "moqa"

    @property
    def mode(self) -> str:
        return self.config.mode

    @property
    def layout(self) -> ParamLayout:
        return ParamLayout(self.vocab.F, self.config.K)

    def flat(self) -> np.ndarray:
        return self.layout.pack(self.relevance, self.votes)


def save_model(model: TrainedModel, path: str) -> None:
    from ._container import write_container

    meta = {
        "format": 1,
        "config": asdict(model.config),
        "bm25": asdict(model.bm25),
        "source": model.source,
        "variant": model.variant,
        "vocab": list(model.vocab.terms),
        "stats": {"N": model.stats.N, "avgdl": model.stats.avgdl},
    }
    r, v = model.relevance, model.votes
    write_container(path, MODEL_MAGIC, meta, {
        "doc_freq": model.stats.doc_freq.astype(np.int64),
        "theta": r.theta, "vartheta": r.vartheta, "A": r.A, "B": r.B,
        "vartheta_p": v.vartheta_p, "X": v.X, "Y": v.Y,
    })


def load_model(path: str) -> TrainedModel:
    from ._container import ContainerError, read_container

    meta, arr = read_container(path, MODEL_MAGIC)
    try:
        vocab = Vocabulary(tuple(meta["vocab"]))
        cfg = ModelConfig(**meta["config"])
        stats = CorpusStats(int(meta["stats"]["N"]), float(meta["stats"]["avgdl"]), arr["doc_freq"])
        rel = RelevanceParams(arr["theta"], arr["vartheta"], arr["A"], arr["B"])
        vot = VoteParams(arr["vartheta_p"], arr["X"], arr["Y"])
        if rel.A.shape != (vocab.F, cfg.K) or stats.doc_freq.shape != (vocab.F,):
            raise ModelError("array shapes disagree with vocabulary/config")
        return TrainedModel(cfg, vocab, stats, rel, vot, Bm25Config(**meta["bm25"]), meta["source"], meta["variant"])
    except (KeyError, TypeError, ModelError) as exc:
        raise ContainerError(f"{path}: corrupt model ({exc})") from exc


class NotFoundError(KeyError):
    pass


@dataclass
class EncodedText:
    tokens: list
    vec: BowVector


def encode(text_or_tokens, vocab: Vocabulary) -> EncodedText:
    from .textproc import tokenize, vectorize

    toks = tokenize(text_or_tokens) if isinstance(text_or_tokens, str) else list(text_or_tokens)
    return EncodedText(toks, vectorize(toks, vocab))


@dataclass
class ProjectionCache:
    """Per-sentence data precomputed for fast queries.

    ``counts`` holds raw-count rows, ``normed`` their L2-normalized copies,
    ``proj_rel`` = normed @ B and ``proj_vote`` = normed @ Y.
    """

    product_ids: list
    texts: list
    groups: dict  # product_id -> (start, stop) row range
    counts: sp.csr_matrix
    normed: sp.csr_matrix
    norms: np.ndarray
    lengths: np.ndarray
    lcs_ids: list
    oov: dict
    proj_rel: np.ndarray
    proj_vote: np.ndarray
    lcs_pad: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        from .simfeat import pad_ids
        self.lcs_pad = pad_ids(self.lcs_ids)

    def rows(self, product_id: str) -> range:
        if product_id not in self.groups:
            raise NotFoundError(product_id)
        start, stop = self.groups[product_id]
        return range(start, stop)


def build_projection_cache(docs, model: TrainedModel) -> ProjectionCache:
    """Project every sentence through B and Y once.

    ``docs`` is a sequence of ReviewDoc (or a Corpus, whose documents of the
    model's source are used). Rows are grouped by product in first-seen order
    and keep ingestion order within a product.
    """
    from .simfeat import token_ids_all
    from .textproc import bow_matrix, vectorize

    if hasattr(docs, "documents"):
        docs = docs.documents(model.source)
    order: dict = {}
    for i, d in enumerate(docs):
        order.setdefault(d.product_id, []).append(i)
    ordered = [docs[i] for idx in order.values() for i in idx]
    groups, start = {}, 0
    for pid, idx in order.items():
        groups[pid] = (start, start + len(idx))
        start += len(idx)
    vecs = [vectorize(d.tokens, model.vocab) for d in ordered]
    F = model.vocab.F
    counts = bow_matrix(vecs, F)
    normed = bow_matrix(vecs, F, normalize=True)
    oov: dict = {}
    lcs_ids = [token_ids_all(d.tokens, model.vocab, oov) for d in ordered]
    return ProjectionCache(
        product_ids=[d.product_id for d in ordered],
        texts=[d.text for d in ordered],
        groups=groups,
        counts=counts,
        normed=normed,
        norms=np.array([v.norm for v in vecs]),
        lengths=np.array([len(d.tokens) for d in ordered], dtype=np.float64),
        lcs_ids=lcs_ids,
        oov=oov,
        proj_rel=np.asarray(normed @ model.relevance.B),
        proj_vote=np.asarray(normed @ model.votes.Y),
    )


def save_cache(cache: ProjectionCache, path: str) -> None:
    from ._container import write_container

    lcs_len = np.array([len(x) for x in cache.lcs_ids], dtype=np.int64)
    flat_ids = np.concatenate([np.asarray(x, dtype=np.int64) for x in cache.lcs_ids]) if cache.lcs_ids else np.zeros(0, np.int64)
    meta = {
        "product_ids": cache.product_ids,
        "texts": cache.texts,
        "groups": {k: list(v) for k, v in cache.groups.items()},
        "oov": cache.oov,
        "F": cache.counts.shape[1],
    }
    write_container(path, CACHE_MAGIC, meta, {
        "counts_data": cache.counts.data, "counts_indices": cache.counts.indices.astype(np.int64),
        "counts_indptr": cache.counts.indptr.astype(np.int64), "normed_data": cache.normed.data,
        "norms": cache.norms, "lengths": cache.lengths, "lcs_len": lcs_len, "lcs_ids": flat_ids,
        "proj_rel": cache.proj_rel, "proj_vote": cache.proj_vote,
    })


def load_cache(path: str) -> ProjectionCache:
    from ._container import read_container

    meta, a = read_container(path, CACHE_MAGIC)
    n = len(meta["product_ids"])
    counts = sp.csr_matrix((a["counts_data"], a["counts_indices"], a["counts_indptr"]), shape=(n, meta["F"]))
    norms = a["norms"]
    normed = sp.csr_matrix((a["normed_data"], a["counts_indices"], a["counts_indptr"]), shape=(n, meta["F"]))
    bounds = np.concatenate([[0], np.cumsum(a["lcs_len"])])
    lcs_ids = [a["lcs_ids"][bounds[i]:bounds[i + 1]].tolist() for i in range(n)]
    return ProjectionCache(meta["product_ids"], meta["texts"], {k: tuple(v) for k, v in meta["groups"].items()},
                           counts, normed, norms, a["lengths"], lcs_ids, meta["oov"], a["proj_rel"], a["proj_vote"])


@dataclass
class RankedOpinion:
    rank: int
    text: str
    relevance: float  # p(r | q)
    score: float  # s(q, r)
    vote: Optional[float]  # v(q, r); binary mode only


@dataclass
class QueryResult:
    opinions: list
    p_yes: Optional[float] = None

    @property
    def verdict(self) -> Optional[str]:
        if self.p_yes is None:
            return None
        return "yes" if self.p_yes > 0.5 else "no"


def score_product(question: str, product_id: str, model: TrainedModel, cache: ProjectionCache):
    """Relevance scores s(q, r) and votes v(q, r) for every sentence of a
    product using cached projections."""
    from .simfeat import features_batch

    rows = cache.rows(product_id)
    sl = slice(rows.start, rows.stop)
    q = encode(question, model.vocab)
    qn = q.vec.normalized()
    counts = cache.counts[sl]
    feats = features_batch(q.tokens, q.vec, cache.lcs_pad[sl], cache.lengths[sl], counts, cache.norms[sl],
                           model.vocab, model.stats, model.bm25, cache.oov)
    normed = cache.normed[sl]
    rel, vot = model.relevance, model.votes
    if len(qn):
        sub = normed[:, qn.indices]
        s_diag = sub @ (qn.values * rel.vartheta[qn.indices])
        v_diag = sub @ (qn.values * vot.vartheta_p[qn.indices])
    else:
        s_diag = v_diag = np.zeros(len(rows))
    s = feats @ rel.theta + s_diag + cache.proj_rel[sl] @ _project(qn, rel.A)
    v = v_diag + cache.proj_vote[sl] @ _project(qn, vot.X)
    return np.asarray(s).ravel(), np.asarray(v).ravel()


def rank_opinions(question: str, product_id: str, model: TrainedModel, cache: ProjectionCache,
                  top_n: int = 5) -> QueryResult:
    """Product sentences sorted by relevance to ``question`` (stable on ties).

    In binary mode the result also carries p(yes | q) over all sentences.
    """
    s, v = score_product(question, product_id, model, cache)
    p = softmax(s)
    order = np.argsort(-s, kind="stable")[: max(top_n, 0)]
    start = cache.rows(product_id).start
    binary = model.mode == BINARY
    opinions = [RankedOpinion(k + 1, cache.texts[start + i], float(p[i]), float(s[i]),
                              float(v[i]) if binary else None) for k, i in enumerate(order)]
    return QueryResult(opinions, mixture_prob(p, v) if binary else None)
