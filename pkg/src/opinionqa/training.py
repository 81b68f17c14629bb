"""Maximum-likelihood training of relevance and vote parameters with L-BFGS."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .batch import BinaryObjective, OpenEndedObjective, QuestionSet, encode_texts
from .corpus import Corpus
from .model import (BINARY, OPEN_ENDED, ModelConfig, ParamLayout, TrainedModel)
from .simfeat import FEATURE_NAMES, Bm25Config
from .textproc import Vocabulary, build_vocabulary, compute_stats, corpus_token_streams

log = logging.getLogger(__name__)

INIT_STDEV = 0.01


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    negatives_per_query: int = 10
    l2: float = 1e-3
    lbfgs_history: int = 10
    max_iters: int = 500
    grad_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "negatives_per_query", "lbfgs_history", "max_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.l2 < 0 or self.grad_tol <= 0:
            raise ValueError("l2 must be >= 0 and grad_tol > 0")


@dataclass(frozen=True)
class Variant:
    """Which parameter groups are learned. Frozen groups stay at zero."""

    name: str = "moqa"
    features: tuple = FEATURE_NAMES
    bilinear: bool = True
    diagonal: bool = True  # relevance diagonal (a learned, weighted cosine)

    def active_mask(self, layout: ParamLayout) -> np.ndarray:
        s = layout.slices()
        mask = np.ones(layout.size, dtype=bool)
        for i, name in enumerate(FEATURE_NAMES):
            if name not in self.features:
                mask[s["theta"].start + i] = False
        if not self.diagonal:
            mask[s["vartheta"]] = False
        if not self.bilinear:
            for k in ("A", "B", "X", "Y"):
                mask[s[k]] = False
        return mask


FULL = Variant()


@dataclass
class TrainReport:
    trace: list = field(default_factory=list)  # (round, iteration, loss, grad_norm)
    rounds: list = field(default_factory=list)  # (initial_loss, final_loss, iterations, message)
    final_grad_norm: float = float("nan")
    wall_time: float = 0.0
    param_norms: dict = field(default_factory=dict)
    n_questions: int = 0

    @property
    def initial_loss(self) -> float:
        return self.rounds[0][0]

    @property
    def final_loss(self) -> float:
        return self.rounds[-1][1]

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("round,iteration,loss,grad_norm\n")
            for r, it, loss, g in self.trace:
                fh.write(f"{r},{it},{loss!r},{g!r}\n")

    def summary(self) -> str:
        return (f"questions={self.n_questions} rounds={len(self.rounds)} "
                f"log_likelihood={-self.final_loss:.6f} (initial {-self.initial_loss:.6f}) "
                f"grad_norm={self.final_grad_norm:.3e} time={self.wall_time:.1f}s")


def init_params(layout: ParamLayout, seed: int) -> np.ndarray:
    """Zero feature weights and diagonals; N(0, 0.01^2) low-rank factors.

    Factors must not start at zero: the gradient of A is proportional to B
    (and of X to Y), so an all-zero start never moves them.
    """
    rng = np.random.default_rng(seed)
    x = np.zeros(layout.size)
    s = layout.slices()
    for k in ("A", "B", "X", "Y"):
        x[s[k]] = rng.normal(0.0, INIT_STDEV, s[k].stop - s[k].start)
    return x


def sample_non_answers(true_index: int, pool_size: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniform draws (with replacement) from ``range(pool_size)`` minus
    the true answer's own index."""
    if pool_size < 2:
        raise TrainingError("answer pool needs at least two answers to sample non-answers")
    draws = rng.integers(0, pool_size - 1, size=n)
    return draws + (draws >= true_index)


def sample_round(true_indices: Sequence[int], pool_size: int, n: int, seed: int, round_no: int) -> np.ndarray:
    """Non-answer indices for one training round, shape (len(true_indices), n)."""
    rng = np.random.default_rng([seed, round_no])
    return np.stack([sample_non_answers(t, pool_size, n, rng) for t in true_indices]) if len(true_indices) \
        else np.zeros((0, n), dtype=np.int64)


def binary_loss_and_grad(x: np.ndarray, qs: QuestionSet, labels, l2: float, K: int):
    """Loss and gradient of the labelled yes/no likelihood (see BinaryObjective)."""
    return BinaryObjective(qs, labels, ParamLayout(qs.vocab.F, K), l2)(x)


def openended_loss_and_grad(x: np.ndarray, qs: QuestionSet, answers, negatives, J: int, l2: float, K: int):
    return OpenEndedObjective(qs, answers, negatives, J, ParamLayout(qs.vocab.F, K), l2)(x)


class _Tracked:
    """Objective wrapper: restricts to the free coordinates, checks finiteness
    and remembers the gradient of the latest evaluation."""

    def __init__(self, objective, base: np.ndarray, mask: np.ndarray, round_no: int):
        self.objective, self.base, self.mask, self.round_no = objective, base, mask, round_no
        self.evals = 0
        self.last = None

    def full(self, z: np.ndarray) -> np.ndarray:
        x = self.base.copy()
        x[self.mask] = z
        return x

    def __call__(self, z):
        self.evals += 1
        loss, g = self.objective(self.full(z))
        g = g[self.mask]
        if not np.isfinite(loss) or not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite loss/gradient at evaluation {self.evals} of round {self.round_no}")
        self.last = (z.copy(), loss, g)
        return loss, g

    def grad_norm_at(self, z) -> float:
        if self.last is None or not np.array_equal(self.last[0], z):
            self(z)
        return float(np.linalg.norm(self.last[2]))


def _optimize(objective, x0: np.ndarray, mask: np.ndarray, cfg: TrainConfig, report: TrainReport,
              round_no: int) -> np.ndarray:
    tracked = _Tracked(objective, x0, mask, round_no)
    z0 = x0[mask]
    loss0, g0 = tracked(z0)
    report.trace.append((round_no, 0, loss0, float(np.linalg.norm(g0))))
    it = [0]

    def callback(intermediate_result):
        it[0] += 1
        report.trace.append((round_no, it[0], float(intermediate_result.fun),
                             tracked.grad_norm_at(intermediate_result.x)))

    res = minimize(tracked, z0, jac=True, method="L-BFGS-B", callback=callback,
                   options={"maxcor": cfg.lbfgs_history, "maxiter": cfg.max_iters, "gtol": cfg.grad_tol})
    z = res.x if res.fun <= loss0 else z0
    report.rounds.append((loss0, float(min(res.fun, loss0)), int(res.nit), str(res.message)))
    report.final_grad_norm = tracked.grad_norm_at(z)
    log.info("round %d: loss %.6g -> %.6g in %d iterations (%s)", round_no, loss0, res.fun, res.nit, res.message)
    return tracked.full(z)


def build_vocab_and_stats(corpus: Corpus, F: int, source: str = "review", split: str = "train"):
    vocab = build_vocabulary(corpus_token_streams(corpus, source, corpus.split(split)), F)
    docs = [d.tokens for d in corpus.documents(source)]
    return vocab, compute_stats(docs, vocab)


def train(corpus: Corpus, mode: str, model_cfg: ModelConfig = ModelConfig(), cfg: TrainConfig = TrainConfig(), *,
          source: str = "review", variant: Variant = FULL, bm25: Bm25Config = Bm25Config(),
          split: str = "train", vocab: Optional[Vocabulary] = None) -> tuple[TrainedModel, TrainReport]:
    """Fit a model on one split of ``corpus``.

    Binary mode uses labelled questions and a single L-BFGS run. Open-ended
    mode runs ``cfg.epochs`` rounds, each with freshly sampled non-answers and
    warm-started parameters.
    """
    if mode not in (BINARY, OPEN_ENDED):
        raise TrainingError(f"unknown mode {mode!r}")
    t0 = time.perf_counter()
    if vocab is None:
        vocab, stats = build_vocab_and_stats(corpus, model_cfg.F, source, split)
    else:
        stats = compute_stats([d.tokens for d in corpus.documents(source)], vocab)
    model_cfg = replace(model_cfg, F=vocab.F, mode=mode, l2=cfg.l2, seed=cfg.seed)
    layout = ParamLayout(vocab.F, model_cfg.K)

    records = corpus.trainable(split, source, labeled=(mode == BINARY))
    if not records:
        raise TrainingError(f"no trainable {mode} questions in split {split!r}")
    qs = QuestionSet(records, corpus, vocab, stats, bm25, source)

    mask = variant.active_mask(layout)
    x = init_params(layout, cfg.seed)
    x[~mask] = 0.0
    report = TrainReport(n_questions=len(records))

    if mode == BINARY:
        x = _optimize(BinaryObjective(qs, [r.binary_label for r in records], layout, cfg.l2), x, mask, cfg, report, 0)
    else:
        pool = [r.answer for r in corpus.split(split)]
        index = {id(r): i for i, r in enumerate(corpus.split(split))}
        true_idx = [index[id(r)] for r in records]
        _, pool_mat = encode_texts(pool, vocab)
        answers = pool_mat[true_idx]
        J = cfg.negatives_per_query
        for round_no in range(cfg.epochs):
            neg = sample_round(true_idx, len(pool), J, cfg.seed, round_no)
            objective = OpenEndedObjective(qs, answers, pool_mat[neg.ravel()], J, layout, cfg.l2)
            x = _optimize(objective, x, mask, cfg, report, round_no)

    rel, vot = layout.unpack(x.copy())
    model = TrainedModel(model_cfg, vocab, stats, rel, vot, bm25, source, variant.name)
    report.wall_time = time.perf_counter() - t0
    report.param_norms = {k: float(np.linalg.norm(x[s])) for k, s in layout.slices().items()}
    return model, report
