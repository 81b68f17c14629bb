"""Accuracy, accuracy@k and AUC evaluation, plus baseline ablations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .batch import DocTable, QuestionSet, binary_probs, candidate_prefs, encode_texts
from .corpus import Corpus
from .model import BINARY, OPEN_ENDED, ModelConfig, PairBlock, TrainedModel, softmax
from .simfeat import FEATURE_NAMES
from .textproc import tokenize, vectorize
from .training import TrainConfig, Variant, build_vocab_and_stats, train

DECILES = tuple(round(0.1 * i, 1) for i in range(1, 11))
TIE_TOL = 1e-12


class EvalError(ValueError):
    pass


class UnsupportedModeError(EvalError):
    pass


@dataclass
class EvalResult:
    metric: str
    value: float
    n: int
    curve: dict = field(default_factory=dict)  # k -> accuracy@k (binary only)
    baseline: str = ""
    dataset: str = ""
    meta: dict = field(default_factory=dict)


# -- metrics -----------------------------------------------------------------

def _correct(p: np.ndarray, labels: Sequence[str]) -> np.ndarray:
    y = np.array([lab == "yes" for lab in labels])
    return (y & (p > 0.5)) | (~y & (p < 0.5))


def accuracy(p, labels) -> float:
    """Fraction classified correctly; p = 1/2 always counts as wrong."""
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        raise EvalError("accuracy of an empty question set")
    return float(_correct(p, labels).mean())


def top_k_count(k: float, n: int) -> int:
    if not 0 < k <= 1:
        raise EvalError("k must lie in (0, 1]")
    return max(1, math.ceil(k * n - 1e-9))


def accuracy_at_k(p, labels, k: float) -> float:
    """Accuracy over the ceil(k n) most confident questions, confidence being
    |1/2 - p|; equal confidences keep question order."""
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        raise EvalError("accuracy of an empty question set")
    m = top_k_count(k, len(p))
    keep = np.argsort(-np.abs(0.5 - p), kind="stable")[:m]
    return float(_correct(p[keep], [labels[i] for i in keep]).mean())


def confidence_curve(p, labels, ks=DECILES) -> dict:
    return {k: accuracy_at_k(p, labels, k) for k in ks}


def auc_from_scores(true_score: float, others) -> float:
    """Fraction of non-answers scored strictly below the true answer; exact
    ties earn half credit."""
    others = np.asarray(others, dtype=np.float64)
    if others.size == 0:
        raise EvalError("AUC needs at least one non-answer")
    return float(np.mean((true_score > others) + 0.5 * (true_score == others)))


def auc_from_prefs(prefs) -> float:
    """Per-question AUC from pairwise preferences p(a > c | q); a preference
    within 1e-12 of 1/2 is a tie."""
    prefs = np.asarray(prefs, dtype=np.float64)
    if prefs.size == 0:
        raise EvalError("AUC needs at least one non-answer")
    tie = np.abs(prefs - 0.5) <= TIE_TOL
    return float(np.mean(np.where(tie, 0.5, prefs > 0.5)))


def binomial_interval(n: int, p: float = 0.5, z: float = 2.5758293035489004) -> tuple[float, float]:
    """Normal-approximation interval for a proportion (99% by default)."""
    half = z * math.sqrt(p * (1 - p) / n)
    return p - half, p + half


# -- candidate pools ---------------------------------------------------------

def sample_candidates(corpus: Corpus, question_ids: Sequence[int], n: int, seed: int) -> np.ndarray:
    """``n`` non-answer indices per question, uniform over every other
    record's answer (with replacement)."""
    pool = len(corpus.qa)
    if pool < 2:
        raise EvalError("need at least two answers for a candidate pool")
    rng = np.random.default_rng([seed, 7919])
    out = np.empty((len(question_ids), n), dtype=np.int64)
    for row, qi in enumerate(question_ids):
        draws = rng.integers(0, pool - 1, size=n)
        out[row] = draws + (draws >= qi)
    return out


def _eval_ids(corpus: Corpus, split: str, source: str, labeled: bool) -> list[int]:
    out = []
    for i in corpus.splits[split]:
        rec = corpus.qa[i]
        if corpus.has_docs(rec.product_id, source) and (not labeled or rec.binary_label is not None):
            out.append(i)
    if not out:
        raise EvalError(f"no evaluable questions in split {split!r}")
    return out


# -- model evaluation --------------------------------------------------------

def predict_binary(model: TrainedModel, corpus: Corpus, ids: Sequence[int]) -> np.ndarray:
    qs = QuestionSet([corpus.qa[i] for i in ids], corpus, model.vocab, model.stats, model.bm25, model.source)
    return binary_probs(qs, model.relevance, model.votes)


def evaluate_binary(model: TrainedModel, corpus: Corpus, split: str = "test", k: float = 0.5) -> EvalResult:
    if model.mode != BINARY:
        raise UnsupportedModeError("binary evaluation needs a binary model")
    ids = _eval_ids(corpus, split, model.source, labeled=True)
    p = predict_binary(model, corpus, ids)
    labels = [corpus.qa[i].binary_label for i in ids]
    curve = confidence_curve(p, labels)
    return EvalResult(f"accuracy@{k:g}", accuracy_at_k(p, labels, k), len(ids), curve,
                      meta={"accuracy": accuracy(p, labels)})


def model_prefs(model: TrainedModel, corpus: Corpus, ids: Sequence[int], cand: np.ndarray) -> np.ndarray:
    """p(a > c | q) for each question and each candidate answer index."""
    qs = QuestionSet([corpus.qa[i] for i in ids], corpus, model.vocab, model.stats, model.bm25, model.source)
    vocab, rel, vot = model.vocab, model.relevance, model.votes
    J = cand.shape[1]
    _, true_mat = encode_texts([corpus.qa[i].answer for i in ids], vocab)
    _, cand_mat = encode_texts([corpus.qa[j].answer for j in cand.ravel()], vocab)
    s, _ = qs.relevance(rel)
    v_true, _ = qs.lhs_block(true_mat).forward(vot.vartheta_p, vot.X, vot.Y)

    def v_cand(trip_pair, trip_row):
        block = PairBlock(cand_mat[trip_row], qs.docs.normed[qs.pair_r[trip_pair]])
        return block.forward(vot.vartheta_p, vot.X, vot.Y)[0]

    return candidate_prefs(qs, s, v_true, v_cand, J)


def evaluate_open(model: TrainedModel, corpus: Corpus, split: str = "test", negatives: int = 100,
                  seed: int = 0) -> EvalResult:
    if model.mode != OPEN_ENDED:
        raise UnsupportedModeError("AUC evaluation needs an open-ended model")
    ids = _eval_ids(corpus, split, model.source, labeled=False)
    cand = sample_candidates(corpus, ids, negatives, seed)
    prefs = model_prefs(model, corpus, ids, cand)
    aucs = np.array([auc_from_prefs(row) for row in prefs])
    return EvalResult("auc", float(aucs.mean()), len(ids), meta={"negatives": negatives, "pool": "sampled"})


# -- baselines ---------------------------------------------------------------

@dataclass(frozen=True)
class BaselineSpec:
    name: str
    features: tuple = ()
    learned: bool = False
    bilinear: bool = False
    source: str = "review"

    def __post_init__(self):
        if self.name != "rand" and not self.features:
            raise ValueError("a baseline needs at least one feature")

    def variant(self) -> Variant:
        return Variant(self.name, tuple(f for f in FEATURE_NAMES if f in self.features), self.bilinear,
                       diagonal=self.bilinear or "cosine" in self.features)


_ALL = FEATURE_NAMES
BASELINES = {
    "rand": BaselineSpec("rand"),
    "c": BaselineSpec("c", ("cosine",)),
    "o": BaselineSpec("o", ("bm25p",)),
    "r": BaselineSpec("r", ("rouge_l",)),
    "c-L": BaselineSpec("c-L", ("cosine",), learned=True),
    "o-L": BaselineSpec("o-L", ("bm25p",), learned=True),
    "r-L": BaselineSpec("r-L", ("rouge_l",), learned=True),
    "ro-L": BaselineSpec("ro-L", ("rouge_l", "bm25p"), learned=True),
    "cro-L": BaselineSpec("cro-L", _ALL, learned=True),
    "moqa": BaselineSpec("moqa", _ALL, learned=True, bilinear=True),
    "mdqa": BaselineSpec("mdqa", _ALL, learned=True, bilinear=True, source="description"),
}


def _rand_eval(corpus: Corpus, mode: str, split: str, negatives: int, seed: int) -> EvalResult:
    rng = np.random.default_rng([seed, 104729])
    if mode == BINARY:
        ids = _eval_ids(corpus, split, "review", labeled=True)
        p = rng.random(len(ids))
        labels = [corpus.qa[i].binary_label for i in ids]
        return EvalResult("accuracy@0.5", accuracy_at_k(p, labels, 0.5), len(ids), confidence_curve(p, labels),
                          meta={"accuracy": accuracy(p, labels)})
    ids = _eval_ids(corpus, split, "review", labeled=False)
    aucs = [auc_from_scores(rng.random(), rng.random(negatives)) for _ in ids]
    return EvalResult("auc", float(np.mean(aucs)), len(ids), meta={"negatives": negatives})


def _raw_feature_eval(spec: BaselineSpec, corpus: Corpus, split: str, negatives: int, seed: int,
                      F: int) -> EvalResult:
    """Non-learning ranking: relevance p(r|q) is a softmax over the raw
    measure m(q, r) and each sentence votes for answer a with m(a, r)."""
    vocab, stats = build_vocab_and_stats(corpus, F, spec.source)
    ids = _eval_ids(corpus, split, spec.source, labeled=False)
    cand = sample_candidates(corpus, ids, negatives, seed)
    table = DocTable.build(corpus, [corpus.qa[i].product_id for i in ids], vocab, spec.source)
    cols = [FEATURE_NAMES.index(f) for f in spec.features]
    from .simfeat import Bm25Config
    bm25 = Bm25Config()

    def measure(text, pid):
        toks = tokenize(text)
        return table.features(toks, vectorize(toks, vocab), pid, vocab, stats, bm25)[:, cols].sum(axis=1)

    aucs = []
    for row, qi in enumerate(ids):
        rec = corpus.qa[qi]
        w = softmax(measure(rec.question, rec.product_id))
        va = measure(rec.answer, rec.product_id)
        prefs = [w @ expit(va - measure(corpus.qa[j].answer, rec.product_id)) for j in cand[row]]
        aucs.append(auc_from_prefs(prefs))
    return EvalResult("auc", float(np.mean(aucs)), len(ids), meta={"negatives": negatives})


def run_baseline(spec: BaselineSpec, corpus: Corpus, mode: str, *, model_cfg: ModelConfig = ModelConfig(),
                 train_cfg: TrainConfig = TrainConfig(), split: str = "test", negatives: int = 100, seed: int = 0,
                 model: Optional[TrainedModel] = None, k: float = 0.5) -> EvalResult:
    """Evaluate one baseline on ``split``; learned variants train on "train".

    A pre-trained ``model`` may be passed for learned variants to skip training.
    """
    if spec.name == "rand":
        res = _rand_eval(corpus, mode, split, negatives, seed)
    elif not spec.learned:
        if mode == BINARY:
            raise UnsupportedModeError(f"{spec.name} has no learned vote and cannot answer yes/no questions")
        res = _raw_feature_eval(spec, corpus, split, negatives, seed, model_cfg.F)
    else:
        if model is None:
            model, _ = train(corpus, mode, model_cfg, train_cfg, source=spec.source, variant=spec.variant())
        res = evaluate_binary(model, corpus, split, k) if mode == BINARY else \
            evaluate_open(model, corpus, split, negatives, seed)
    res.baseline = spec.name
    return res


def write_results_csv(results: Sequence[EvalResult], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "baseline", "dataset", "value", "n"])
        for r in results:
            w.writerow([r.metric, r.baseline, r.dataset, repr(r.value), r.n])
            for k, v in r.curve.items():
                if f"accuracy@{k:g}" == r.metric:
                    continue
                w.writerow([f"accuracy@{k:g}", r.baseline, r.dataset, repr(v), r.n])


def summary_table(results: Sequence[EvalResult]) -> str:
    lines = [f"{'baseline':<10} {'metric':<14} {'value':>8} {'n':>6}"]
    for r in results:
        lines.append(f"{r.baseline:<10} {r.metric:<14} {r.value:>8.4f} {r.n:>6}")
    return "\n".join(lines)
