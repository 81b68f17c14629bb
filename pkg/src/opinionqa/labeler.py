"""High-precision yes/no labels for question/answer pairs.

A question counts as yes/no when its first token is a be/modal/auxiliary
verb. Answers are classified by an L2-regularized logistic model over
unigrams plus a separate one-hot block for the first word. Only the most
confident fraction of detected questions receives a label.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.special import log_expit

from .corpus import Corpus, QaRecord
from .textproc import BowVector, Vocabulary, build_vocabulary, tokenize, vectorize

DEFAULT_VERBS = frozenset({
    "is", "are", "was", "were", "am", "do", "does", "did", "can", "could", "will", "would",
    "should", "shall", "may", "might", "must", "has", "have", "had",
})


class LabelerError(ValueError):
    pass


@dataclass(frozen=True)
class LabelerConfig:
    leading_verb_set: frozenset = DEFAULT_VERBS
    keep_fraction: float = 0.5
    classifier_l2: float = 1.0
    vocab_size: int = 5000

    def __post_init__(self):
        if not self.leading_verb_set:
            raise LabelerError("leading verb set must not be empty")
        if not 0 < self.keep_fraction <= 1:
            raise LabelerError("keep_fraction must lie in (0, 1]")


def detect_yesno_question(question: str, cfg: LabelerConfig = LabelerConfig()) -> bool:
    toks = tokenize(question)
    return bool(toks) and toks[0] in cfg.leading_verb_set


def polarity_features(answer: str, vocab: Vocabulary) -> tuple[BowVector, Optional[str]]:
    """Unigram counts over ``vocab`` and the answer's first token (if any)."""
    toks = tokenize(answer)
    return vectorize(toks, vocab), (toks[0] if toks else None)


@dataclass
class PolarityModel:
    vocab: Vocabulary
    first_words: dict  # token -> column in the first-word block
    weights: np.ndarray  # unigram weights (F) then first-word weights
    bias: float

    def design(self, answers: Sequence[str]) -> sp.csr_matrix:
        F = self.vocab.F
        rows, cols, vals = [], [], []
        for i, a in enumerate(answers):
            bow, first = polarity_features(a, self.vocab)
            if bow.norm:
                rows.extend([i] * len(bow))
                cols.extend(bow.indices.tolist())
                vals.extend((bow.values / bow.norm).tolist())
            if first in self.first_words:
                rows.append(i)
                cols.append(F + self.first_words[first])
                vals.append(1.0)
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(answers), F + len(self.first_words)))

    def decision(self, answers: Sequence[str]) -> np.ndarray:
        """Signed score; positive means "yes", magnitude is the confidence."""
        return self.design(answers) @ self.weights + self.bias


def train_polarity(examples: Iterable[tuple[str, str]], cfg: LabelerConfig = LabelerConfig()) -> PolarityModel:
    """Fit the answer classifier on (answer text, "yes"|"no") pairs.

    Deterministic: the logistic loss is convex and L-BFGS starts from zero.
    """
    examples = list(examples)
    counts = Counter(lab for _, lab in examples)
    if set(counts) - {"yes", "no"}:
        raise LabelerError(f"labels must be yes/no, got {sorted(counts)}")
    if counts["yes"] < 2 or counts["no"] < 2:
        raise LabelerError(f"need at least two examples of each class, got {dict(counts)}")
    texts = [a for a, _ in examples]
    toks = [tokenize(a) for a in texts]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # small answer sets routinely have fewer terms than vocab_size
        vocab = build_vocabulary(toks, cfg.vocab_size)
    firsts = sorted({t[0] for t in toks if t})
    model = PolarityModel(vocab, {w: i for i, w in enumerate(firsts)}, np.zeros(0), 0.0)
    X = model.design(texts)
    y = np.array([1.0 if lab == "yes" else -1.0 for _, lab in examples])
    l2 = cfg.classifier_l2

    def loss(wb):
        w, b = wb[:-1], wb[-1]
        m = y * (X @ w + b)
        g_m = -y * np.exp(log_expit(-m))
        return -log_expit(m).sum() + 0.5 * l2 * w @ w, np.append(X.T @ g_m + l2 * w, g_m.sum())

    res = minimize(loss, np.zeros(X.shape[1] + 1), jac=True, method="L-BFGS-B", options={"maxiter": 1000})
    model.weights, model.bias = res.x[:-1], float(res.x[-1])
    return model


@dataclass
class LabelReport:
    detected: int = 0
    labeled: int = 0
    skipped: int = 0
    labels: dict = field(default_factory=dict)


def label_corpus(corpus: Corpus, model: PolarityModel, cfg: LabelerConfig = LabelerConfig()) -> tuple[Corpus, LabelReport]:
    """Label the confident yes/no questions and clear every other label.

    Among detected questions, the ceil(keep_fraction * n) with the largest
    |decision| are labeled by its sign; ties keep corpus order.
    """
    detected = [i for i, r in enumerate(corpus.qa) if detect_yesno_question(r.question, cfg)]
    report = LabelReport(detected=len(detected), skipped=len(corpus.qa) - len(detected))
    labels: dict = {i: None for i in range(len(corpus.qa))}
    if detected:
        scores = model.decision([corpus.qa[i].answer for i in detected])
        m = max(1, math.ceil(cfg.keep_fraction * len(detected) - 1e-9))
        keep = np.argsort(-np.abs(scores), kind="stable")[:m]
        for j in keep:
            labels[detected[j]] = "yes" if scores[j] > 0 else "no"
        report.labeled = len(keep)
    report.labels = {i: lab for i, lab in labels.items() if lab is not None}
    qa = [QaRecord(r.product_id, r.question, r.answer, labels[i]) for i, r in enumerate(corpus.qa)]
    return corpus.with_qa(qa), report


def seed_examples(records: Sequence[QaRecord]) -> list[tuple[str, str]]:
    """Training pairs for the answer classifier.

    Existing labels are used when both classes have at least two; otherwise
    answers opening with a bare "yes"/"no" serve as weak labels.
    """
    given = [(r.answer, r.binary_label) for r in records if r.binary_label in ("yes", "no")]
    c = Counter(lab for _, lab in given)
    if c["yes"] >= 2 and c["no"] >= 2:
        return given
    weak = []
    for r in records:
        toks = tokenize(r.answer)
        if toks and toks[0] in ("yes", "no"):
            weak.append((r.answer, toks[0]))
    return weak
