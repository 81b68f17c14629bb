"""Planted-relevance corpora with known ground truth.

Each product has one review sentence per distinct *topic*. A question asks
about one topic using question-side words only, so the sentence it needs can
be found only through a cross-vocabulary map (question words to review
words). That map is rank 3: topic words carry a 3-d embedding and the hidden
score between two words is the dot product of their embeddings.

Open-ended corpora: every sentence also carries an attribute word; the true
answer repeats the planted sentence's attribute and one of its topic words.
Non-answers from other questions tend to match *other* sentences of the same
product, which is where a learned relevance function pays off.

Binary corpora: sentences carry positive, negative or no polarity words; the
label is the planted sentence's polarity. Questions whose planted sentence is
neutral get a coin-flip label and cannot be answered, so a good model should
be unsure about exactly those.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, QaRecord, ReviewDoc, Source
from .model import BINARY, OPEN_ENDED
from .textproc import tokenize

BINARY_CUES = ("is", "does", "can", "will", "are", "do", "would", "should")
OPEN_CUES = ("what", "how", "which", "where", "why", "who")


@dataclass(frozen=True)
class SynthConfig:
    n_products: int = 50
    reviews_per_product: int = 5
    n_questions: int = 1000
    test_fraction: float = 0.2
    mode: str = OPEN_ENDED
    words_per_topic: int = 5
    n_attributes: int = 12
    n_polarity_words: int = 6
    n_filler: int = 250
    p_neutral: float = 0.25
    label_noise: float = 0.0
    shuffle_answers: bool = False
    descriptions: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_products < 50 or self.reviews_per_product < 5 or self.n_questions < 200:
            raise ValueError("synthetic corpora need >= 50 products, 5 reviews/product, 200 questions")
        if self.mode not in (BINARY, OPEN_ENDED):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def n_topics(self) -> int:
        return self.reviews_per_product + 1


def topic_embeddings(n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vectors in R^3: the six signed axes first, then random directions."""
    axes = np.vstack([np.eye(3), -np.eye(3)])
    if n <= 6:
        return axes[:n]
    extra = rng.normal(size=(n - 6, 3))
    return np.vstack([axes, extra / np.linalg.norm(extra, axis=1, keepdims=True)])


@dataclass
class SyntheticCorpus:
    corpus: Corpus
    config: SynthConfig
    words: list  # hidden-map word list
    relevance_map: np.ndarray  # words x words, rank 3 on topic words
    vote_map: np.ndarray  # words x words
    planted: list  # per question: index into corpus.docs
    answerable: list = field(default_factory=list)

    def _bag(self, text: str) -> np.ndarray:
        index = {w: i for i, w in enumerate(self.words)}
        v = np.zeros(len(self.words))
        for t in tokenize(text):
            if t in index:
                v[index[t]] += 1
        n = np.linalg.norm(v)
        return v / n if n else v

    def oracle_relevance(self, question: str, docs) -> np.ndarray:
        q = self._bag(question)
        return np.array([q @ self.relevance_map @ self._bag(d.text) for d in docs])

    def oracle_vote(self, lhs: str, docs) -> np.ndarray:
        a = self._bag(lhs)
        return np.array([a @ self.vote_map @ self._bag(d.text) for d in docs])


def generate_synthetic(cfg: SynthConfig = SynthConfig()) -> SyntheticCorpus:
    rng = np.random.default_rng(cfg.seed)
    T, W = cfg.n_topics, cfg.words_per_topic
    q_words = [[f"qt{z}w{i}" for i in range(W)] for z in range(T)]
    r_words = [[f"rt{z}w{i}" for i in range(W)] for z in range(T)]
    attrs = [f"attr{c}" for c in range(cfg.n_attributes)]
    pos = [f"pos{i}" for i in range(cfg.n_polarity_words)]
    neg = [f"neg{i}" for i in range(cfg.n_polarity_words)]
    filler = [f"fill{i}" for i in range(cfg.n_filler)]
    cues = BINARY_CUES if cfg.mode == BINARY else OPEN_CUES

    words = [w for ws in q_words for w in ws] + [w for ws in r_words for w in ws] + attrs + pos + neg + list(cues)
    windex = {w: i for i, w in enumerate(words)}
    emb = topic_embeddings(T, rng)
    E_q = np.zeros((len(words), 3))
    E_r = np.zeros((len(words), 3))
    for z in range(T):
        for w in q_words[z]:
            E_q[windex[w]] = emb[z]
        for w in r_words[z]:
            E_r[windex[w]] = emb[z]
    relevance_map = E_q @ E_r.T
    vote_map = np.zeros((len(words), len(words)))
    if cfg.mode == OPEN_ENDED:
        for w in attrs + [w for ws in r_words for w in ws]:
            vote_map[windex[w], windex[w]] = 1.0
    else:
        # every question word votes through the sentence's polarity (rank 1)
        qside = np.zeros(len(words))
        for w in [w for ws in q_words for w in ws] + list(cues):
            qside[windex[w]] = 1.0
        rside = np.zeros(len(words))
        for w in pos:
            rside[windex[w]] = 1.0
        for w in neg:
            rside[windex[w]] = -1.0
        vote_map = np.outer(qside, rside)

    def fill(k):
        return list(rng.choice(filler, size=k))

    def sentence(tokens):
        tokens = list(tokens)
        rng.shuffle(tokens)
        return " ".join(tokens) + "."

    docs, meta, descs = [], [], []
    for p in range(cfg.n_products):
        pid = f"P{p:04d}"
        topics = rng.choice(T, size=cfg.reviews_per_product, replace=False)
        for z in topics:
            topic_toks = list(rng.choice(r_words[z], size=3, replace=False))
            extra, info = [], {}
            if cfg.mode == OPEN_ENDED:
                c = int(rng.integers(cfg.n_attributes))
                extra, info = [attrs[c]], {"attr": c}
            else:
                u = rng.random()
                if u < cfg.p_neutral:
                    polarity = 0
                else:
                    polarity = 1 if rng.random() < 0.5 else -1
                if polarity:
                    extra = list(rng.choice(pos if polarity > 0 else neg, size=2, replace=False))
                info = {"polarity": polarity}
            text = sentence(topic_toks + extra + fill(3))
            docs.append(ReviewDoc(pid, text, tuple(tokenize(text)), Source.REVIEW))
            meta.append({"topic": int(z), "topic_words": topic_toks, **info})
        if cfg.descriptions:
            for z in sorted(topics):
                text = sentence(list(rng.choice(r_words[z], size=2, replace=False)) + fill(4))
                descs.append(ReviewDoc(pid, text, tuple(tokenize(text)), Source.DESCRIPTION))

    by_product: dict = {}
    for i, d in enumerate(docs):
        by_product.setdefault(d.product_id, []).append(i)
    pids = list(by_product)

    qa, planted, answerable = [], [], []
    for _ in range(cfg.n_questions):
        pid = pids[int(rng.integers(len(pids)))]
        di = by_product[pid][int(rng.integers(len(by_product[pid])))]
        m = meta[di]
        question = " ".join([cues[int(rng.integers(len(cues)))]]
                            + list(rng.choice(q_words[m["topic"]], size=3, replace=False)) + fill(2)) + "?"
        if cfg.mode == OPEN_ENDED:
            answer = " ".join([m["topic_words"][int(rng.integers(3))], attrs[m["attr"]]] + fill(2))
            label, ok = None, True
        else:
            ok = m["polarity"] != 0
            yes = m["polarity"] > 0 if ok else rng.random() < 0.5
            if ok and rng.random() < cfg.label_noise:
                yes = not yes
            label = "yes" if yes else "no"
            answer = " ".join([label] + fill(3))
        qa.append(QaRecord(pid, question, answer, label))
        planted.append(di)
        answerable.append(ok)

    if cfg.shuffle_answers:
        perm = rng.permutation(len(qa))
        qa = [QaRecord(r.product_id, r.question, qa[j].answer, qa[j].binary_label) for r, j in zip(qa, perm)]

    n_test = int(round(cfg.test_fraction * len(qa)))
    n_train = len(qa) - n_test
    splits = {"train": tuple(range(n_train)), "valid": (), "test": tuple(range(n_train, len(qa)))}
    corpus = Corpus(tuple(docs + descs), tuple(qa), splits)
    return SyntheticCorpus(corpus, cfg, words, relevance_map, vote_map, planted, answerable)


YES_STARTERS = ("yes", "yep", "yeah", "definitely", "absolutely")
NO_STARTERS = ("no", "nope", "not", "unfortunately", "never")
NEUTRAL_STARTERS = ("it", "the", "i", "mine", "this")


@dataclass
class PolarityCorpus:
    corpus: Corpus
    truth: list  # clean "yes"/"no" per question (None for non yes/no questions)
    is_yesno: list


def generate_polarity_corpus(n_questions: int = 1000, noise: float = 0.05, p_open: float = 0.2,
                             p_neutral_start: float = 0.2, seed: int = 0) -> PolarityCorpus:
    """QA records whose answer polarity is carried by the first word.

    Most answers open with a polarity starter; a ``p_neutral_start`` share
    opens with a neutral word and carries polarity only through a body word
    (``good*`` or ``bad*``). The stored labels are the clean ones flipped
    with probability ``noise``. A ``p_open`` share of questions is not
    yes/no (leading wh-word) and gets no label.
    """
    rng = np.random.default_rng(seed)
    filler = [f"word{i}" for i in range(200)]
    good = [f"good{i}" for i in range(5)]
    bad = [f"bad{i}" for i in range(5)]
    docs, qa, truth, is_yesno = [], [], [], []
    for i in range(n_questions):
        pid = f"P{i % 50:04d}"
        if i < 50:
            text = " ".join(rng.choice(filler, size=5)) + "."
            docs.append(ReviewDoc(pid, text, tuple(tokenize(text)), Source.REVIEW))
        yesno = rng.random() >= p_open
        cue = BINARY_CUES if yesno else OPEN_CUES
        question = " ".join([cue[int(rng.integers(len(cue)))]] + list(rng.choice(filler, size=4))) + "?"
        yes = bool(rng.random() < 0.5)
        if rng.random() < p_neutral_start:
            start = NEUTRAL_STARTERS[int(rng.integers(len(NEUTRAL_STARTERS)))]
            body = [start, (good if yes else bad)[int(rng.integers(5))]]
        else:
            starters = YES_STARTERS if yes else NO_STARTERS
            body = [starters[int(rng.integers(len(starters)))]]
        answer = " ".join(body + list(rng.choice(filler, size=4)))
        label = None
        if yesno:
            noisy = (not yes) if rng.random() < noise else yes
            label = "yes" if noisy else "no"
        qa.append(QaRecord(pid, question, answer, label))
        truth.append(("yes" if yes else "no") if yesno else None)
        is_yesno.append(yesno)
    n = len(qa)
    splits = {"train": tuple(range(n // 2)), "valid": (), "test": tuple(range(n // 2, n))}
    return PolarityCorpus(Corpus(tuple(docs), tuple(qa), splits), truth, is_yesno)
