"""Question/answer/review corpus: ingestion, sentence splitting, splits, persistence.

On-disk layout of a corpus directory::

    reviews.jsonl        {"product_id": str, "text": str}
    descriptions.jsonl   same schema (optional)
    qa.jsonl             {"product_id", "question", "answer", "label"?}
    splits.json          {"train": [...], "valid": [...], "test": [...]}

Review and description lines hold whole texts; they are split into
sentence-level documents on load.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .textproc import tokenize

log = logging.getLogger(__name__)

REVIEWS_FILE = "reviews.jsonl"
DESCRIPTIONS_FILE = "descriptions.jsonl"
QA_FILE = "qa.jsonl"
SPLITS_FILE = "splits.json"

SPLIT_NAMES = ("train", "valid", "test")

# a sentence ends after . ! or ? when followed by whitespace or end of text
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


class CorpusError(ValueError):
    """Raised for empty corpora, bad splits and other unusable input."""


class Source(str, Enum):
    REVIEW = "review"
    DESCRIPTION = "description"


@dataclass(frozen=True)
class ReviewDoc:
    product_id: str
    text: str
    tokens: tuple[str, ...]
    source: Source = Source.REVIEW


@dataclass(frozen=True)
class QaRecord:
    product_id: str
    question: str
    answer: str
    binary_label: Optional[str] = None  # "yes" | "no"

    def to_json(self) -> dict:
        d = {"product_id": self.product_id, "question": self.question, "answer": self.answer}
        if self.binary_label is not None:
            d["label"] = self.binary_label
        return d


@dataclass
class IngestReport:
    docs: int = 0
    qa: int = 0
    skipped: int = 0
    dropped_empty: int = 0


@dataclass(frozen=True)
class Corpus:
    """Immutable corpus. ``docs`` keeps ingestion order, which is the
    tie-breaking order used by rankings."""

    docs: tuple[ReviewDoc, ...]
    qa: tuple[QaRecord, ...]
    splits: dict = field(default_factory=dict)
    _groups: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        groups: dict = {}
        for i, d in enumerate(self.docs):
            groups.setdefault((d.source, d.product_id), []).append(i)
        object.__setattr__(self, "_groups", {k: tuple(v) for k, v in groups.items()})
        if not self.splits:
            object.__setattr__(self, "splits", {"train": tuple(range(len(self.qa))), "valid": (), "test": ()})

    def doc_indices(self, product_id: str, source: Source = Source.REVIEW) -> tuple[int, ...]:
        """Indices into ``docs`` for one product's documents (possibly empty)."""
        return self._groups.get((Source(source), product_id), ())

    def product_docs(self, product_id: str, source: Source = Source.REVIEW) -> list[ReviewDoc]:
        return [self.docs[i] for i in self.doc_indices(product_id, source)]

    def documents(self, source: Source = Source.REVIEW) -> list[ReviewDoc]:
        source = Source(source)
        return [d for d in self.docs if d.source == source]

    def products(self, source: Source = Source.REVIEW) -> list[str]:
        source = Source(source)
        seen = dict.fromkeys(pid for (src, pid) in self._groups if src == source)
        return list(seen)

    def has_docs(self, product_id: str, source: Source = Source.REVIEW) -> bool:
        return bool(self.doc_indices(product_id, source))

    def split(self, name: str) -> list[QaRecord]:
        return [self.qa[i] for i in self.splits[name]]

    def trainable(self, name: str, source: Source = Source.REVIEW, labeled: bool = False) -> list[QaRecord]:
        """Records of a split whose product has documents (and, optionally, a label)."""
        out = []
        for rec in self.split(name):
            if not self.has_docs(rec.product_id, source):
                continue
            if labeled and rec.binary_label is None:
                continue
            out.append(rec)
        return out

    def with_qa(self, qa: Iterable[QaRecord]) -> "Corpus":
        qa = tuple(qa)
        if len(qa) != len(self.qa):
            raise CorpusError("replacement QA list must keep record count")
        return Corpus(self.docs, qa, dict(self.splits))

    def with_splits(self, splits: dict) -> "Corpus":
        return Corpus(self.docs, self.qa, {k: tuple(v) for k, v in splits.items()})


def split_sentences(text: str) -> list[str]:
    """Split raw text after '.', '!' or '?' followed by whitespace.

    >>> split_sentences("Great. Works!")
    ['Great.', 'Works!']
    >>> split_sentences("fits my 5.8 daughter fine")
    ['fits my 5.8 daughter fine']
    """
    parts = _SENTENCE_END.split(text)
    return [p.strip() for p in parts if p.strip()]


def make_docs(product_id: str, text: str, source: Source = Source.REVIEW) -> tuple[list[ReviewDoc], int]:
    """Sentence-split one text; returns the docs and how many were dropped
    for having no tokens."""
    docs, dropped = [], 0
    for sent in split_sentences(text):
        toks = tuple(tokenize(sent))
        if not toks:
            dropped += 1
            continue
        docs.append(ReviewDoc(product_id, sent, toks, Source(source)))
    return docs, dropped


def _iter_jsonl(path: str, required: tuple[str, ...], report: IngestReport):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                log.warning("%s:%d: malformed JSON, skipped", path, lineno)
                report.skipped += 1
                continue
            if not isinstance(obj, dict) or any(not isinstance(obj.get(k), str) for k in required):
                log.warning("%s:%d: missing or non-string field, skipped", path, lineno)
                report.skipped += 1
                continue
            if not obj["product_id"]:
                report.skipped += 1
                continue
            yield obj


def read_documents(path: str, source: Source = Source.REVIEW, report: Optional[IngestReport] = None) -> list[ReviewDoc]:
    report = report if report is not None else IngestReport()
    docs: list[ReviewDoc] = []
    for obj in _iter_jsonl(path, ("product_id", "text"), report):
        new, dropped = make_docs(obj["product_id"], obj["text"], source)
        docs.extend(new)
        report.dropped_empty += dropped
    report.docs += len(docs)
    return docs


def read_qa(path: str, report: Optional[IngestReport] = None) -> list[QaRecord]:
    report = report if report is not None else IngestReport()
    out = []
    for obj in _iter_jsonl(path, ("product_id", "question", "answer"), report):
        label = obj.get("label")
        if label is not None and label not in ("yes", "no"):
            report.skipped += 1
            continue
        out.append(QaRecord(obj["product_id"], obj["question"], obj["answer"], label))
    report.qa += len(out)
    return out


def ingest(reviews: str, qa: str, descriptions: Optional[str] = None) -> tuple[Corpus, IngestReport]:
    """Load JSONL review/QA (and optional description) files into a Corpus.

    Malformed lines are counted in the report, not fatal. Raises
    ``CorpusError`` when nothing valid was read and ``OSError`` when a file
    cannot be opened.
    """
    report = IngestReport()
    docs = read_documents(reviews, Source.REVIEW, report)
    if descriptions:
        docs += read_documents(descriptions, Source.DESCRIPTION, report)
    records = read_qa(qa, report)
    if not docs and not records:
        raise CorpusError(f"no valid records in {reviews} / {qa}")
    return Corpus(tuple(docs), tuple(records)), report


def split_sizes(n: int, fractions: tuple[float, float, float]) -> list[int]:
    """Floor each share, then hand out the remainder by largest fractional part."""
    raw = [f * n for f in fractions]
    sizes = [math.floor(r + 1e-9) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def make_splits(corpus: Corpus, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> Corpus:
    """Random train/valid/test partition of the questions (not the products)."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise CorpusError(f"split fractions must be three positive numbers summing to 1, got {fractions}")
    n = len(corpus.qa)
    if n < 3:
        raise CorpusError(f"need at least 3 questions to split, have {n}")
    perm = np.random.default_rng(seed).permutation(n)
    sizes = split_sizes(n, fractions)
    splits, start = {}, 0
    for name, size in zip(SPLIT_NAMES, sizes):
        splits[name] = tuple(sorted(int(i) for i in perm[start:start + size]))
        start += size
    return corpus.with_splits(splits)


def _write_jsonl(path: str, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def save_corpus(corpus: Corpus, directory: str) -> None:
    """Persist as a corpus directory. Each sentence-document becomes one line,
    so reloading reproduces the same documents in the same order."""
    os.makedirs(directory, exist_ok=True)
    for source, name in ((Source.REVIEW, REVIEWS_FILE), (Source.DESCRIPTION, DESCRIPTIONS_FILE)):
        docs = corpus.documents(source)
        if docs or source == Source.REVIEW:
            _write_jsonl(os.path.join(directory, name), ({"product_id": d.product_id, "text": d.text} for d in docs))
    _write_jsonl(os.path.join(directory, QA_FILE), (r.to_json() for r in corpus.qa))
    with open(os.path.join(directory, SPLITS_FILE), "w", encoding="utf-8") as fh:
        json.dump({k: list(corpus.splits.get(k, ())) for k in SPLIT_NAMES}, fh)
        fh.write("\n")


def load_corpus(directory: str) -> Corpus:
    reviews = os.path.join(directory, REVIEWS_FILE)
    descriptions = os.path.join(directory, DESCRIPTIONS_FILE)
    corpus, _ = ingest(reviews, os.path.join(directory, QA_FILE),
                       descriptions if os.path.exists(descriptions) else None)
    splits_path = os.path.join(directory, SPLITS_FILE)
    if os.path.exists(splits_path):
        with open(splits_path, encoding="utf-8") as fh:
            splits = json.load(fh)
        idx = sorted(i for k in SPLIT_NAMES for i in splits.get(k, ()))
        if idx != list(range(len(corpus.qa))):
            raise CorpusError(f"{splits_path} is not a partition of the {len(corpus.qa)} questions")
        corpus = corpus.with_splits({k: splits.get(k, ()) for k in SPLIT_NAMES})
    return corpus


def relabel(corpus: Corpus, labels: dict[int, Optional[str]]) -> Corpus:
    """Copy of ``corpus`` with the given record labels replaced."""
    qa = [replace(r, binary_label=labels.get(i, r.binary_label)) for i, r in enumerate(corpus.qa)]
    return corpus.with_qa(qa)
