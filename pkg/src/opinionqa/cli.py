"""Command-line entry point: ingest, label, train, eval, query, synth."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

from . import corpus as corpus_mod
from ._container import ContainerError
from .evalharness import (BASELINES, EvalError, run_baseline, summary_table, write_results_csv)
from .labeler import LabelerConfig, LabelerError, label_corpus, seed_examples, train_polarity
from .model import (BINARY, OPEN_ENDED, ModelConfig, NotFoundError, build_projection_cache, load_cache,
                    load_model, rank_opinions, save_cache, save_model)
from .simfeat import Bm25Config
from .synthetic import SynthConfig, generate_synthetic
from .training import TrainConfig, TrainingError, train

log = logging.getLogger("opinionqa")

EXIT_UNKNOWN_PRODUCT = 2
EXIT_CORRUPT_MODEL = 3

_MODES = {"binary": BINARY, "open": OPEN_ENDED}


def cache_path(model_path: str) -> str:
    return model_path + ".cache"


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opinionqa", description="Answer product questions from review opinions.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="read JSONL reviews/QA into a corpus directory")
    s.add_argument("--reviews", required=True)
    s.add_argument("--qa", required=True)
    s.add_argument("--descriptions")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fractions", type=float, nargs=3, default=(0.8, 0.1, 0.1), metavar=("TRAIN", "VALID", "TEST"))

    s = sub.add_parser("label", help="attach high-confidence yes/no labels")
    s.add_argument("--corpus", required=True)
    s.add_argument("--keep", type=float, default=0.5)
    s.add_argument("--l2", type=float, default=1.0)
    s.add_argument("--out", help="output corpus directory (default: overwrite --corpus)")

    s = sub.add_parser("train", help="fit a model")
    s.add_argument("--mode", choices=sorted(_MODES), required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--k", type=int, default=5)
    s.add_argument("--f", type=int, default=5000)
    s.add_argument("--l2", type=float, default=1e-3)
    s.add_argument("--epochs", type=int, default=10)
    s.add_argument("--negatives", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lbfgs-history", type=int, default=10)
    s.add_argument("--max-iters", type=int, default=500)
    s.add_argument("--grad-tol", type=float, default=1e-6)
    s.add_argument("--bm25-k1", type=float, default=1.2)
    s.add_argument("--bm25-b", type=float, default=0.75)
    s.add_argument("--bm25-delta", type=float, default=1.0)
    s.add_argument("--baseline", choices=[b for b, spec in BASELINES.items() if spec.learned], default="moqa",
                   help="which parameter groups to learn")
    s.add_argument("--trace", help="training trace CSV (default: <out>.trace.csv)")

    s = sub.add_parser("eval", help="evaluate a model or baseline")
    s.add_argument("--model", help="trained model; reused when its variant matches --baseline")
    s.add_argument("--corpus", required=True)
    s.add_argument("--baseline", choices=list(BASELINES), default="moqa")
    s.add_argument("--mode", choices=sorted(_MODES), help="default: the model's mode, else open")
    s.add_argument("--split", default="test", choices=corpus_mod.SPLIT_NAMES)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--negatives", type=int, default=100)
    s.add_argument("--k", type=float, default=0.5)
    s.add_argument("--f", type=int, default=5000)
    s.add_argument("--dim", type=int, default=5, help="rank K when a baseline has to be trained")
    s.add_argument("--out", help="results CSV")

    s = sub.add_parser("query", help="rank a product's opinions for a question")
    s.add_argument("--model", required=True)
    s.add_argument("--product", required=True)
    s.add_argument("--question", help="question text (default: one question per stdin line)")
    s.add_argument("--top", type=int, default=5)
    s.add_argument("--json", action="store_true", help="emit JSON Lines")

    s = sub.add_parser("synth", help="write a planted-relevance corpus")
    s.add_argument("--products", type=int, default=50)
    s.add_argument("--reviews", type=int, default=5, help="review sentences per product")
    s.add_argument("--questions", type=int, default=200)
    s.add_argument("--mode", choices=sorted(_MODES), default="open")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    return p


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def cmd_ingest(a) -> int:
    c, report = corpus_mod.ingest(a.reviews, a.qa, a.descriptions)
    c = corpus_mod.make_splits(c, tuple(a.fractions), a.seed)
    corpus_mod.save_corpus(c, a.out)
    _err(f"skipped {report.skipped} malformed lines, dropped {report.dropped_empty} empty sentences")
    print(f"docs={len(c.docs)} questions={len(c.qa)} "
          + " ".join(f"{k}={len(c.splits[k])}" for k in corpus_mod.SPLIT_NAMES))
    return 0


def cmd_label(a) -> int:
    c = corpus_mod.load_corpus(a.corpus)
    cfg = LabelerConfig(keep_fraction=a.keep, classifier_l2=a.l2)
    pm = train_polarity(seed_examples(c.qa), cfg)
    c, report = label_corpus(c, pm, cfg)
    corpus_mod.save_corpus(c, a.out or a.corpus)
    print(f"detected={report.detected} labeled={report.labeled} skipped={report.skipped}")
    return 0


def cmd_train(a) -> int:
    c = corpus_mod.load_corpus(a.corpus)
    spec = BASELINES[a.baseline]
    model_cfg = ModelConfig(K=a.k, F=a.f)
    cfg = TrainConfig(epochs=a.epochs, negatives_per_query=a.negatives, l2=a.l2, lbfgs_history=a.lbfgs_history,
                      max_iters=a.max_iters, grad_tol=a.grad_tol, seed=a.seed)
    bm25 = Bm25Config(k1=a.bm25_k1, b=a.bm25_b, delta=a.bm25_delta)
    model, report = train(c, _MODES[a.mode], model_cfg, cfg, source=spec.source, variant=spec.variant(), bm25=bm25)
    save_model(model, a.out)
    save_cache(build_projection_cache(c, model), cache_path(a.out))
    report.write_csv(a.trace or a.out + ".trace.csv")
    print(report.summary())
    return 0


def cmd_eval(a) -> int:
    c = corpus_mod.load_corpus(a.corpus)
    spec = BASELINES[a.baseline]
    model = load_model(a.model) if a.model else None
    mode = _MODES[a.mode] if a.mode else (model.mode if model else OPEN_ENDED)
    if model is not None and (model.variant != spec.name or model.mode != mode):
        _err(f"model variant {model.variant!r} ({model.mode}) does not match {spec.name!r} ({mode}); training anew")
        model = None
    res = run_baseline(spec, c, mode, model_cfg=ModelConfig(K=a.dim, F=a.f), train_cfg=TrainConfig(seed=a.seed),
                       split=a.split, negatives=a.negatives, seed=a.seed, model=model, k=a.k)
    res.dataset = os.path.basename(os.path.normpath(a.corpus))
    if a.out:
        write_results_csv([res], a.out)
    print(summary_table([res]))
    return 0


def _format_result(question: str, result, as_json: bool) -> list[str]:
    if as_json:
        row = {"question": question,
               "opinions": [{"rank": o.rank, "relevance": o.relevance, "vote": o.vote, "text": o.text}
                            for o in result.opinions]}
        if result.p_yes is not None:
            row["response"], row["p_yes"] = result.verdict, result.p_yes
        return [json.dumps(row, ensure_ascii=False, sort_keys=True)]
    lines = []
    for o in result.opinions:
        cols = [str(o.rank), f"{o.relevance:.3f}"]
        if o.vote is not None:
            cols.append(f"{o.vote:+.3f}")
        lines.append("\t".join(cols + [o.text]))
    if result.p_yes is not None:
        lines.append(f"Response: {result.verdict} (p={result.p_yes:.3f})")
    return lines


def cmd_query(a) -> int:
    try:
        model = load_model(a.model)
        cache = load_cache(cache_path(a.model))
    except (ContainerError, OSError) as exc:
        _err(f"cannot load model: {exc}")
        return EXIT_CORRUPT_MODEL
    if a.product not in cache.groups:
        _err(f"unknown product {a.product!r}")
        return EXIT_UNKNOWN_PRODUCT
    questions = [a.question] if a.question is not None else (line.rstrip("\n") for line in sys.stdin)
    for q in questions:
        if not q.strip():
            continue
        for line in _format_result(q, rank_opinions(q, a.product, model, cache, a.top), a.json):
            print(line)
        sys.stdout.flush()
    return 0


def cmd_synth(a) -> int:
    cfg = SynthConfig(n_products=a.products, reviews_per_product=a.reviews, n_questions=a.questions,
                      mode=_MODES[a.mode], seed=a.seed)
    syn = generate_synthetic(cfg)
    corpus_mod.save_corpus(syn.corpus, a.out)
    print(f"docs={len(syn.corpus.docs)} questions={len(syn.corpus.qa)}")
    return 0


COMMANDS = {"ingest": cmd_ingest, "label": cmd_label, "train": cmd_train, "eval": cmd_eval,
            "query": cmd_query, "synth": cmd_synth}


def main(argv: Optional[Sequence[str]] = None) -> int:
    a = parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[a.command](a)
    except (corpus_mod.CorpusError, LabelerError, TrainingError, EvalError, ValueError, OSError) as exc:
        _err(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
