"""Command-line front end: ``plsa {train,topics,perplexity,generate}``."""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from . import corpus as corpus_io
from .em import (
    TrainConfig,
    doc_topic_view,
    fold_in_corpus,
    log_likelihood,
    mixture_log_likelihood,
    train,
)
from .errors import PLSAError, ValidationError
from .model import BackgroundMixture, Formulation, load_model, save_model
from .synthetic import PlantedModel, sample_corpus

log = logging.getLogger("plsa")


def cmd_train(args) -> int:
    form = Formulation.parse(args.formulation)
    if form.is_background and args.lambda_b is None:
        raise ValidationError(f"--formulation {form.cli_name} requires --lambda-b")
    if not form.is_background and args.lambda_b is not None:
        raise ValidationError("--lambda-b only applies to bg-f1 and bg-f2")
    corpus, _ = corpus_io.load_uci(args.input, args.vocab)
    config = TrainConfig(
        n_topics=args.topics,
        formulation=form,
        max_iters=args.max_iters,
        rel_tol=args.tol,
        seed=args.seed,
        lambda_b=args.lambda_b,
        reseat_dead_topics=args.reseat_dead_topics,
    )
    model, trace = train(corpus, config)
    save_model(model, args.out)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="\n") as f:
            f.write(trace.to_csv())
    print(f"final log-likelihood: {trace.records[-1].loglik:.17g}")
    return 0


def top_terms(phi_row, k):
    """Indices of the k largest entries; ties go to the lower term id."""
    order = np.argsort(-np.asarray(phi_row), kind="stable")
    return order[:k]


def cmd_topics(args) -> int:
    model = load_model(args.model)
    vocab = None
    if args.vocab:
        with open(args.vocab, "rb") as f:
            vocab = corpus_io.parse_vocab(f, model.V)
    k = args.top
    if k < 1:
        raise ValidationError("--top must be >= 1")
    if k > model.V:
        log.warning("--top %d exceeds vocabulary size %d; clamping", k, model.V)
        k = model.V
    for t, row in enumerate(model.phi):
        terms = []
        for w in top_terms(row, k).tolist():
            name = vocab[w] if vocab else str(w)
            terms.append(f"{name}:{row[w]:.6g}")
        print(f"topic {t}: " + " ".join(terms))
    return 0


def cmd_perplexity(args) -> int:
    model = load_model(args.model)
    corpus, _ = corpus_io.load_uci(args.input, args.vocab)
    if corpus.n_terms != model.V:
        raise ValidationError(f"vocabulary size mismatch: corpus V={corpus.n_terms}, model V={model.V}")
    lam, bg = 0.0, None
    if isinstance(model, BackgroundMixture):
        lam, bg = model.lambda_b, model.p_w_bg
    if args.no_fold_in:
        if corpus.n_docs != model.D:
            raise ValidationError(
                f"--no-fold-in scores the training documents: corpus D={corpus.n_docs}, model D={model.D}"
            )
        if args.include_doc_prior:
            ll = log_likelihood(corpus, model)
        else:
            phi, theta = doc_topic_view(model)
            ll = mixture_log_likelihood(corpus, phi, theta, lam, bg)
    else:
        if args.include_doc_prior:
            raise ValidationError("--include-doc-prior needs --no-fold-in; folded-in documents have no P(d)")
        theta = fold_in_corpus(model.phi, corpus, args.fold_in_iters, args.seed, lam, bg)
        ll = mixture_log_likelihood(corpus, model.phi, theta, lam, bg)
    print(f"{math.exp(-ll / corpus.total_tokens):.17g}")
    return 0


def cmd_generate(args) -> int:
    phi = np.loadtxt(args.phi, ndmin=2)
    theta = np.loadtxt(args.theta, ndmin=2)
    lengths = np.loadtxt(args.doc_lengths, ndmin=1)
    planted = PlantedModel(phi, theta, lengths)
    corpus = sample_corpus(planted, args.seed)
    corpus_io.write_uci(corpus, args.out, vocab_path=args.vocab_out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plsa", description="PLSA topic models fitted by EM")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model to a UCI bag-of-words corpus")
    p.add_argument("--input", required=True, help="docword file")
    p.add_argument("--vocab", required=True, help="vocabulary file")
    p.add_argument("--topics", type=int, required=True)
    p.add_argument("--formulation", default="modern",
                   choices=[f.cli_name for f in Formulation])
    p.add_argument("--lambda-b", type=float, default=None, help="background weight (bg-* only)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6, help="relative log-likelihood change to stop at")
    p.add_argument("--reseat-dead-topics", action="store_true",
                   help="reset dead topics to uniform instead of failing")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--trace", help="write iteration,loglik CSV here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("topics", help="print the top terms of every topic")
    p.add_argument("--model", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--vocab", help="vocabulary file for term names")
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("perplexity", help="per-token perplexity of a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--fold-in-iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=0, help="fold-in initialization seed")
    p.add_argument("--no-fold-in", action="store_true",
                   help="score the training documents with the model's own P(z|d)")
    p.add_argument("--include-doc-prior", action="store_true",
                   help="use the formulation's full likelihood including P(d) (with --no-fold-in)")
    p.set_defaults(func=cmd_perplexity)

    p = sub.add_parser("generate", help="sample a corpus from planted parameters")
    p.add_argument("--phi", required=True, help="T x V whitespace-separated matrix")
    p.add_argument("--theta", required=True, help="D x T whitespace-separated matrix")
    p.add_argument("--doc-lengths", required=True, help="D integers")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="docword file to write")
    p.add_argument("--vocab-out", help="also write a placeholder vocabulary")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (PLSAError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
