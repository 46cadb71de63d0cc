"""Command-line entry point: preprocess, train, evaluate, serve.

Every subcommand that writes outputs also writes a flat JSON echo of
its effective configuration next to them, so any run can be repeated
from its artifacts alone.  Exit codes: 0 success, 2 usage error,
3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import corpus as corpus_mod
from . import evaluation as eval_mod
from . import neural as neural_mod
from . import ngram as ngram_mod
from . import service as service_mod
from . import synthetic as synthetic_mod
from .errors import ConfigurationError, DataError, NumericError

log = logging.getLogger("clinkey")


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname.lower(),
                           "logger": record.name,
                           "message": record.getMessage()})


def _setup_logging(args) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if args.json_logs:
        handler.setFormatter(_JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.WARNING if args.quiet else logging.INFO)


def _write_config_echo(path: str, args: argparse.Namespace, **extra) -> None:
    payload = {
        k: v for k, v in sorted(vars(args).items())
        if k != "func" and not k.startswith("_")
    }
    payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def cmd_preprocess(args) -> int:
    raw = corpus_mod.load_corpus(args.corpus)
    if args.sample_k is not None:
        raw = corpus_mod.sample_reports(raw, args.sample_k, seed=args.seed)
        log.info("sampled %d of the corpus reports", args.sample_k)
    token_seqs = corpus_mod.normalize_and_tokenize(raw)
    total = sum(len(r) for r in token_seqs)
    if total <= args.test_size:
        raise DataError(
            f"corpus has {total} tokens after normalization; need more than "
            f"test_size={args.test_size}"
        )
    cut = total - args.test_size
    train_seqs, seen = [], 0
    for report in token_seqs:
        train_seqs.append(report[:max(0, cut - seen)])
        seen += len(report)
    train_seqs = [r for r in train_seqs if r]
    vocab = corpus_mod.build_vocabulary(train_seqs, min_count=args.min_count,
                                        size_limit=args.vocab_limit)
    train, test = corpus_mod.encode_and_split(token_seqs, vocab,
                                              test_size=args.test_size)
    os.makedirs(args.out, exist_ok=True)
    corpus_mod.save_vocabulary(vocab, os.path.join(args.out, "vocab.tsv"))
    corpus_mod.save_split(train, os.path.join(args.out, "train.txt"))
    corpus_mod.save_split(test, os.path.join(args.out, "test.txt"))
    _write_config_echo(os.path.join(args.out, "preprocess_config.json"), args,
                       vocab_size=len(vocab), train_tokens=len(train.tokens),
                       test_tokens=len(test.tokens))
    log.info("wrote vocab (%d entries) and splits (%d/%d tokens) to %s",
             len(vocab), len(train.tokens), len(test.tokens), args.out)
    return 0


def _load_splits(split_dir: str):
    vocab = corpus_mod.load_vocabulary(os.path.join(split_dir, "vocab.tsv"))
    train = corpus_mod.load_split(os.path.join(split_dir, "train.txt"), vocab)
    test_path = os.path.join(split_dir, "test.txt")
    test = corpus_mod.load_split(test_path, vocab) if os.path.exists(test_path) else None
    return vocab, train, test


def cmd_train(args) -> int:
    vocab, train_stream, _ = _load_splits(args.splits)
    if args.model == "ngram":
        if args.n == 1 and not args.unigram:
            raise ConfigurationError(
                "n=1 is a degenerate configuration; pass --unigram to allow it"
            )
        model = ngram_mod.train_ngram(train_stream, vocab, args.n,
                                      alpha=args.alpha, allow_unigram=args.unigram)
        ngram_mod.save_ngram(model, args.out)
        log.info("trained %d-gram over %d tokens -> %s", args.n,
                 len(train_stream.tokens), args.out)
    else:
        config = neural_mod.NeuralConfig(
            cell=args.model,
            embed_dim=args.embed_dim,
            hidden_dim=args.hidden_dim,
            ff_dim=args.ff_dim,
            window=args.window,
            vocab_limit=vocab.size_limit or len(vocab),
            batch_size=args.batch_size,
            max_epochs=args.max_epochs,
            patience=args.patience,
            validation_fraction=args.validation_fraction,
            adam=neural_mod.AdamConfig(lr=args.lr),
            init_seed=args.seed,
        )
        model, tlog = neural_mod.train(train_stream, vocab, config)
        neural_mod.save_neural(model, args.out)
        tlog.to_csv(args.out + ".log.csv")
        log.info("trained %s for %d epochs (best %d) -> %s", args.model,
                 len(tlog.epochs), tlog.best_epoch, args.out)
    _write_config_echo(args.out + ".config.json", args)
    return 0


def _load_model(path: str, vocab):
    try:
        with open(path, "rb") as fh:
            first_line = fh.readline().rstrip(b"\n").decode("utf-8", "replace")
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    magic = first_line.split("\t", 1)[0]
    if magic == ngram_mod.MODEL_FORMAT:
        return ngram_mod.load_ngram(path, vocab)
    if magic == neural_mod.MODEL_FORMAT:
        return neural_mod.load_neural(path, vocab)
    raise DataError(f"{path}: unrecognized model file (header {magic!r})")


def cmd_evaluate(args) -> int:
    vocab, train_stream, test_stream = _load_splits(args.splits)
    if test_stream is None:
        raise DataError(f"{args.splits}: no test.txt split to evaluate on")
    config = eval_mod.EvalConfig(
        exclude_deid=args.exclude_deid,
        oov_is_mistake=args.oov_is_mistake,
        bootstrap_resamples=args.bootstrap_resamples,
        bootstrap_seed=args.bootstrap_seed,
    )
    models = []
    for path in args.models:
        name = os.path.splitext(os.path.basename(path))[0]
        models.append((name, _load_model(path, vocab)))
    history = train_stream if args.history else None
    rows = eval_mod.benchmark_suite(models, test_stream, vocab, config,
                                    history=history)
    eval_mod.write_report_csv(rows, args.out + ".csv")
    eval_mod.write_report_json(rows, args.out + ".json")
    for name, report in rows:
        log.info("%s: acc=%.2f%%±%.2f kd=%.2f%%±%.2f (%d scored, %d excluded)",
                 name, 100 * report.accuracy, 100 * report.accuracy_std,
                 100 * report.kd, 100 * report.kd_std,
                 report.n_scored, report.n_excluded)
    if args.trace:
        eval_mod.write_trace_tsv(rows[0][1], args.trace)
    if args.sweep:
        sizes = sorted({int(s) for s in args.sweep.split(",")})
        curve = eval_mod.frequent_vocab_sweep(models[0][1], test_stream, vocab,
                                              sizes, config, history=history)
        eval_mod.write_sweep_csv(curve, args.out + ".sweep.csv")
        log.info("sweep over %s written for model %s", sizes, models[0][0])
    _write_config_echo(args.out + ".config.json", args)
    return 0


def cmd_serve(args) -> int:
    state = service_mod.ServiceState()
    vocab, _, _ = _load_splits(args.splits)
    for path in args.models:
        name = os.path.splitext(os.path.basename(path))[0]
        state.add_model(name, _load_model(path, vocab), vocab)
    if args.default_model:
        if args.default_model not in state.models:
            raise ConfigurationError(
                f"default model {args.default_model!r} not among loaded models"
            )
        state.default_model = args.default_model
    log.info("serving %d model(s) on %s:%d", len(state.models), args.host, args.port)
    try:
        service_mod.serve_forever(state, args.host, args.port, ui_dir=args.ui_dir)
    except OSError as exc:
        raise DataError(f"cannot bind {args.host}:{args.port}: {exc}") from exc
    return 0


def cmd_demo_corpus(args) -> int:
    corpus = synthetic_mod.write_demo_corpus(args.out, n_reports=args.reports,
                                             seed=args.seed)
    _write_config_echo(args.out + ".config.json", args,
                       reports=len(corpus.reports))
    log.info("wrote %d synthetic reports to %s", len(corpus.reports), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clinkey",
        description="Predictive-keyboard workbench: train and evaluate "
                    "n-gram and recurrent language models on report text, "
                    "and serve live next-word predictions.",
    )
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for all randomness (sampling, init, bootstrap)")
    parser.add_argument("--quiet", action="store_true", help="warnings only")
    parser.add_argument("--json-logs", action="store_true",
                        help="emit logs as JSON lines")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("preprocess", help="normalize, build vocab, split")
    p.add_argument("corpus", help="plain-text corpus, one report per line")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--min-count", type=int, default=10)
    p.add_argument("--vocab-limit", type=int, default=None,
                   help="keep only the most frequent N words")
    p.add_argument("--test-size", type=int, default=10_000)
    p.add_argument("--sample-k", type=int, default=None,
                   help="randomly sample this many reports first")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train an n-gram or neural model")
    p.add_argument("--splits", required=True, help="directory from preprocess")
    p.add_argument("--model", required=True, choices=["ngram", "lstm", "gru"])
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--n", type=int, default=4, help="gram order (ngram only)")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="additive smoothing constant (ngram only)")
    p.add_argument("--unigram", action="store_true",
                   help="allow the degenerate n=1 configuration")
    p.add_argument("--embed-dim", type=int, default=200)
    p.add_argument("--hidden-dim", type=int, default=50)
    p.add_argument("--ff-dim", type=int, default=100)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--max-epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--validation-fraction", type=float, default=0.10)
    p.add_argument("--lr", type=float, default=0.001)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score models on the test split")
    p.add_argument("models", nargs="+", help="model files")
    p.add_argument("--splits", required=True)
    p.add_argument("--out", required=True,
                   help="report base path (.csv/.json appended)")
    p.add_argument("--sweep", default=None,
                   help="comma-separated frequent-vocabulary sizes")
    p.add_argument("--trace", default=None,
                   help="per-position TSV trace for the first model")
    p.add_argument("--bootstrap-resamples", type=int, default=1000)
    p.add_argument("--bootstrap-seed", type=int, default=0)
    p.add_argument("--exclude-deid", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--oov-is-mistake", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--history", action=argparse.BooleanOptionalAction,
                   default=True,
                   help="let contexts reach back into the training split")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="serve predictions over HTTP")
    p.add_argument("models", nargs="+", help="model files")
    p.add_argument("--splits", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8376)
    p.add_argument("--default-model", default=None)
    p.add_argument("--ui-dir", default=None,
                   help="also serve this static directory at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("demo-corpus", help="write a synthetic demo corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--reports", type=int, default=3500)
    p.set_defaults(func=cmd_demo_corpus)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        log.error("%s", exc)
        return 2
    except DataError as exc:
        log.error("%s", exc)
        return 3
    except NumericError as exc:
        log.error("%s", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
