"""Next-word prediction scoring: micro-accuracy and keystroke discount.

Each test position is predicted from its preceding context (reaching
back into the training stream when the test stream opens mid-report).
A position whose gold token is the de-identification marker is
excluded.  Keystroke discount charges one acceptance keystroke for a
correctly predicted word and the word's full character length
otherwise:

    kd = 1 - sum(dsc_i) / sum(len(gold_i)),   dsc_i = 1 if correct else len(gold_i)

so kd is 0 when nothing is predicted correctly.  Character lengths
come from the original surface strings, not the encoded ids, so an
out-of-vocabulary word is still charged its real length.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .corpus import Vocabulary, TokenStream
from .errors import ConfigurationError, DataError


@dataclass(frozen=True)
class EvalConfig:
    exclude_deid: bool = True
    oov_is_mistake: bool = True
    bootstrap_resamples: int = 1000
    bootstrap_seed: int = 0

    def __post_init__(self):
        if self.bootstrap_resamples < 1:
            raise ConfigurationError("bootstrap_resamples must be >= 1")


@dataclass(frozen=True)
class PositionOutcome:
    position: int
    gold: str
    predicted: str
    correct: bool
    excluded_reason: str | None = None


@dataclass
class EvalReport:
    accuracy: float
    accuracy_std: float
    kd: float
    kd_std: float
    n_scored: int
    n_excluded: int
    per_position_outcomes: list[PositionOutcome] = field(default_factory=list)


@dataclass(frozen=True)
class SweepPoint:
    size: int
    saved: int
    baseline: int


@dataclass
class SweepCurve:
    points: list[SweepPoint] = field(default_factory=list)


def _merge_with_history(test: TokenStream, history: TokenStream | None):
    """Concatenate history and test tokens; report starts are merged so a
    test stream opening mid-report keeps its true report start from the
    history rather than the synthetic one."""
    if history is None:
        return test.tokens, list(test.report_starts), 0
    offset = len(history.tokens)
    tokens = list(history.tokens) + list(test.tokens)
    starts = list(history.report_starts)
    test_starts = test.report_starts[1:] if test.leading_partial else test.report_starts
    starts.extend(s + offset for s in test_starts)
    return tokens, starts, offset


def _score_positions(
    predictor,
    test: TokenStream,
    vocab: Vocabulary,
    config: EvalConfig,
    history: TokenStream | None = None,
) -> list[PositionOutcome]:
    if not test.tokens:
        raise DataError("test stream is empty")
    tokens, starts, offset = _merge_with_history(test, history)
    surfaces = test.surfaces or vocab.decode(test.tokens)
    oov_id = vocab.oov_id
    deid_id = vocab.deid_id

    outcomes = []
    for i, gold_id in enumerate(test.tokens):
        gold = surfaces[i]
        if config.exclude_deid and gold_id == deid_id:
            outcomes.append(PositionOutcome(i, gold, "", False, "deid"))
            continue
        g = offset + i
        report_start = starts[bisect_right(starts, g) - 1]
        context = tokens[report_start:g]
        try:
            preds = predictor.predict_next(context, 1)
        except Exception as exc:
            raise DataError(f"predictor failed at test position {i}: {exc}") from exc
        if not preds:
            raise DataError(f"predictor returned no candidates at test position {i}")
        pred_id = preds[0].token_id
        predicted = vocab.id_to_token[pred_id]
        if config.oov_is_mistake:
            correct = pred_id == gold_id and pred_id != oov_id and gold_id != oov_id
        else:
            correct = pred_id == gold_id
        outcomes.append(PositionOutcome(i, gold, predicted, correct))
    return outcomes


def _bootstrap_stds(correct: np.ndarray, lengths: np.ndarray,
                    config: EvalConfig) -> tuple[float, float]:
    n = len(correct)
    resamples = config.bootstrap_resamples
    if resamples < 2:
        return 0.0, 0.0
    rng = np.random.default_rng(config.bootstrap_seed)
    dsc = np.where(correct, 1, lengths)
    acc_samples = np.empty(resamples)
    kd_samples = np.empty(resamples)
    for r in range(resamples):
        idx = rng.integers(0, n, size=n)
        acc_samples[r] = correct[idx].mean()
        kd_samples[r] = 1.0 - dsc[idx].sum() / lengths[idx].sum()
    return float(acc_samples.std(ddof=1)), float(kd_samples.std(ddof=1))


def evaluate(
    predictor,
    test: TokenStream,
    vocab: Vocabulary,
    config: EvalConfig = EvalConfig(),
    history: TokenStream | None = None,
) -> EvalReport:
    """Score a predictor over every test position with one guess each."""
    outcomes = _score_positions(predictor, test, vocab, config, history)
    scored = [o for o in outcomes if o.excluded_reason is None]
    if not scored:
        raise DataError("every test position was excluded; nothing to score")
    correct = np.array([o.correct for o in scored], dtype=bool)
    lengths = np.array([len(o.gold) for o in scored], dtype=np.int64)
    dsc = np.where(correct, 1, lengths)
    accuracy = correct.sum() / len(scored)
    kd = 1.0 - dsc.sum() / lengths.sum()
    acc_std, kd_std = _bootstrap_stds(correct, lengths, config)
    return EvalReport(
        accuracy=float(accuracy),
        accuracy_std=acc_std,
        kd=float(kd),
        kd_std=kd_std,
        n_scored=len(scored),
        n_excluded=len(outcomes) - len(scored),
        per_position_outcomes=outcomes,
    )


def frequent_vocab_sweep(
    predictor,
    test: TokenStream,
    vocab: Vocabulary,
    sizes: list[int],
    config: EvalConfig = EvalConfig(),
    history: TokenStream | None = None,
) -> SweepCurve:
    """Keystrokes saved when suggestions are shown only for frequent words.

    For each set size, a prediction counts only if it is correct and
    falls inside the top-``size`` most frequent vocabulary words; the
    baseline is the keystroke mass of the scored gold words inside
    that set.
    """
    if not sizes:
        raise ConfigurationError("sizes must be non-empty")
    for a, b in zip(sizes, sizes[1:]):
        if b <= a:
            raise ConfigurationError("sizes must be strictly increasing")
    if sizes[0] < 1:
        raise ConfigurationError("sizes must be >= 1")
    if sizes[-1] > len(vocab):
        raise ConfigurationError(
            f"size {sizes[-1]} exceeds vocabulary of {len(vocab)}"
        )
    outcomes = _score_positions(predictor, test, vocab, config, history)
    scored = [o for o in outcomes if o.excluded_reason is None]
    order = vocab.frequency_order()
    points = []
    for size in sizes:
        wordset = set(order[:size])
        saved = sum(len(o.gold) - 1 for o in scored if o.correct and o.predicted in wordset)
        baseline = sum(len(o.gold) for o in scored if o.gold in wordset)
        points.append(SweepPoint(size=size, saved=saved, baseline=baseline))
    return SweepCurve(points=points)


def benchmark_suite(
    models: list[tuple[str, object]],
    test: TokenStream,
    vocab: Vocabulary,
    config: EvalConfig = EvalConfig(),
    history: TokenStream | None = None,
) -> list[tuple[str, EvalReport]]:
    """One EvalReport row per named model, all sharing one vocabulary."""
    for name, predictor in models:
        if predictor.vocab_checksum != vocab.checksum:
            raise DataError(
                f"model {name!r} was trained against a different vocabulary"
            )
    return [
        (name, evaluate(predictor, test, vocab, config, history))
        for name, predictor in models
    ]


def write_report_csv(rows: list[tuple[str, EvalReport]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("model,accuracy,accuracy_std,kd,kd_std,n_scored,n_excluded\n")
        for name, r in rows:
            fh.write(
                f"{name},{r.accuracy:.6f},{r.accuracy_std:.6f},"
                f"{r.kd:.6f},{r.kd_std:.6f},{r.n_scored},{r.n_excluded}\n"
            )


def write_report_json(rows: list[tuple[str, EvalReport]], path: str) -> None:
    payload = [
        {
            "model": name,
            "accuracy": r.accuracy,
            "accuracy_std": r.accuracy_std,
            "kd": r.kd,
            "kd_std": r.kd_std,
            "n_scored": r.n_scored,
            "n_excluded": r.n_excluded,
        }
        for name, r in rows
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sweep_csv(curve: SweepCurve, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("size,saved,baseline\n")
        for p in curve.points:
            fh.write(f"{p.size},{p.saved},{p.baseline}\n")


def write_trace_tsv(report: EvalReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("position\tgold\tpredicted\tcorrect\texcluded_reason\n")
        for o in report.per_position_outcomes:
            fh.write(
                f"{o.position}\t{o.gold}\t{o.predicted}\t"
                f"{int(o.correct)}\t{o.excluded_reason or ''}\n"
            )
