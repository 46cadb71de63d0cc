"""N-gram language models with Laplace smoothing.

Counts are tallied per report, with the context left-padded by
begin-of-report tokens, so the first words of a report are trained
and predictable like any other position.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Vocabulary, TokenStream
from .errors import ConfigurationError, DataError

MODEL_FORMAT = "clinkey-ngram-v1"

MIN_ORDER = 2
MAX_ORDER = 10


@dataclass(frozen=True)
class Prediction:
    token_id: int
    probability: float
    rank: int


@dataclass
class NgramModel:
    """Context -> successor count tables for a fixed gram order.

    ``prob`` applies add-alpha smoothing over the full vocabulary, so
    every token has positive probability in every context and an
    entirely unseen context falls back to the uniform 1/V.
    """

    n: int
    vocab: Vocabulary
    alpha: float = 1.0
    successor_counts: dict[tuple[int, ...], dict[int, int]] = field(default_factory=dict)
    context_counts: dict[tuple[int, ...], int] = field(default_factory=dict)
    unigram_counts: list[int] = field(default_factory=list)
    _fallback_order: list[int] = field(init=False, repr=False, default_factory=list)

    def __post_init__(self):
        if not self.unigram_counts:
            self.unigram_counts = [0] * len(self.vocab)
        self._rebuild_order()

    def _rebuild_order(self):
        # Global ranking used for ties and unseen contexts: by unigram
        # training count, then token string; begin-of-report excluded.
        bos = self.vocab.bos_id
        ids = [i for i in range(len(self.vocab)) if i != bos]
        ids.sort(key=lambda i: (-self.unigram_counts[i], self.vocab.id_to_token[i]))
        self._fallback_order = ids
        self._tie_key = {
            tok_id: pos for pos, tok_id in enumerate(self._fallback_order)
        }

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def vocab_checksum(self) -> str:
        return self.vocab.checksum

    def _check_ids(self, ids) -> None:
        v = len(self.vocab)
        for i in ids:
            if not 0 <= i < v:
                raise ConfigurationError(f"token id {i} outside vocabulary of size {v}")

    def prob(self, context: list[int], w: int) -> float:
        """Laplace-smoothed P(w | context); context must be n-1 ids."""
        if len(context) != self.n - 1:
            raise ConfigurationError(
                f"context must have {self.n - 1} tokens, got {len(context)}"
            )
        self._check_ids(context)
        self._check_ids([w])
        ctx = tuple(context)
        total = self.context_counts.get(ctx, 0)
        count = self.successor_counts.get(ctx, {}).get(w, 0)
        return (count + self.alpha) / (total + self.alpha * len(self.vocab))

    def _pad(self, context: list[int]) -> list[int]:
        need = self.n - 1
        if len(context) >= need:
            return list(context[len(context) - need:])
        return [self.vocab.bos_id] * (need - len(context)) + list(context)

    def predict_next(self, context: list[int], k: int = 1) -> list[Prediction]:
        """Top-k next tokens; context is padded/truncated to n-1 ids.

        Ties are broken by higher unigram training count, then by
        token string; begin-of-report is never a candidate.
        """
        if k < 1:
            raise ConfigurationError(f"k must be >= 1, got {k}")
        self._check_ids(context)
        ctx = tuple(self._pad(context))
        total = self.context_counts.get(ctx, 0)
        denom = total + self.alpha * len(self.vocab)
        successors = self.successor_counts.get(ctx, {})

        bos = self.vocab.bos_id
        ranked = sorted(
            (i for i in successors if i != bos),
            key=lambda i: (-successors[i], self._tie_key[i]),
        )
        # Unseen successors all share probability alpha/denom, below any
        # seen successor, so the precomputed global order finishes the list.
        if len(ranked) < k:
            seen = set(ranked)
            for i in self._fallback_order:
                if i not in seen:
                    ranked.append(i)
                    if len(ranked) >= k:
                        break
        out = []
        for rank, tok_id in enumerate(ranked[:k], start=1):
            p = (successors.get(tok_id, 0) + self.alpha) / denom
            out.append(Prediction(token_id=tok_id, probability=p, rank=rank))
        return out


def train_ngram(
    train: TokenStream,
    vocab: Vocabulary,
    n: int,
    alpha: float = 1.0,
    allow_unigram: bool = False,
) -> NgramModel:
    """Count all n-grams of the training stream, report by report."""
    low = 1 if allow_unigram else MIN_ORDER
    if not low <= n <= MAX_ORDER:
        raise ConfigurationError(
            f"gram order must be in [{low}, {MAX_ORDER}], got {n}"
        )
    if alpha <= 0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    if len(train.tokens) < 1:
        raise DataError("training stream is empty")

    model = NgramModel(n=n, vocab=vocab, alpha=alpha)
    succ = model.successor_counts
    ctx_counts = model.context_counts
    unigram = model.unigram_counts
    bos = vocab.bos_id
    need = n - 1

    for report in train.reports():
        padded = [bos] * need + report
        for i, tok in enumerate(report):
            ctx = tuple(padded[i:i + need])
            slot = succ.get(ctx)
            if slot is None:
                slot = succ[ctx] = {}
            slot[tok] = slot.get(tok, 0) + 1
            ctx_counts[ctx] = ctx_counts.get(ctx, 0) + 1
            unigram[tok] += 1

    model._rebuild_order()
    return model


def save_ngram(model: NgramModel, path: str) -> None:
    """Line-oriented model file; one (context, successor, count) per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{MODEL_FORMAT}\tn={model.n}\tvocab_size={model.vocab_size}"
            f"\talpha={model.alpha!r}\tvocab_checksum={model.vocab_checksum}\n"
        )
        for ctx in sorted(model.successor_counts):
            ctx_str = " ".join(str(i) for i in ctx)
            slot = model.successor_counts[ctx]
            for tok_id in sorted(slot):
                fh.write(f"{ctx_str}\t{tok_id}\t{slot[tok_id]}\n")


def load_ngram(path: str, vocab: Vocabulary) -> NgramModel:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if not header or header[0] != MODEL_FORMAT:
            raise DataError(f"{path}: not a {MODEL_FORMAT} file")
        meta = dict(part.split("=", 1) for part in header[1:])
        if meta["vocab_checksum"] != vocab.checksum:
            raise DataError(
                f"{path}: model was trained against a different vocabulary "
                f"(checksum {meta['vocab_checksum'][:12]}… != {vocab.checksum[:12]}…)"
            )
        if int(meta["vocab_size"]) != len(vocab):
            raise DataError(f"{path}: vocab_size mismatch")
        model = NgramModel(n=int(meta["n"]), vocab=vocab, alpha=float(meta["alpha"]))
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                ctx_str, tok_id, count = line.split("\t")
                ctx = tuple(int(t) for t in ctx_str.split()) if ctx_str else ()
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed count line") from exc
            slot = model.successor_counts.setdefault(ctx, {})
            slot[int(tok_id)] = int(count)
    for ctx, slot in model.successor_counts.items():
        model.context_counts[ctx] = sum(slot.values())
        for tok_id, count in slot.items():
            model.unigram_counts[tok_id] += count
    model._rebuild_order()
    return model
