"""Corpus ingestion: normalization, tokenization, vocabulary, splits.

Raw reports are normalized by deleting digits and ASCII punctuation,
lower-casing, and splitting on whitespace.  The vocabulary is built
from training counts only, with reserved tokens for out-of-vocabulary
words, begin-of-report padding, and the de-identification marker.
"""

from __future__ import annotations

import hashlib
import random
import re
import string
from collections import Counter
from dataclasses import dataclass, field

from .errors import ConfigurationError, DataError

OOV_TOKEN = "<oov>"
BOS_TOKEN = "<bos>"
DEID_TOKEN = "xxxx"

VOCAB_FORMAT = "clinkey-vocab-v1"
SPLIT_FORMAT = "clinkey-split-v1"

_DIGIT_RE = re.compile(r"\d")  # \d matches Unicode category Nd
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


@dataclass(frozen=True)
class PreprocessConfig:
    """Normalization switches; the defaults are the canonical pipeline."""

    lowercase: bool = True
    strip_digits: bool = True
    strip_punctuation: bool = True


@dataclass
class RawCorpus:
    """An ordered collection of report texts."""

    reports: list[str]
    source_id: str = "corpus"

    def __post_init__(self):
        if not self.reports:
            raise ConfigurationError("corpus has no reports")


@dataclass
class Vocabulary:
    """Token/id table with training counts and reserved tokens.

    Ids are dense 0..len-1, assigned by descending training count with
    lexicographic tie-break, so two builds over the same input agree
    byte for byte.
    """

    id_to_token: list[str]
    counts: dict[str, int]
    min_count: int = 1
    size_limit: int | None = None
    token_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        for tok in (OOV_TOKEN, BOS_TOKEN, DEID_TOKEN):
            if tok not in self.token_to_id:
                raise DataError(f"vocabulary is missing reserved token {tok!r}")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    @property
    def oov_id(self) -> int:
        return self.token_to_id[OOV_TOKEN]

    @property
    def bos_id(self) -> int:
        return self.token_to_id[BOS_TOKEN]

    @property
    def deid_id(self) -> int:
        return self.token_to_id[DEID_TOKEN]

    def encode_token(self, token: str) -> int:
        return self.token_to_id.get(token, self.oov_id)

    def encode(self, tokens: list[str]) -> list[int]:
        get = self.token_to_id.get
        oov = self.oov_id
        return [get(t, oov) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def frequency_order(self) -> list[str]:
        """Non-reserved tokens, most frequent first (id order)."""
        reserved = {OOV_TOKEN, BOS_TOKEN, DEID_TOKEN}
        return [t for t in self.id_to_token if t not in reserved]

    def serialize(self) -> str:
        header = (
            f"{VOCAB_FORMAT}\toov={OOV_TOKEN}\tbos={BOS_TOKEN}\tdeid={DEID_TOKEN}"
            f"\tmin_count={self.min_count}\tsize_limit={self.size_limit or 0}"
        )
        lines = [header]
        for i, tok in enumerate(self.id_to_token):
            lines.append(f"{tok}\t{i}\t{self.counts.get(tok, 0)}")
        return "\n".join(lines) + "\n"

    @property
    def checksum(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()


@dataclass
class TokenStream:
    """Encoded token sequence with report boundaries.

    ``surfaces`` keeps the pre-encoding token strings (needed for
    keystroke accounting, where an OOV id must still be charged its
    real character length).  ``leading_partial`` marks a stream whose
    first report is the tail of a report cut by the train/test split.
    """

    tokens: list[int]
    report_starts: list[int]
    split: str
    surfaces: list[str] | None = None
    leading_partial: bool = False

    def __post_init__(self):
        if self.tokens:
            if not self.report_starts or self.report_starts[0] != 0:
                raise DataError("report_starts must begin at 0")
            for a, b in zip(self.report_starts, self.report_starts[1:]):
                if b <= a:
                    raise DataError("report_starts must be strictly increasing")
            if self.report_starts[-1] >= len(self.tokens):
                raise DataError("report start beyond stream end")

    def __len__(self) -> int:
        return len(self.tokens)

    def reports(self) -> list[list[int]]:
        bounds = self.report_starts + [len(self.tokens)]
        return [self.tokens[a:b] for a, b in zip(bounds, bounds[1:])]


def normalize_text(text: str, config: PreprocessConfig = PreprocessConfig()) -> list[str]:
    """Normalize one report to a token list (may be empty)."""
    if config.strip_digits:
        text = _DIGIT_RE.sub("", text)
    if config.strip_punctuation:
        text = text.translate(_PUNCT_TABLE)
    if config.lowercase:
        text = text.lower()
    return text.split()


def normalize_and_tokenize(
    raw: RawCorpus, config: PreprocessConfig = PreprocessConfig()
) -> list[list[str]]:
    """Tokenize every report; reports that normalize to nothing are dropped."""
    if not raw.reports:
        raise ConfigurationError("corpus has no reports")
    out = []
    for report in raw.reports:
        tokens = normalize_text(report, config)
        if tokens:
            out.append(tokens)
    return out


def build_vocabulary(
    train_tokens: list[list[str]],
    min_count: int = 10,
    size_limit: int | None = None,
) -> Vocabulary:
    """Build the token/id table from training-split counts only.

    Tokens seen fewer than ``min_count`` times are dropped; if
    ``size_limit`` is set, only the most frequent ``size_limit``
    survivors are kept (count ties broken lexicographically).  The
    reserved tokens are present regardless and do not count against
    the limit.
    """
    if min_count < 1:
        raise ConfigurationError(f"min_count must be >= 1, got {min_count}")
    if size_limit is not None and size_limit < 1:
        raise ConfigurationError(f"size_limit must be >= 1, got {size_limit}")
    if not train_tokens or not any(train_tokens):
        raise ConfigurationError("cannot build a vocabulary from an empty training split")

    counts = Counter()
    for report in train_tokens:
        counts.update(report)

    reserved = (OOV_TOKEN, BOS_TOKEN, DEID_TOKEN)
    pool = [
        (tok, c)
        for tok, c in counts.items()
        if tok not in reserved and c >= min_count
    ]
    pool.sort(key=lambda item: (-item[1], item[0]))
    if size_limit is not None:
        pool = pool[:size_limit]

    entries = dict(pool)
    for tok in reserved:
        entries[tok] = counts.get(tok, 0)
    ordered = sorted(entries, key=lambda tok: (-entries[tok], tok))
    return Vocabulary(
        id_to_token=ordered,
        counts=entries,
        min_count=min_count,
        size_limit=size_limit,
    )


def encode_and_split(
    token_seqs: list[list[str]],
    vocab: Vocabulary,
    test_size: int = 10_000,
) -> tuple[TokenStream, TokenStream]:
    """Encode reports and hold out the final ``test_size`` tokens as test.

    The split is a pure partition at token granularity: if the cut
    falls inside a report, that report's tail opens the test stream
    (marked ``leading_partial``).
    """
    if test_size < 1:
        raise ConfigurationError(f"test_size must be >= 1, got {test_size}")
    surfaces: list[str] = []
    starts: list[int] = []
    for report in token_seqs:
        if not report:
            continue
        starts.append(len(surfaces))
        surfaces.extend(report)
    total = len(surfaces)
    if total <= test_size:
        raise DataError(
            f"corpus has {total} tokens; need more than test_size={test_size} "
            f"(at least {test_size + 1})"
        )

    ids = vocab.encode(surfaces)
    cut = total - test_size

    train_starts = [s for s in starts if s < cut]
    test_starts = [s - cut for s in starts if s >= cut]
    leading_partial = not test_starts or test_starts[0] != 0
    if leading_partial:
        test_starts.insert(0, 0)

    train = TokenStream(
        tokens=ids[:cut],
        report_starts=train_starts,
        split="train",
        surfaces=surfaces[:cut],
    )
    test = TokenStream(
        tokens=ids[cut:],
        report_starts=test_starts,
        split="test",
        surfaces=surfaces[cut:],
        leading_partial=leading_partial,
    )
    return train, test


def sample_reports(raw: RawCorpus, k: int, seed: int) -> RawCorpus:
    """Sample k reports without replacement, keeping the original order."""
    n = len(raw.reports)
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    if k > n:
        raise DataError(f"cannot sample {k} reports from a corpus of {n}")
    picked = sorted(random.Random(seed).sample(range(n), k))
    return RawCorpus(
        reports=[raw.reports[i] for i in picked],
        source_id=f"{raw.source_id}@sample{k}",
    )


def load_corpus(path: str, source_id: str | None = None) -> RawCorpus:
    """Read a plain-text corpus: one report per line, blank lines ignored."""
    with open(path, encoding="utf-8") as fh:
        reports = [line.strip() for line in fh if line.strip()]
    if not reports:
        raise DataError(f"{path}: no reports (file is empty or all-blank)")
    return RawCorpus(reports=reports, source_id=source_id or path)


def save_vocabulary(vocab: Vocabulary, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(vocab.serialize())


def load_vocabulary(path: str) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty vocabulary file")
    head = lines[0].split("\t")
    if head[0] != VOCAB_FORMAT:
        raise DataError(f"{path}: expected {VOCAB_FORMAT} header, got {head[0]!r}")
    meta = dict(part.split("=", 1) for part in head[1:])
    id_to_token: list[str] = []
    counts: dict[str, int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            tok, tok_id, count = line.split("\t")
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: malformed vocabulary line") from exc
        if int(tok_id) != len(id_to_token):
            raise DataError(f"{path}:{lineno}: ids must be dense and in order")
        id_to_token.append(tok)
        counts[tok] = int(count)
    size_limit = int(meta.get("size_limit", "0")) or None
    return Vocabulary(
        id_to_token=id_to_token,
        counts=counts,
        min_count=int(meta.get("min_count", "1")),
        size_limit=size_limit,
    )


def save_split(stream: TokenStream, path: str) -> None:
    """Write a stream as surface tokens, one report per line."""
    if stream.surfaces is None:
        raise DataError("cannot save a split without surface tokens")
    bounds = stream.report_starts + [len(stream.tokens)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# {SPLIT_FORMAT}\tsplit={stream.split}"
            f"\tleading_partial={str(stream.leading_partial).lower()}\n"
        )
        for a, b in zip(bounds, bounds[1:]):
            fh.write(" ".join(stream.surfaces[a:b]) + "\n")


def load_split(path: str, vocab: Vocabulary) -> TokenStream:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(f"# {SPLIT_FORMAT}"):
        raise DataError(f"{path}: missing {SPLIT_FORMAT} header")
    meta = dict(part.split("=", 1) for part in lines[0].split("\t")[1:])
    surfaces: list[str] = []
    starts: list[int] = []
    for line in lines[1:]:
        tokens = line.split()
        if not tokens:
            continue
        starts.append(len(surfaces))
        surfaces.extend(tokens)
    if not surfaces:
        raise DataError(f"{path}: split file holds no tokens")
    return TokenStream(
        tokens=vocab.encode(surfaces),
        report_starts=starts,
        split=meta.get("split", "train"),
        surfaces=surfaces,
        leading_partial=meta.get("leading_partial", "false") == "true",
    )
