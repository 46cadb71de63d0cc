"""Fixed-window recurrent language models (LSTM / GRU) in plain numpy.

The network embeds a window of preceding tokens, runs a gated
recurrent cell over it from a zero state, and maps the final hidden
state through one ReLU layer and a softmax over the vocabulary.
Gradients are computed by hand (backpropagation through the unrolled
window); training uses Adam with early stopping on a chronological
validation split.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .corpus import Vocabulary, TokenStream
from .errors import ConfigurationError, DataError, NumericError
from .ngram import Prediction

MODEL_FORMAT = "clinkey-neural-v1"

CELL_LSTM = "lstm"
CELL_GRU = "gru"


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class NeuralConfig:
    cell: str
    embed_dim: int = 200
    hidden_dim: int = 50
    ff_dim: int = 100
    window: int = 5
    vocab_limit: int = 1000
    batch_size: int = 128
    max_epochs: int = 100
    patience: int = 3
    validation_fraction: float = 0.10
    adam: AdamConfig = AdamConfig()
    init_seed: int = 0

    def __post_init__(self):
        if self.cell not in (CELL_LSTM, CELL_GRU):
            raise ConfigurationError(f"cell must be 'lstm' or 'gru', got {self.cell!r}")
        for name in ("embed_dim", "hidden_dim", "ff_dim", "window", "batch_size",
                     "max_epochs"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.patience < 1:
            raise ConfigurationError("patience must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigurationError("validation_fraction must be in (0, 1)")


def _sigmoid(x):
    # Clipping-free stable sigmoid: exp only ever sees non-positive input.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class LstmParams:
    """Input/forget/output/candidate gates over [x, h_prev].

    The four gate matrices are stored stacked column-wise in one array
    so a step is a single matmul; ``W_i`` .. ``b_q`` are views.
    """

    def __init__(self, embed_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.hidden_dim = hidden_dim
        fan_in = embed_dim + hidden_dim
        limit = np.sqrt(6.0 / (fan_in + hidden_dim))
        self.W = rng.uniform(-limit, limit, size=(fan_in, 4 * hidden_dim))
        self.b = np.zeros(4 * hidden_dim)

    def _gate(self, which: int):
        h = self.hidden_dim
        return self.W[:, which * h:(which + 1) * h]

    @property
    def W_i(self):
        return self._gate(0)

    @property
    def W_f(self):
        return self._gate(1)

    @property
    def W_o(self):
        return self._gate(2)

    @property
    def W_q(self):
        return self._gate(3)

    @property
    def b_i(self):
        return self.b[:self.hidden_dim]

    @property
    def b_f(self):
        return self.b[self.hidden_dim:2 * self.hidden_dim]

    @property
    def b_o(self):
        return self.b[2 * self.hidden_dim:3 * self.hidden_dim]

    @property
    def b_q(self):
        return self.b[3 * self.hidden_dim:]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"cell.W": self.W, "cell.b": self.b}

    def step(self, x, h, c):
        """One LSTM step; returns (h_next, c_next, cache)."""
        hd = self.hidden_dim
        z = np.concatenate([x, h], axis=1)
        a = z @ self.W + self.b
        i = _sigmoid(a[:, :hd])
        f = _sigmoid(a[:, hd:2 * hd])
        o = _sigmoid(a[:, 2 * hd:3 * hd])
        q = np.tanh(a[:, 3 * hd:])
        c_next = f * c + i * q
        tc = np.tanh(c_next)
        h_next = o * tc
        return h_next, c_next, (z, i, f, o, q, c, tc)

    def backward_step(self, dh, dc, cache, grads):
        z, i, f, o, q, c_prev, tc = cache
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * q
        dq = dc * i
        df = dc * c_prev
        dc_prev = dc * f
        da = np.concatenate(
            [di * i * (1.0 - i), df * f * (1.0 - f),
             do * o * (1.0 - o), dq * (1.0 - q * q)],
            axis=1,
        )
        grads["cell.W"] += z.T @ da
        grads["cell.b"] += da.sum(axis=0)
        dz = da @ self.W.T
        embed_dim = z.shape[1] - self.hidden_dim
        return dz[:, :embed_dim], dz[:, embed_dim:], dc_prev

    def uses_cell_state(self) -> bool:
        return True


class GruParams:
    """Reset/update gates plus candidate state; no output gate.

    Reset and update share one stacked matrix over [x, h_prev]; the
    candidate matrix acts on [x, r*h_prev]. The new hidden state is
    u*h_prev + (1-u)*candidate.
    """

    def __init__(self, embed_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.hidden_dim = hidden_dim
        fan_in = embed_dim + hidden_dim
        limit = np.sqrt(6.0 / (fan_in + hidden_dim))
        self.W_gates = rng.uniform(-limit, limit, size=(fan_in, 2 * hidden_dim))
        self.b_gates = np.zeros(2 * hidden_dim)
        self.W_cand = rng.uniform(-limit, limit, size=(fan_in, hidden_dim))
        self.b_cand = np.zeros(hidden_dim)

    @property
    def W_r(self):
        return self.W_gates[:, :self.hidden_dim]

    @property
    def W_u(self):
        return self.W_gates[:, self.hidden_dim:]

    @property
    def W_c(self):
        return self.W_cand

    @property
    def b_r(self):
        return self.b_gates[:self.hidden_dim]

    @property
    def b_u(self):
        return self.b_gates[self.hidden_dim:]

    @property
    def b_c(self):
        return self.b_cand

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "cell.W_gates": self.W_gates,
            "cell.b_gates": self.b_gates,
            "cell.W_cand": self.W_cand,
            "cell.b_cand": self.b_cand,
        }

    def step(self, x, h, c):
        hd = self.hidden_dim
        zc = np.concatenate([x, h], axis=1)
        a = zc @ self.W_gates + self.b_gates
        r = _sigmoid(a[:, :hd])
        u = _sigmoid(a[:, hd:])
        zr = np.concatenate([x, r * h], axis=1)
        cand = np.tanh(zr @ self.W_cand + self.b_cand)
        h_next = u * h + (1.0 - u) * cand
        return h_next, c, (zc, zr, r, u, cand, h)

    def backward_step(self, dh, dc, cache, grads):
        zc, zr, r, u, cand, h_prev = cache
        du = dh * (h_prev - cand)
        dcand = dh * (1.0 - u)
        dh_prev = dh * u
        da_c = dcand * (1.0 - cand * cand)
        grads["cell.W_cand"] += zr.T @ da_c
        grads["cell.b_cand"] += da_c.sum(axis=0)
        dzr = da_c @ self.W_cand.T
        embed_dim = zc.shape[1] - self.hidden_dim
        dx = dzr[:, :embed_dim].copy()
        drh = dzr[:, embed_dim:]
        dr = drh * h_prev
        dh_prev = dh_prev + drh * r
        da = np.concatenate([dr * r * (1.0 - r), du * u * (1.0 - u)], axis=1)
        grads["cell.W_gates"] += zc.T @ da
        grads["cell.b_gates"] += da.sum(axis=0)
        dzc = da @ self.W_gates.T
        dx += dzc[:, :embed_dim]
        dh_prev = dh_prev + dzc[:, embed_dim:]
        return dx, dh_prev, dc

    def uses_cell_state(self) -> bool:
        return False


def _make_cell(config: NeuralConfig, rng: np.random.Generator):
    cls = LstmParams if config.cell == CELL_LSTM else GruParams
    return cls(config.embed_dim, config.hidden_dim, rng)


class NeuralModel:
    """Embeddings, a recurrent cell, and the feed-forward/softmax head."""

    def __init__(self, config: NeuralConfig, vocab: Vocabulary,
                 rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(config.init_seed)
        self.config = config
        self.vocab = vocab
        v = len(vocab)
        self.embeddings = rng.uniform(-0.05, 0.05, size=(v, config.embed_dim))
        self.cell = _make_cell(config, rng)
        lim_ff = np.sqrt(6.0 / (config.hidden_dim + config.ff_dim))
        self.W_ff = rng.uniform(-lim_ff, lim_ff, size=(config.hidden_dim, config.ff_dim))
        self.b_ff = np.zeros(config.ff_dim)
        lim_out = np.sqrt(6.0 / (config.ff_dim + v))
        self.W_out = rng.uniform(-lim_out, lim_out, size=(config.ff_dim, v))
        self.b_out = np.zeros(v)

    @property
    def vocab_checksum(self) -> str:
        return self.vocab.checksum

    def parameters(self) -> dict[str, np.ndarray]:
        """All trainable arrays, in the serialization order."""
        params = {"embeddings": self.embeddings}
        params.update(self.cell.arrays())
        params.update({"ff.W": self.W_ff, "ff.b": self.b_ff,
                       "out.W": self.W_out, "out.b": self.b_out})
        return params

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def zero_parameters(self) -> None:
        for p in self.parameters().values():
            p[...] = 0.0

    def _check_finite(self, arr, layer: str) -> None:
        if not np.isfinite(arr).all():
            raise NumericError(f"non-finite values in {layer}")

    def _forward_batch(self, contexts: np.ndarray, keep_cache: bool = False):
        """Probabilities for a (B, window) batch of contexts."""
        cfg = self.config
        if contexts.ndim != 2 or contexts.shape[1] != cfg.window:
            raise ConfigurationError(
                f"contexts must be (batch, {cfg.window}), got {contexts.shape}"
            )
        for name, p in self.parameters().items():
            if not np.isfinite(p).all():
                raise NumericError(f"non-finite values in parameter {name}")
        b = contexts.shape[0]
        xs = self.embeddings[contexts]  # (B, window, embed)
        h = np.zeros((b, cfg.hidden_dim))
        c = np.zeros((b, cfg.hidden_dim))
        caches = []
        for s in range(cfg.window):
            h, c, cache = self.cell.step(xs[:, s, :], h, c)
            self._check_finite(h, f"{cfg.cell} step {s + 1}")
            if keep_cache:
                caches.append(cache)
        ff_pre = h @ self.W_ff + self.b_ff
        ff_act = np.maximum(ff_pre, 0.0)
        logits = ff_act @ self.W_out + self.b_out
        self._check_finite(logits, "output layer")
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_probs = shifted - log_z
        probs = np.exp(log_probs)
        fwd_cache = (contexts, caches, h, ff_pre, ff_act, probs) if keep_cache else None
        return probs, log_probs, fwd_cache

    def forward(self, context: list[int]) -> np.ndarray:
        """Probability vector over the vocabulary for one full window."""
        if len(context) != self.config.window:
            raise ConfigurationError(
                f"context must have {self.config.window} tokens, got {len(context)}"
            )
        self._check_context_ids(context)
        probs, _, _ = self._forward_batch(np.asarray([context], dtype=np.int64))
        return probs[0]

    def _check_context_ids(self, context) -> None:
        v = len(self.vocab)
        for i in context:
            if not 0 <= i < v:
                raise ConfigurationError(f"token id {i} outside vocabulary of size {v}")

    def _pad(self, context: list[int]) -> list[int]:
        w = self.config.window
        if len(context) >= w:
            return list(context[len(context) - w:])
        return [self.vocab.bos_id] * (w - len(context)) + list(context)

    def predict_next(self, context: list[int], k: int = 1) -> list[Prediction]:
        """Top-k next tokens; ties broken by token id, BOS excluded."""
        if k < 1:
            raise ConfigurationError(f"k must be >= 1, got {k}")
        self._check_context_ids(context)
        probs = self.forward(self._pad(context))
        order = np.argsort(-probs, kind="stable")
        bos = self.vocab.bos_id
        out = []
        for tok_id in order:
            if tok_id == bos:
                continue
            out.append(Prediction(token_id=int(tok_id),
                                  probability=float(probs[tok_id]),
                                  rank=len(out) + 1))
            if len(out) == k:
                break
        return out


def batch_loss(model: NeuralModel, contexts: np.ndarray, targets: np.ndarray) -> float:
    """Mean categorical cross-entropy, forward pass only."""
    _, log_probs, _ = model._forward_batch(np.asarray(contexts, dtype=np.int64))
    targets = np.asarray(targets, dtype=np.int64)
    return float(-log_probs[np.arange(len(targets)), targets].mean())


def _loss_and_grads(model: NeuralModel, contexts: np.ndarray, targets: np.ndarray):
    b = contexts.shape[0]
    probs, log_probs, cache = model._forward_batch(contexts, keep_cache=True)
    _, caches, h_final, ff_pre, ff_act, _ = cache
    loss = float(-log_probs[np.arange(b), targets].mean())

    grads = {name: np.zeros_like(p) for name, p in model.parameters().items()}

    dlogits = probs.copy()
    dlogits[np.arange(b), targets] -= 1.0
    dlogits /= b
    grads["out.W"] += ff_act.T @ dlogits
    grads["out.b"] += dlogits.sum(axis=0)
    dff_act = dlogits @ model.W_out.T
    dff_pre = dff_act * (ff_pre > 0.0)
    grads["ff.W"] += h_final.T @ dff_pre
    grads["ff.b"] += dff_pre.sum(axis=0)

    dh = dff_pre @ model.W_ff.T
    dc = np.zeros_like(dh)
    d_embed = grads["embeddings"]
    for s in range(model.config.window - 1, -1, -1):
        dx, dh, dc = model.cell.backward_step(dh, dc, caches[s], grads)
        np.add.at(d_embed, contexts[:, s], dx)
    return loss, grads


def loss_and_gradients(model: NeuralModel, batch) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over (context, target) pairs plus all gradients."""
    pairs = list(batch)
    if not pairs:
        raise ConfigurationError("batch must be non-empty")
    contexts = np.asarray([ctx for ctx, _ in pairs], dtype=np.int64)
    targets = np.asarray([tgt for _, tgt in pairs], dtype=np.int64)
    return _loss_and_grads(model, contexts, targets)


def extract_windows(stream: TokenStream, vocab: Vocabulary,
                    window: int) -> tuple[np.ndarray, np.ndarray]:
    """All stride-1 (context, next-token) pairs, never crossing reports."""
    contexts = np.empty((len(stream.tokens), window), dtype=np.int64)
    targets = np.empty(len(stream.tokens), dtype=np.int64)
    bos = vocab.bos_id
    pos = 0
    for report in stream.reports():
        padded = [bos] * window + report
        for i, tok in enumerate(report):
            contexts[pos] = padded[i:i + window]
            targets[pos] = tok
            pos += 1
    return contexts, targets


class EarlyStopper:
    """Stop when validation loss fails to improve for `patience` epochs."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, loss: float, epoch: int) -> bool:
        if loss < self.best:
            self.best = loss
            self.best_epoch = epoch
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    wall_seconds: float


@dataclass
class TrainingLog:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,val_loss,wall_seconds\n")
            for e in self.epochs:
                fh.write(f"{e.epoch},{e.train_loss!r},{e.val_loss!r},{e.wall_seconds:.3f}\n")


class _Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: AdamConfig):
        self.cfg = cfg
        self.t = 0
        self.m = {k: np.zeros_like(p) for k, p in params.items()}
        self.v = {k: np.zeros_like(p) for k, p in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            p -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)


def train(train_stream: TokenStream, vocab: Vocabulary,
          config: NeuralConfig) -> tuple[NeuralModel, TrainingLog]:
    """Train with Adam; the returned model carries the best-epoch weights.

    Windows are ordered chronologically and the final
    ``validation_fraction`` of them form the validation set.
    """
    contexts, targets = extract_windows(train_stream, vocab, config.window)
    n = len(targets)
    if n < 2:
        raise DataError(f"need at least 2 training windows, got {n}")
    n_val = max(1, int(n * config.validation_fraction))
    n_train = n - n_val
    tr_ctx, tr_tgt = contexts[:n_train], targets[:n_train]
    va_ctx, va_tgt = contexts[n_train:], targets[n_train:]

    rng = np.random.default_rng(config.init_seed)
    model = NeuralModel(config, vocab, rng)
    params = model.parameters()
    adam = _Adam(params, config.adam)
    stopper = EarlyStopper(config.patience)
    log = TrainingLog()
    best_params = {k: p.copy() for k, p in params.items()}

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n_train)
        total = 0.0
        for lo in range(0, n_train, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            loss, grads = _loss_and_grads(model, tr_ctx[idx], tr_tgt[idx])
            if not np.isfinite(loss):
                raise NumericError(f"training loss became non-finite at epoch {epoch}")
            adam.step(params, grads)
            total += loss * len(idx)
        train_loss = total / n_train
        val_loss = _eval_loss(model, va_ctx, va_tgt, config.batch_size)
        log.epochs.append(EpochStats(epoch, train_loss, val_loss,
                                     time.perf_counter() - t0))
        if stopper.update(val_loss, epoch):
            for k, p in params.items():
                best_params[k][...] = p
        if stopper.should_stop:
            break

    for k, p in params.items():
        p[...] = best_params[k]
    log.best_epoch = stopper.best_epoch
    return model, log


def _eval_loss(model: NeuralModel, contexts, targets, batch_size: int) -> float:
    total = 0.0
    for lo in range(0, len(targets), batch_size):
        chunk_t = targets[lo:lo + batch_size]
        total += batch_loss(model, contexts[lo:lo + batch_size], chunk_t) * len(chunk_t)
    return total / len(targets)


def save_neural(model: NeuralModel, path: str) -> None:
    """Versioned binary: JSON header, then raw float64 arrays in order."""
    params = model.parameters()
    header = {
        "config": asdict(model.config),
        "vocab_checksum": model.vocab_checksum,
        "vocab_size": len(model.vocab),
        "arrays": [{"name": k, "shape": list(p.shape)} for k, p in params.items()],
        "dtype": "float64",
    }
    with open(path, "wb") as fh:
        fh.write(MODEL_FORMAT.encode() + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for p in params.values():
            fh.write(np.ascontiguousarray(p, dtype=np.float64).tobytes())


def load_neural(path: str, vocab: Vocabulary) -> NeuralModel:
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n").decode()
        if magic != MODEL_FORMAT:
            raise DataError(f"{path}: not a {MODEL_FORMAT} file")
        header = json.loads(fh.readline().decode())
        if header["vocab_checksum"] != vocab.checksum:
            raise DataError(
                f"{path}: model was trained against a different vocabulary "
                f"(checksum {header['vocab_checksum'][:12]}… != {vocab.checksum[:12]}…)"
            )
        cfg_dict = dict(header["config"])
        cfg_dict["adam"] = AdamConfig(**cfg_dict["adam"])
        config = NeuralConfig(**cfg_dict)
        model = NeuralModel(config, vocab)
        params = model.parameters()
        for entry in header["arrays"]:
            name, shape = entry["name"], tuple(entry["shape"])
            if name not in params or params[name].shape != shape:
                raise DataError(f"{path}: unexpected array {name} {shape}")
            raw = fh.read(int(np.prod(shape)) * 8)
            if len(raw) != int(np.prod(shape)) * 8:
                raise DataError(f"{path}: truncated array {name}")
            params[name][...] = np.frombuffer(raw, dtype=np.float64).reshape(shape)
    return model
