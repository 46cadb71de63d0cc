"""Independent reference implementations used only by the test suite.

These deliberately share no code with the package: the n-gram oracle
rescans the raw token stream for every context query, and the
gradient oracle perturbs parameters one at a time with central finite
differences.
"""

from __future__ import annotations

import numpy as np


class RescanNgram:
    """Brute-force n-gram reference that recounts the stream per query.

    Unigram counts (used only for tie-breaking) are tallied once at
    construction; every probability query walks the padded reports
    from scratch.
    """

    def __init__(self, tokens, report_starts, vocab, n, alpha=1.0):
        self.n = n
        self.alpha = alpha
        self.vocab = vocab
        self.v = len(vocab)
        bounds = list(report_starts) + [len(tokens)]
        bos = vocab.bos_id
        self.padded_reports = [
            [bos] * (n - 1) + list(tokens[a:b]) for a, b in zip(bounds, bounds[1:])
        ]
        self.unigram = [0] * self.v
        for t in tokens:
            self.unigram[t] += 1

    def _context_histogram(self, context):
        """One full rescan: total count of the context and its successors."""
        context = tuple(context)
        need = self.n - 1
        total = 0
        successors = {}
        for padded in self.padded_reports:
            for i in range(len(padded) - need):
                if tuple(padded[i:i + need]) == context:
                    total += 1
                    nxt = padded[i + need]
                    successors[nxt] = successors.get(nxt, 0) + 1
        return total, successors

    def prob(self, context, w):
        total, successors = self._context_histogram(context)
        return (successors.get(w, 0) + self.alpha) / (total + self.alpha * self.v)

    def prob_vector(self, context):
        """Laplace probability of every vocabulary token after context."""
        total, successors = self._context_histogram(context)
        denom = total + self.alpha * self.v
        return [(successors.get(w, 0) + self.alpha) / denom for w in range(self.v)]

    def predict_next(self, context, k):
        need = self.n - 1
        context = list(context)
        bos = self.vocab.bos_id
        if len(context) < need:
            context = [bos] * (need - len(context)) + context
        else:
            context = context[len(context) - need:]
        probs = self.prob_vector(context)
        candidates = [(w, probs[w]) for w in range(self.v) if w != bos]
        candidates.sort(
            key=lambda item: (
                -item[1],
                -self.unigram[item[0]],
                self.vocab.id_to_token[item[0]],
            )
        )
        return candidates[:k]


def finite_difference_gradients(loss_fn, params: dict[str, np.ndarray],
                                epsilon: float = 1e-4) -> dict[str, np.ndarray]:
    """Central-difference gradient of loss_fn wrt every entry of params.

    ``loss_fn`` takes no arguments and reads the live parameter arrays,
    which are perturbed in place and restored.
    """
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + epsilon
            hi = loss_fn()
            flat[j] = orig - epsilon
            lo = loss_fn()
            flat[j] = orig
            gflat[j] = (hi - lo) / (2.0 * epsilon)
        grads[name] = g
    return grads


def max_relative_error(analytic: dict[str, np.ndarray],
                       numeric: dict[str, np.ndarray]) -> float:
    """Worst-case relative disagreement across all parameters.

    The denominator is floored at 1e-4, so components that are
    numerically zero are compared absolutely at 1e-8 precision (a
    1e-4 relative check there would only measure the ~1e-12 round-off
    of the central differences themselves).
    """
    worst = 0.0
    for name in analytic:
        a = analytic[name].reshape(-1)
        b = numeric[name].reshape(-1)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-4)
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst
