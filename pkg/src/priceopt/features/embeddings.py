"""Skip-gram with negative sampling over user interaction sequences.

Each user's interactions, ordered by time, form one sentence of product
tokens. Consecutive events on the same product collapse into one token whose
weight is the strongest implicit score seen (click 1, cart 3, order 5).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from ..core import ClickstreamEvent, DomainError

IMPLICIT_SCORE = {"pdp": 1.0, "click": 1.0, "cart": 3.0, "order": 5.0}
MAX_SCORE = max(IMPLICIT_SCORE.values())


@dataclass
class EmbeddingTable:
    dimension: int
    vectors: dict[str, np.ndarray]
    training_meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, product_id: str) -> np.ndarray | None:
        return self.vectors.get(product_id)

    def matrix(self, product_ids: Iterable[str]) -> np.ndarray:
        """Rows for ``product_ids``; products without a vector get zeros."""
        zero = np.zeros(self.dimension)
        return np.array([self.vectors.get(p, zero) for p in product_ids]).reshape(-1, self.dimension)

    def save(self, path: str | Path) -> None:
        lines = ["# " + json.dumps({"dimension": self.dimension, **self.training_meta}, sort_keys=True)]
        for pid in sorted(self.vectors):
            lines.append(" ".join([pid] + [repr(float(v)) for v in self.vectors[pid]]))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        meta, vectors, dim = {}, {}, None
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                meta = json.loads(line[1:])
                continue
            pid, *vals = line.split()
            vec = np.array([float(v) for v in vals])
            if dim is not None and len(vec) != dim:
                raise DomainError(f"ragged embedding row for {pid}")
            dim = len(vec)
            vectors[pid] = vec
        dimension = int(meta.pop("dimension", dim or 0))
        return cls(dimension, vectors, meta)


def build_sentences(events: Iterable[ClickstreamEvent]) -> list[list[tuple[str, float]]]:
    """Per-user token sequences as ``(product_id, weight)`` pairs."""
    by_user: dict[str, list[ClickstreamEvent]] = {}
    for ev in events:
        if ev.event_type in IMPLICIT_SCORE:
            by_user.setdefault(ev.user_id, []).append(ev)
    sentences = []
    for user in sorted(by_user):
        evs = sorted(by_user[user], key=lambda e: (e.timestamp, e.product_id, e.event_type))
        tokens: list[tuple[str, float]] = []
        for ev in evs:
            score = IMPLICIT_SCORE[ev.event_type]
            if tokens and tokens[-1][0] == ev.product_id:
                tokens[-1] = (ev.product_id, max(tokens[-1][1], score))
            else:
                tokens.append((ev.product_id, score))
        sentences.append(tokens)
    return sentences


def _pairs(sentences, vocab: dict[str, int], window: int):
    centers, contexts, weights = [], [], []
    for sent in sentences:
        ids = [vocab[p] for p, _ in sent]
        w = [s for _, s in sent]
        for i, c in enumerate(ids):
            for j in range(max(0, i - window), min(len(ids), i + window + 1)):
                if j != i and ids[j] != c:
                    centers.append(c)
                    contexts.append(ids[j])
                    weights.append(np.sqrt(w[i] * w[j]) / MAX_SCORE)
    return np.array(centers, dtype=int), np.array(contexts, dtype=int), np.array(weights)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def train_product_embeddings(
    clickstream: Iterable[ClickstreamEvent],
    dimension: int = 16,
    epochs: int = 5,
    window: int = 2,
    negatives: int = 5,
    seed: int = 0,
    learning_rate: float = 0.025,
    batch_size: int = 128,
) -> EmbeddingTable:
    """Train product vectors with skip-gram negative sampling.

    Deterministic for a fixed ``seed``. Raises :class:`DomainError` when no
    user has at least two interactions on distinct products.
    """
    if dimension < 1:
        raise DomainError("dimension must be positive")
    sentences = [s for s in build_sentences(clickstream) if len(s) >= 2]
    if not sentences:
        raise DomainError("degenerate corpus: no user has two or more interactions")
    products = sorted({p for s in sentences for p, _ in s})
    if len(products) < 2:
        raise DomainError("degenerate corpus: fewer than two products")
    vocab = {p: i for i, p in enumerate(products)}
    centers, contexts, weights = _pairs(sentences, vocab, window)
    if len(centers) == 0:
        raise DomainError("degenerate corpus: no co-occurring products")

    rng = np.random.default_rng(seed)
    V = len(products)
    w_in = (rng.random((V, dimension)) - 0.5) / dimension
    w_out = np.zeros((V, dimension))
    counts = np.bincount(np.concatenate([centers, contexts]), minlength=V).astype(float)
    noise = counts ** 0.75
    noise /= noise.sum()
    cum_noise = np.cumsum(noise)

    n = len(centers)
    total_steps = epochs * ((n + batch_size - 1) // batch_size)
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            lr = learning_rate * max(1e-4, 1.0 - step / max(total_steps, 1))
            step += 1
            c, o, wt = centers[idx], contexts[idx], weights[idx]
            neg = np.searchsorted(cum_noise, rng.random((len(idx), negatives)), side="right")
            neg = np.minimum(neg, V - 1)
            vc = w_in[c]                                   # (B, d)
            uo = w_out[o]                                  # (B, d)
            un = w_out[neg]                                # (B, k, d)
            g_pos = (_sigmoid(np.einsum("bd,bd->b", vc, uo)) - 1.0) * wt          # (B,)
            g_neg = _sigmoid(np.einsum("bkd,bd->bk", un, vc)) * wt[:, None]       # (B, k)
            grad_vc = g_pos[:, None] * uo + np.einsum("bk,bkd->bd", g_neg, un)
            np.add.at(w_out, o, -lr * g_pos[:, None] * vc)
            np.add.at(w_out, neg, -lr * g_neg[:, :, None] * vc[:, None, :])
            np.add.at(w_in, c, -lr * grad_vc)

    # input plus output vectors: output vectors carry direct co-occurrence,
    # which input vectors alone only see through shared contexts
    vecs = w_in + w_out
    if not np.all(np.isfinite(vecs)):
        raise FloatingPointError("embedding training diverged")
    meta = {"epochs": epochs, "window": window, "negatives": negatives, "seed": seed,
            "learning_rate": learning_rate}
    return EmbeddingTable(dimension, {p: vecs[i].copy() for p, i in vocab.items()}, meta)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))
