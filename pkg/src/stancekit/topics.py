"""Topic modeling by collapsed Gibbs sampling and the KL-divergence features.

Sampling uses an in-package xorshift generator so that results are
bit-identical whether or not the kernels are JIT-compiled, and across
platforms. Training is single-threaded per model; a trained model is
immutable and inference calls are independent and thread-safe.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .textproc import TokenSeq

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def _njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

_LDA_FORMAT = "lda-v1"

_U13 = np.uint64(13)
_U7 = np.uint64(7)
_U17 = np.uint64(17)
_U11 = np.uint64(11)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


def mix_seed(seed: int, *salts: int) -> int:
    """Deterministically mix a seed (plus salts) into a nonzero 64-bit state."""
    mask = (1 << 64) - 1
    x = (seed & mask) ^ 0x9E3779B97F4A7C15
    for salt in salts:
        x = (x ^ (salt & mask)) * 0xBF58476D1CE4E5B9 & mask
        x ^= x >> 27
    for _ in range(4):
        x = (x * 0x94D049BB133111EB + 0x2545F4914F6CDD1D) & mask
        x ^= x >> 31
    return x or 0x9E3779B97F4A7C15


@_njit(cache=True)
def _gibbs_train_kernel(words, doc_ids, n_dk, n_kw, n_k, alpha, beta,
                        sweeps, state, probs):  # pragma: no cover - via wrapper
    n_tokens = words.size
    k_topics, vocab_size = n_kw.shape
    vbeta = vocab_size * beta
    z = np.empty(n_tokens, dtype=np.int64)
    x = state[0]

    for t in range(n_tokens):
        x ^= x << _U13
        x ^= x >> _U7
        x ^= x << _U17
        u = np.float64(x >> _U11) * _TO_UNIT
        k = np.int64(u * k_topics)
        if k >= k_topics:
            k = k_topics - 1
        z[t] = k
        n_dk[doc_ids[t], k] += 1
        n_kw[k, words[t]] += 1
        n_k[k] += 1

    for _ in range(sweeps):
        for t in range(n_tokens):
            w = words[t]
            d = doc_ids[t]
            k = z[t]
            n_dk[d, k] -= 1
            n_kw[k, w] -= 1
            n_k[k] -= 1
            total = 0.0
            for kk in range(k_topics):
                total += (n_dk[d, kk] + alpha) * (n_kw[kk, w] + beta) / (n_k[kk] + vbeta)
                probs[kk] = total
            x ^= x << _U13
            x ^= x >> _U7
            x ^= x << _U17
            u = np.float64(x >> _U11) * _TO_UNIT * total
            k = k_topics - 1
            for kk in range(k_topics):
                if probs[kk] > u:
                    k = kk
                    break
            z[t] = k
            n_dk[d, k] += 1
            n_kw[k, w] += 1
            n_k[k] += 1
    state[0] = x


@_njit(cache=True)
def _gibbs_infer_kernel(words, n_kw, n_k, alpha, beta, sweeps, avg_last,
                        state, theta):  # pragma: no cover - via wrapper
    n_tokens = words.size
    k_topics, vocab_size = n_kw.shape
    vbeta = vocab_size * beta
    n_dk = np.zeros(k_topics, dtype=np.int64)
    z = np.empty(n_tokens, dtype=np.int64)
    probs = np.empty(k_topics, dtype=np.float64)
    x = state[0]

    for t in range(n_tokens):
        x ^= x << _U13
        x ^= x >> _U7
        x ^= x << _U17
        u = np.float64(x >> _U11) * _TO_UNIT
        k = np.int64(u * k_topics)
        if k >= k_topics:
            k = k_topics - 1
        z[t] = k
        n_dk[k] += 1

    denom = n_tokens + k_topics * alpha
    for sweep in range(sweeps):
        for t in range(n_tokens):
            w = words[t]
            k = z[t]
            n_dk[k] -= 1
            total = 0.0
            for kk in range(k_topics):
                total += (n_dk[kk] + alpha) * (n_kw[kk, w] + beta) / (n_k[kk] + vbeta)
                probs[kk] = total
            x ^= x << _U13
            x ^= x >> _U7
            x ^= x << _U17
            u = np.float64(x >> _U11) * _TO_UNIT * total
            k = k_topics - 1
            for kk in range(k_topics):
                if probs[kk] > u:
                    k = kk
                    break
            z[t] = k
            n_dk[k] += 1
        if sweep >= sweeps - avg_last:
            for kk in range(k_topics):
                theta[kk] += (n_dk[kk] + alpha) / denom
    for kk in range(k_topics):
        theta[kk] /= avg_last
    state[0] = x


@dataclass(frozen=True)
class LdaModel:
    n_topics: int
    alpha: float
    beta: float
    vocab: dict[str, int]
    topic_word_counts: np.ndarray  # (K, V) int64
    topic_totals: np.ndarray  # (K,) int64


@dataclass(frozen=True)
class TopicDistribution:
    theta: np.ndarray

    def __post_init__(self) -> None:
        if (self.theta < 0).any() or abs(float(self.theta.sum()) - 1.0) > 1e-9:
            raise ValueError("theta must be a probability vector")


def _token_list(doc: TokenSeq | Sequence[str]) -> Sequence[str]:
    return doc.tokens if isinstance(doc, TokenSeq) else doc


def lda_train(corpus: Iterable[TokenSeq | Sequence[str]], n_topics: int,
              alpha: float, beta: float, iters: int, seed: int) -> LdaModel:
    """Train a topic model by collapsed Gibbs sampling.

    Each token's topic is resampled proportionally to
    (n_dk + alpha) * (n_kw + beta) / (n_k + V*beta) with the token itself
    excluded from the counts. Deterministic given the seed.
    """
    if n_topics < 1:
        raise ValueError(f"n_topics must be >= 1, got {n_topics}")
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    docs = [list(_token_list(doc)) for doc in corpus]
    if not docs:
        raise ValueError("cannot train a topic model on an empty corpus")
    vocab_terms = sorted({tok for doc in docs for tok in doc})
    if not vocab_terms:
        raise ValueError("corpus has an empty effective vocabulary")
    vocab = {tok: i for i, tok in enumerate(vocab_terms)}

    words = np.fromiter(
        (vocab[tok] for doc in docs for tok in doc), dtype=np.int64
    )
    doc_ids = np.fromiter(
        (d for d, doc in enumerate(docs) for _ in doc), dtype=np.int64
    )
    n_dk = np.zeros((len(docs), n_topics), dtype=np.int64)
    n_kw = np.zeros((n_topics, len(vocab)), dtype=np.int64)
    n_k = np.zeros(n_topics, dtype=np.int64)
    state = np.array([mix_seed(seed)], dtype=np.uint64)
    probs = np.empty(n_topics, dtype=np.float64)
    _gibbs_train_kernel(words, doc_ids, n_dk, n_kw, n_k, float(alpha),
                        float(beta), int(iters), state, probs)
    return LdaModel(
        n_topics=n_topics,
        alpha=float(alpha),
        beta=float(beta),
        vocab=vocab,
        topic_word_counts=n_kw,
        topic_totals=n_k,
    )


def lda_infer(doc: TokenSeq | Sequence[str], model: LdaModel, iters: int,
              seed: int) -> TopicDistribution:
    """Infer a topic distribution with topic-word counts frozen.

    theta is averaged over the last max(1, iters // 2) sweeps. A document
    with no in-vocabulary token gets the uniform distribution.
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    ids = [model.vocab[t] for t in _token_list(doc) if t in model.vocab]
    k = model.n_topics
    if not ids:
        return TopicDistribution(theta=np.full(k, 1.0 / k))
    words = np.array(ids, dtype=np.int64)
    theta = np.zeros(k, dtype=np.float64)
    state = np.array([mix_seed(seed)], dtype=np.uint64)
    avg_last = max(1, iters // 2)
    _gibbs_infer_kernel(words, model.topic_word_counts, model.topic_totals,
                        model.alpha, model.beta, int(iters), avg_last, state,
                        theta)
    return TopicDistribution(theta=theta)


def kl_divergence(p: TopicDistribution | np.ndarray,
                  q: TopicDistribution | np.ndarray,
                  eps: float = 1e-10) -> float:
    """Directed KL divergence in nats after eps-smoothing both arguments."""
    pv = np.asarray(p.theta if isinstance(p, TopicDistribution) else p, dtype=np.float64)
    qv = np.asarray(q.theta if isinstance(q, TopicDistribution) else q, dtype=np.float64)
    if pv.shape != qv.shape:
        raise ValueError(f"dimension mismatch: {pv.shape} vs {qv.shape}")
    ps = (pv + eps) / (pv + eps).sum()
    qs = (qv + eps) / (qv + eps).sum()
    return float(np.sum(ps * np.log(ps / qs)))


def save_lda(model: LdaModel, path: str | Path) -> None:
    """Serialize to versioned JSON with a canonical byte layout."""
    terms = [None] * len(model.vocab)
    for tok, i in model.vocab.items():
        terms[i] = tok
    payload = {
        "version": _LDA_FORMAT,
        "n_topics": model.n_topics,
        "alpha": model.alpha,
        "beta": model.beta,
        "vocab": terms,
        "topic_word_counts": model.topic_word_counts.tolist(),
        "topic_totals": model.topic_totals.tolist(),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_lda(path: str | Path) -> LdaModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != _LDA_FORMAT:
        raise ValueError(f"{path}: unsupported model version {payload.get('version')!r}")
    vocab = {tok: i for i, tok in enumerate(payload["vocab"])}
    counts = np.array(payload["topic_word_counts"], dtype=np.int64)
    totals = np.array(payload["topic_totals"], dtype=np.int64)
    if counts.shape != (payload["n_topics"], len(vocab)):
        raise ValueError(f"{path}: count matrix shape mismatch")
    if (counts < 0).any() or not np.array_equal(counts.sum(axis=1), totals):
        raise ValueError(f"{path}: inconsistent topic counts")
    return LdaModel(
        n_topics=int(payload["n_topics"]),
        alpha=float(payload["alpha"]),
        beta=float(payload["beta"]),
        vocab=vocab,
        topic_word_counts=counts,
        topic_totals=totals,
    )
