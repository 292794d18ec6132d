"""Vector-space resources and distance/similarity computations.

TF-IDF and embedding tables are immutable once built; every similarity
function here is pure and thread-safe.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import transport
from .textproc import TokenSeq

#: Cost-matrix size above which WMD falls back to the relaxed lower bound.
WMD_EXACT_LIMIT = 10_000

#: Feature value for pairs where either side has no embedded token.
WMD_DEFAULT_CAP = 10.0


@dataclass(frozen=True)
class TfIdfModel:
    """Vocabulary and smoothed inverse document frequencies.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1, fitted over training headlines
    and bodies; raw term counts are weighted by idf and L2-normalized at
    transform time.
    """

    vocab: dict[str, int]
    idf: np.ndarray

    def transform(self, tokens: Sequence[str]) -> dict[int, float]:
        """L2-normalized tf-idf weights by column; unseen tokens contribute 0."""
        counts: Counter[int] = Counter()
        for tok in tokens:
            col = self.vocab.get(tok)
            if col is not None:
                counts[col] += 1
        if not counts:
            return {}
        weights = {col: cnt * float(self.idf[col]) for col, cnt in counts.items()}
        norm = math.sqrt(sum(w * w for w in weights.values()))
        return {col: w / norm for col, w in weights.items()}


def fit_tfidf(corpus: Iterable[TokenSeq | Sequence[str]]) -> TfIdfModel:
    """Fit vocabulary and idf over a token corpus (error on empty corpus)."""
    df: Counter[str] = Counter()
    n_docs = 0
    for doc in corpus:
        tokens = doc.tokens if isinstance(doc, TokenSeq) else doc
        n_docs += 1
        df.update(set(tokens))
    if n_docs == 0:
        raise ValueError("cannot fit tf-idf on an empty corpus")
    vocab = {tok: i for i, tok in enumerate(sorted(df))}
    idf = np.empty(len(vocab))
    for tok, col in vocab.items():
        idf[col] = math.log((1 + n_docs) / (1 + df[tok])) + 1.0
    return TfIdfModel(vocab=vocab, idf=idf)


_TFIDF_FORMAT = "tfidf-v1"


def save_tfidf(model: TfIdfModel, path: str | Path) -> None:
    terms = [None] * len(model.vocab)
    for tok, i in model.vocab.items():
        terms[i] = tok
    payload = {
        "version": _TFIDF_FORMAT,
        "vocab": terms,
        "idf": [float(v) for v in model.idf],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_tfidf(path: str | Path) -> TfIdfModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != _TFIDF_FORMAT:
        raise ValueError(f"{path}: unsupported tf-idf version {payload.get('version')!r}")
    terms = payload["vocab"]
    idf = np.array(payload["idf"], dtype=np.float64)
    if len(terms) != idf.size:
        raise ValueError(f"{path}: vocab and idf sizes differ")
    return TfIdfModel(vocab={tok: i for i, tok in enumerate(terms)}, idf=idf)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm.

    Clamped to [-1, 1]: squared-norm underflow on denormal inputs can
    otherwise push the quotient past the mathematical bound.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def cosine_sparse(a: dict[int, float], b: dict[int, float]) -> float:
    """Cosine of two sparse column->weight maps; empty maps give 0.0."""
    if not a or not b:
        return 0.0
    if len(b) < len(a):
        a, b = b, a
    dot = sum(w * b.get(col, 0.0) for col, w in a.items())
    na = math.sqrt(sum(w * w for w in a.values()))
    nb = math.sqrt(sum(w * w for w in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(-1.0, min(1.0, dot / (na * nb)))


def pair_binary_vectors(h: TokenSeq | Sequence[str],
                        b: TokenSeq | Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Presence vectors over the pair-local vocabulary (sorted token union)."""
    h_tokens = set(h.tokens if isinstance(h, TokenSeq) else h)
    b_tokens = set(b.tokens if isinstance(b, TokenSeq) else b)
    union = sorted(h_tokens | b_tokens)
    u = np.fromiter((1.0 if t in h_tokens else 0.0 for t in union), dtype=np.float64,
                    count=len(union))
    v = np.fromiter((1.0 if t in b_tokens else 0.0 for t in union), dtype=np.float64,
                    count=len(union))
    return u, v


def hamming_norm(u: np.ndarray, v: np.ndarray) -> float:
    """Fraction of differing positions in [0, 1]; two empty vectors give 0."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    if u.size == 0:
        return 0.0
    return float(np.mean(u != v))


@dataclass(frozen=True)
class EmbeddingTable:
    """Token embeddings of a fixed dimension."""

    dim: int
    vectors: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError(f"dim must be positive, got {self.dim}")

    @classmethod
    def empty(cls) -> "EmbeddingTable":
        """Placeholder used when no embedding file is configured.

        Embedding-based similarities become 0 and WMD falls back to its cap.
        """
        return cls(dim=1, vectors={})

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Parse a whitespace-separated text embedding file.

    An optional first line ``count dim`` is accepted; otherwise the dimension
    is taken from the first vector line. Duplicate tokens keep their first
    occurrence.
    """
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if line_no == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    dim = int(parts[1])
                    if dim <= 0:
                        raise ValueError(f"{path}: header declares dim {dim}")
                    continue
            token, values = parts[0], parts[1:]
            try:
                vec = np.array([float(x) for x in values], dtype=np.float64)
            except ValueError:
                raise ValueError(f"{path}: line {line_no}: unparsable float") from None
            if dim is None:
                dim = len(vec)
                if dim == 0:
                    raise ValueError(f"{path}: line {line_no}: vector has no components")
            elif len(vec) != dim:
                raise ValueError(
                    f"{path}: line {line_no}: expected {dim} components, got {len(vec)}"
                )
            vectors.setdefault(token, vec)
    if dim is None or not vectors:
        raise ValueError(f"{path}: no vectors found")
    return EmbeddingTable(dim=dim, vectors=vectors)


def avg_embedding(tokens: Iterable[str], table: EmbeddingTable) -> np.ndarray:
    """Mean vector of table-covered tokens; zero vector if none are covered."""
    total = np.zeros(table.dim, dtype=np.float64)
    n = 0
    for tok in tokens:
        vec = table.vectors.get(tok)
        if vec is not None:
            total += vec
            n += 1
    if n == 0:
        return total
    return total / n


def _covered_counts(tokens: Sequence[str], table: EmbeddingTable):
    counts = Counter(t for t in tokens if t in table.vectors)
    items = sorted(counts.items())
    return [t for t, _ in items], np.array([c for _, c in items], dtype=np.int64)


def wmd(a: TokenSeq | Sequence[str], b: TokenSeq | Sequence[str],
        table: EmbeddingTable, cap: float = WMD_DEFAULT_CAP,
        exact_limit: int = WMD_EXACT_LIMIT) -> float:
    """Word mover's distance between two token sequences.

    Both sides become normalized bag-of-words distributions over their
    distinct embedded tokens; the pairwise cost is the Euclidean distance
    between embeddings. Solved exactly while the cost matrix has at most
    ``exact_limit`` entries, otherwise by the one-sided relaxation lower
    bound. Returns ``cap`` when either side has no embedded token.
    """
    a_tokens = list(a.tokens if isinstance(a, TokenSeq) else a)
    b_tokens = list(b.tokens if isinstance(b, TokenSeq) else b)
    a_vocab, a_counts = _covered_counts(a_tokens, table)
    b_vocab, b_counts = _covered_counts(b_tokens, table)
    if not a_vocab or not b_vocab:
        return float(cap)
    a_mat = np.stack([table.vectors[t] for t in a_vocab])
    b_mat = np.stack([table.vectors[t] for t in b_vocab])
    diff = a_mat[:, None, :] - b_mat[None, :, :]
    cost = np.sqrt((diff * diff).sum(axis=2))
    if cost.size <= exact_limit:
        return transport.transport_cost(cost, a_counts, b_counts)
    a_w = a_counts / a_counts.sum()
    b_w = b_counts / b_counts.sum()
    return transport.relaxed_lower_bound(cost, a_w, b_w)
