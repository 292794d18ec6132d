"""Deterministic text normalization shared by every feature.

All functions are pure: identical input and config always produce identical
output, so cached features and serialized models are reproducible byte for
byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources as _importlib_resources
from pathlib import Path
from typing import Iterable

from . import porter

# Runs of letters/digits (unicode-aware); underscores and punctuation split.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")

#: Characters of raw body text used for the "intro" variant features.
INTRO_CHARS = 250


@dataclass(frozen=True)
class TokenSeq:
    """Normalized tokens plus the raw sentence segmentation of the text."""

    tokens: tuple[str, ...]
    raw_sentences: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class PreprocessConfig:
    """Normalization settings: stopword set, stemming flag, n-gram order."""

    stopwords: frozenset[str] = field(default_factory=frozenset)
    stem: bool = True
    ngram_n: int = 2

    def __post_init__(self) -> None:
        if self.ngram_n < 1:
            raise ValueError(f"ngram_n must be >= 1, got {self.ngram_n}")


def default_stopwords() -> frozenset[str]:
    """Stopword list shipped with the package."""
    path = _importlib_resources.files("stancekit").joinpath("data/stopwords.txt")
    return frozenset(parse_stopword_lines(path.read_text(encoding="utf-8").splitlines()))


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a stopword file: one token per line, ``#`` starts a comment."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(parse_stopword_lines(fh))


def parse_stopword_lines(lines: Iterable[str]) -> list[str]:
    out = []
    for line in lines:
        word = line.split("#", 1)[0].strip().lower()
        if word:
            out.append(word)
    return out


def default_config(**overrides) -> PreprocessConfig:
    """PreprocessConfig with the shipped stopword list."""
    kwargs = {"stopwords": default_stopwords()}
    kwargs.update(overrides)
    return PreprocessConfig(**kwargs)


def tokenize(text: str) -> list[str]:
    """Lowercase and split into alphanumeric runs (no filtering)."""
    return _TOKEN_RE.findall(text.lower())


def raw_stems(text: str, cfg: PreprocessConfig) -> list[str]:
    """Stemmed tokens of the raw text with no stopword filtering.

    Used for lexicon matching (e.g. refutation words such as "not") that a
    stopword list would otherwise swallow.
    """
    words = tokenize(text)
    if cfg.stem:
        return [porter.stem(w) for w in words]
    return words


def preprocess(text: str, cfg: PreprocessConfig) -> TokenSeq:
    """Normalize text to a TokenSeq.

    Lowercases, splits on whitespace/punctuation boundaries, drops stopwords
    and stems the remainder. The stopword filter is applied to surface forms
    and again to stems so no configured stopword can survive normalization.
    Tokens are alphanumeric runs by construction, so pure-punctuation tokens
    never occur.
    """
    words = [w for w in tokenize(text) if w not in cfg.stopwords]
    if cfg.stem:
        words = [porter.stem(w) for w in words]
        words = [w for w in words if w not in cfg.stopwords]
    return TokenSeq(tokens=tuple(words), raw_sentences=tuple(split_sentences(text)))


def ngrams(tokens: Iterable[str], n: int) -> set[tuple[str, ...]]:
    """All contiguous n-token windows as a set; short inputs give the empty set."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    toks = list(tokens)
    return {tuple(toks[i : i + n]) for i in range(len(toks) - n + 1)}


def intro(body_text: str) -> str:
    """First ``INTRO_CHARS`` code points of the raw body text."""
    return body_text[:INTRO_CHARS]


def split_sentences(text: str) -> list[str]:
    """Split on '.', '!' or '?' followed by whitespace; keeps terminators.

    Abbreviations ("Dr. Smith") split too; acceptable for sentence-averaged
    scores.
    """
    if not text.strip():
        return []
    parts = _SENTENCE_SPLIT_RE.split(text)
    return [p.strip() for p in parts if p.strip()]
