"""The 20 hand-crafted headline/body features and their disk cache.

Parse-based overlaps and sentiment come from pluggable providers so external
annotation tooling can be swapped in through sidecar files; with no sidecar
the dependency overlaps are constantly zero and flagged inactive in the
extraction stats. Extraction is pure given immutable resources and may run
with any degree of parallelism.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import porter, simil, topics
from .corpus import ArticleBody, Dataset, Stance, parse_stance
from .simil import EmbeddingTable, TfIdfModel
from .textproc import (PreprocessConfig, TokenSeq, intro, ngrams, preprocess,
                       raw_stems, split_sentences)

#: Canonical feature order used by vectors, caches and trained models.
FEATURE_NAMES: tuple[str, ...] = (
    "dep_object_overlap",
    "dep_subject_overlap",
    "ngram_overlap",
    "ngram_overlap_intro",
    "word_overlap",
    "word_overlap_intro",
    "cosine_count",
    "cosine_tfidf",
    "doc_similarity",
    "doc_similarity_intro",
    "hamming_distance",
    "wmdistance",
    "len_stance",
    "len_body",
    "KL_pk_qk",
    "KL_qk_pk",
    "refute",
    "refute_intro",
    "sentiment_body",
    "sentiment_stance",
)

#: Word list whose (stemmed) occurrence in a body flags an explicit refutation.
DEFAULT_REFUTE_WORDS: tuple[str, ...] = (
    "fake", "fraud", "hoax", "not", "deny", "fabricate", "authenticity",
)

_INT_FEATURES = {"dep_object_overlap", "dep_subject_overlap", "len_stance",
                 "len_body", "refute", "refute_intro"}


@dataclass(frozen=True)
class FeatureVector:
    dep_object_overlap: int
    dep_subject_overlap: int
    ngram_overlap: float
    ngram_overlap_intro: float
    word_overlap: float
    word_overlap_intro: float
    cosine_count: float
    cosine_tfidf: float
    doc_similarity: float
    doc_similarity_intro: float
    hamming_distance: float
    wmdistance: float
    len_stance: int
    len_body: int
    KL_pk_qk: float
    KL_qk_pk: float
    refute: int
    refute_intro: int
    sentiment_body: float
    sentiment_stance: float

    def __post_init__(self) -> None:
        for name in FEATURE_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"feature {name} is non-finite: {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array([float(getattr(self, n)) for n in FEATURE_NAMES])


def jaccard(a: set, b: set) -> float:
    """Intersection over union; two empty sets give 0.0."""
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


@dataclass(frozen=True)
class SideAnnotations:
    subjects: frozenset[str]
    objects: frozenset[str]


@dataclass(frozen=True)
class PairAnnotations:
    headline: SideAnnotations
    body: SideAnnotations


class FileAnnotationProvider:
    """Grammatical subject/object annotations loaded from a sidecar TSV.

    Rows are ``pair_id <TAB> side(headline|body) <TAB> role(subj|obj) <TAB>
    token``; tokens are normalized with the shared stemmer so overlaps match
    the text pipeline's token space.
    """

    def __init__(self, entries: dict[int, PairAnnotations]):
        self._entries = entries

    @classmethod
    def from_tsv(cls, path: str | Path, cfg: PreprocessConfig) -> "FileAnnotationProvider":
        raw: dict[int, dict[str, set[str]]] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 4:
                    raise ValueError(f"{path}: line {line_no}: expected 4 fields")
                pair_id_s, side, role, token = parts
                try:
                    pair_id = int(pair_id_s)
                except ValueError:
                    raise ValueError(f"{path}: line {line_no}: bad pair id") from None
                if side not in ("headline", "body") or role not in ("subj", "obj"):
                    raise ValueError(f"{path}: line {line_no}: bad side/role")
                token = token.strip().lower()
                if cfg.stem:
                    token = porter.stem(token)
                raw.setdefault(pair_id, {
                    "headline/subj": set(), "headline/obj": set(),
                    "body/subj": set(), "body/obj": set(),
                })[f"{side}/{role}"].add(token)
        entries = {
            pid: PairAnnotations(
                headline=SideAnnotations(
                    subjects=frozenset(sides["headline/subj"]),
                    objects=frozenset(sides["headline/obj"]),
                ),
                body=SideAnnotations(
                    subjects=frozenset(sides["body/subj"]),
                    objects=frozenset(sides["body/obj"]),
                ),
            )
            for pid, sides in raw.items()
        }
        return cls(entries)

    def lookup(self, pair_id: int) -> PairAnnotations | None:
        return self._entries.get(pair_id)


def grammatical_overlap(pair_id: int, provider) -> tuple[int, int]:
    """(subject overlap, object overlap) counts; provider miss gives (0, 0)."""
    ann = provider.lookup(pair_id) if provider is not None else None
    if ann is None:
        return 0, 0
    subj = len(ann.headline.subjects & ann.body.subjects)
    obj = len(ann.headline.objects & ann.body.objects)
    return subj, obj


class LexiconSentimentProvider:
    """Mean per-token lexicon score of a sentence, bounded to [-1, 1].

    Lexicon keys are stemmed with the shared stemmer; tokens without a
    lexicon entry are skipped and a fully uncovered sentence scores 0.0.
    """

    def __init__(self, scores: dict[str, float], cfg: PreprocessConfig):
        self._scores = scores
        self._cfg = cfg

    @classmethod
    def from_tsv(cls, path: str | Path, cfg: PreprocessConfig) -> "LexiconSentimentProvider":
        scores: dict[str, float] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ValueError(f"{path}: line {line_no}: expected 2 fields")
                try:
                    value = float(parts[1])
                except ValueError:
                    raise ValueError(f"{path}: line {line_no}: bad score") from None
                if not -1.0 <= value <= 1.0:
                    raise ValueError(f"{path}: line {line_no}: score outside [-1, 1]")
                key = parts[0].strip().lower()
                if cfg.stem:
                    key = porter.stem(key)
                scores.setdefault(key, value)
        return cls(scores, cfg)

    @classmethod
    def default(cls, cfg: PreprocessConfig) -> "LexiconSentimentProvider":
        from importlib import resources as importlib_resources
        path = importlib_resources.files("stancekit").joinpath("data/sentiment_lexicon.tsv")
        scores: dict[str, float] = {}
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line or line.startswith("#"):
                continue
            word, value = line.split("\t")
            key = porter.stem(word) if cfg.stem else word
            scores.setdefault(key, float(value))
        return cls(scores, cfg)

    def score(self, sentence: str) -> float:
        covered = [self._scores[t] for t in raw_stems(sentence, self._cfg)
                   if t in self._scores]
        if not covered:
            return 0.0
        value = sum(covered) / len(covered)
        return max(-1.0, min(1.0, value))

    def digest_items(self):
        return sorted(self._scores.items())


class SentenceScoreTable:
    """Optional per-sentence score sidecar overriding the lexicon provider.

    Rows: ``pair_id <TAB> side(headline|body) <TAB> sentence_index <TAB>
    score``. A pair/side present in the table is scored as the mean of its
    sentence scores.
    """

    def __init__(self, scores: dict[tuple[int, str], dict[int, float]]):
        self._scores = scores

    @classmethod
    def from_tsv(cls, path: str | Path) -> "SentenceScoreTable":
        table: dict[tuple[int, str], dict[int, float]] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 4:
                    raise ValueError(f"{path}: line {line_no}: expected 4 fields")
                pair_id_s, side, index_s, score_s = parts
                if side not in ("headline", "body"):
                    raise ValueError(f"{path}: line {line_no}: bad side {side!r}")
                try:
                    key = (int(pair_id_s), side)
                    index = int(index_s)
                    value = float(score_s)
                except ValueError:
                    raise ValueError(f"{path}: line {line_no}: bad row") from None
                if not -1.0 <= value <= 1.0:
                    raise ValueError(f"{path}: line {line_no}: score outside [-1, 1]")
                table.setdefault(key, {})[index] = value
        return cls(table)

    def mean_score(self, pair_id: int, side: str) -> float | None:
        entry = self._scores.get((pair_id, side))
        if not entry:
            return None
        return sum(entry.values()) / len(entry)


def sentiment_avg(text: str, provider) -> float:
    """Mean provider score over the text's sentences; no sentences -> 0.0."""
    sentences = split_sentences(text)
    if not sentences:
        return 0.0
    return sum(provider.score(s) for s in sentences) / len(sentences)


def refute_flag(stems: Iterable[str], refute_stems: frozenset[str]) -> int:
    """1 iff any stemmed token matches the refutation word list."""
    return int(any(tok in refute_stems for tok in stems))


def load_refute_words(path: str | Path) -> tuple[str, ...]:
    """Read a refutation word file: one word per line, ``#`` comments."""
    from .textproc import parse_stopword_lines
    with open(path, encoding="utf-8") as fh:
        words = tuple(parse_stopword_lines(fh))
    if not words:
        raise ValueError(f"{path}: empty refutation word list")
    return words


def refute_stems_for(words: Sequence[str], cfg: PreprocessConfig) -> frozenset[str]:
    if cfg.stem:
        return frozenset(porter.stem(w.lower()) for w in words)
    return frozenset(w.lower() for w in words)


@dataclass
class FeatureResources:
    """Everything extraction needs; fitted on training data only."""

    cfg: PreprocessConfig
    tfidf: TfIdfModel
    embeddings: EmbeddingTable
    lda: topics.LdaModel
    sentiment: LexiconSentimentProvider
    annotations: FileAnnotationProvider | None = None
    sentence_scores: SentenceScoreTable | None = None
    refute_stems: frozenset[str] = None  # type: ignore[assignment]
    wmd_cap: float = simil.WMD_DEFAULT_CAP
    lda_infer_iters: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.refute_stems is None:
            self.refute_stems = refute_stems_for(DEFAULT_REFUTE_WORDS, self.cfg)

    def fingerprint(self) -> str:
        """Digest of the fitted, split-independent extraction inputs.

        Pair-keyed sidecars (annotations, sentence scores) are data-side
        inputs and deliberately excluded: train and test caches extracted
        with the same fitted resources must share a fingerprint.
        """
        h = hashlib.sha256()

        def put(label: str, obj) -> None:
            h.update(label.encode())
            h.update(json.dumps(obj, sort_keys=True, default=str).encode())

        put("cfg", {
            "stopwords": sorted(self.cfg.stopwords),
            "stem": self.cfg.stem,
            "ngram_n": self.cfg.ngram_n,
        })
        vocab_terms = sorted(self.tfidf.vocab, key=self.tfidf.vocab.get)
        put("tfidf.vocab", vocab_terms)
        h.update(np.ascontiguousarray(self.tfidf.idf).tobytes())
        lda_terms = sorted(self.lda.vocab, key=self.lda.vocab.get)
        put("lda", {"k": self.lda.n_topics, "alpha": self.lda.alpha,
                    "beta": self.lda.beta, "vocab": lda_terms})
        h.update(np.ascontiguousarray(self.lda.topic_word_counts).tobytes())
        put("emb.dim", self.embeddings.dim)
        for token in sorted(self.embeddings.vectors):
            h.update(token.encode())
            h.update(np.ascontiguousarray(self.embeddings.vectors[token]).tobytes())
        put("refute", sorted(self.refute_stems))
        put("wmd_cap", self.wmd_cap)
        put("lda_infer_iters", self.lda_infer_iters)
        put("seed", self.seed)
        put("lexicon", list(self.sentiment.digest_items()))
        return h.hexdigest()


def _content_seed(master_seed: int, text: str) -> int:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return topics.mix_seed(master_seed, int.from_bytes(digest[:8], "big"))


@dataclass
class _TextProfile:
    seq: TokenSeq
    token_set: frozenset
    ngram_set: frozenset
    tfidf: dict[int, float]
    avg_emb: np.ndarray
    theta: np.ndarray
    stems: tuple[str, ...]
    lexicon_sentiment: float


def _profile(text: str, res: FeatureResources) -> _TextProfile:
    seq = preprocess(text, res.cfg)
    theta = topics.lda_infer(seq, res.lda, res.lda_infer_iters,
                             _content_seed(res.seed, text)).theta
    return _TextProfile(
        seq=seq,
        token_set=frozenset(seq.tokens),
        ngram_set=frozenset(ngrams(seq.tokens, res.cfg.ngram_n)),
        tfidf=res.tfidf.transform(seq.tokens),
        avg_emb=simil.avg_embedding(seq.tokens, res.embeddings),
        theta=theta,
        stems=tuple(raw_stems(text, res.cfg)),
        lexicon_sentiment=sentiment_avg(text, res.sentiment),
    )


@dataclass
class _IntroProfile:
    token_set: frozenset
    ngram_set: frozenset
    avg_emb: np.ndarray
    stems: tuple[str, ...]


def _intro_profile(body_text: str, res: FeatureResources) -> _IntroProfile:
    text = intro(body_text)
    seq = preprocess(text, res.cfg)
    return _IntroProfile(
        token_set=frozenset(seq.tokens),
        ngram_set=frozenset(ngrams(seq.tokens, res.cfg.ngram_n)),
        avg_emb=simil.avg_embedding(seq.tokens, res.embeddings),
        stems=tuple(raw_stems(text, res.cfg)),
    )


def _pair_features(hp: _TextProfile, bp: _TextProfile, ip: _IntroProfile,
                   pair_id: int, res: FeatureResources) -> FeatureVector:
    subj, obj = grammatical_overlap(pair_id, res.annotations)
    u, v = simil.pair_binary_vectors(hp.seq, bp.seq)

    sentiment_body = None
    sentiment_stance = None
    if res.sentence_scores is not None:
        sentiment_body = res.sentence_scores.mean_score(pair_id, "body")
        sentiment_stance = res.sentence_scores.mean_score(pair_id, "headline")
    if sentiment_body is None:
        sentiment_body = bp.lexicon_sentiment
    if sentiment_stance is None:
        sentiment_stance = hp.lexicon_sentiment

    return FeatureVector(
        dep_object_overlap=obj,
        dep_subject_overlap=subj,
        ngram_overlap=jaccard(hp.ngram_set, bp.ngram_set),
        ngram_overlap_intro=jaccard(hp.ngram_set, ip.ngram_set),
        word_overlap=jaccard(hp.token_set, bp.token_set),
        word_overlap_intro=jaccard(hp.token_set, ip.token_set),
        cosine_count=simil.cosine(u, v) if u.size else 0.0,
        cosine_tfidf=simil.cosine_sparse(hp.tfidf, bp.tfidf),
        doc_similarity=simil.cosine(hp.avg_emb, bp.avg_emb),
        doc_similarity_intro=simil.cosine(hp.avg_emb, ip.avg_emb),
        hamming_distance=simil.hamming_norm(u, v),
        wmdistance=simil.wmd(hp.seq, bp.seq, res.embeddings, cap=res.wmd_cap),
        len_stance=len(hp.seq),
        len_body=len(bp.seq),
        KL_pk_qk=topics.kl_divergence(hp.theta, bp.theta),
        KL_qk_pk=topics.kl_divergence(bp.theta, hp.theta),
        refute=refute_flag(bp.stems, res.refute_stems),
        refute_intro=refute_flag(ip.stems, res.refute_stems),
        sentiment_body=sentiment_body,
        sentiment_stance=sentiment_stance,
    )


def extract_pair(headline: str, body: ArticleBody, res: FeatureResources,
                 pair_id: int = -1) -> FeatureVector:
    """Compute all 20 features for one headline-body pair."""
    hp = _profile(headline, res)
    bp = _profile(body.text, res)
    ip = _intro_profile(body.text, res)
    return _pair_features(hp, bp, ip, pair_id, res)


@dataclass
class ExtractionStats:
    pairs: int = 0
    annotation_hits: int = 0
    sidecar_sentiment_hits: int = 0

    def inactive_features(self, res: FeatureResources) -> list[str]:
        inactive = []
        if self.annotation_hits == 0:
            inactive += ["dep_object_overlap", "dep_subject_overlap"]
        if len(res.embeddings) == 0:
            inactive += ["doc_similarity", "doc_similarity_intro", "wmdistance"]
        return inactive


def _extract_chunk(ds: Dataset, res: FeatureResources,
                   pair_ids: Sequence[int]) -> list[tuple[int, Stance | None, FeatureVector]]:
    text_cache: dict[str, _TextProfile] = {}
    intro_cache: dict[int, _IntroProfile] = {}
    rows = []
    for pid in pair_ids:
        inst = ds.instances[pid]
        hp = text_cache.get(inst.headline)
        if hp is None:
            hp = text_cache[inst.headline] = _profile(inst.headline, res)
        body = ds.bodies[inst.body_id]
        bp = text_cache.get(body.text)
        if bp is None:
            bp = text_cache[body.text] = _profile(body.text, res)
        ip = intro_cache.get(inst.body_id)
        if ip is None:
            ip = intro_cache[inst.body_id] = _intro_profile(body.text, res)
        rows.append((pid, inst.stance, _pair_features(hp, bp, ip, pid, res)))
    return rows


def extract_features(ds: Dataset, res: FeatureResources, jobs: int = 1,
                     ) -> tuple[list[tuple[int, Stance | None, FeatureVector]], ExtractionStats]:
    """Extract features for every pair in dataset order.

    Per-text computations (normalization, tf-idf, embeddings, topic
    inference) are cached by content, so repeated headlines and bodies are
    profiled once. With ``jobs > 1`` contiguous chunks run in parallel
    worker processes; results are order-preserving and identical to a
    single-process run.
    """
    pair_ids = list(range(len(ds.instances)))
    if jobs > 1 and len(pair_ids) > 64:
        from joblib import Parallel, delayed
        n_chunks = min(len(pair_ids), jobs * 4)
        bounds = np.linspace(0, len(pair_ids), n_chunks + 1, dtype=int)
        chunks = [pair_ids[bounds[i]:bounds[i + 1]] for i in range(n_chunks)
                  if bounds[i] < bounds[i + 1]]
        results = Parallel(n_jobs=jobs)(
            delayed(_extract_chunk)(ds, res, chunk) for chunk in chunks
        )
        rows = [row for chunk_rows in results for row in chunk_rows]
    else:
        rows = _extract_chunk(ds, res, pair_ids)

    stats = ExtractionStats(pairs=len(rows))
    if res.annotations is not None:
        stats.annotation_hits = sum(
            1 for pid in pair_ids if res.annotations.lookup(pid) is not None
        )
    if res.sentence_scores is not None:
        stats.sidecar_sentiment_hits = sum(
            1 for pid in pair_ids
            if res.sentence_scores.mean_score(pid, "body") is not None
            or res.sentence_scores.mean_score(pid, "headline") is not None
        )
    return rows, stats


_CACHE_HEADER = ("pair_id", "stance") + FEATURE_NAMES


def _format_value(name: str, value) -> str:
    if name in _INT_FEATURES:
        return str(int(value))
    return format(float(value), ".9g")


def write_feature_cache(rows: Iterable[tuple[int, Stance | None, FeatureVector]],
                        path: str | Path) -> None:
    """Write the TSV cache: pair_id, stance, then the 20 canonical features.

    Reals carry 9 significant digits; re-serializing a read cache reproduces
    the file byte for byte.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(_CACHE_HEADER) + "\n")
        for pair_id, stance, fv in rows:
            cells = [str(int(pair_id)), stance.value if stance is not None else ""]
            for name in FEATURE_NAMES:
                value = getattr(fv, name)
                if not math.isfinite(value):
                    raise ValueError(f"pair {pair_id}: feature {name} is non-finite")
                cells.append(_format_value(name, value))
            fh.write("\t".join(cells) + "\n")


def read_feature_cache(path: str | Path) -> list[tuple[int, Stance | None, FeatureVector]]:
    """Read a feature cache written by :func:`write_feature_cache`."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != _CACHE_HEADER:
            missing = [c for c in _CACHE_HEADER if c not in header]
            if missing:
                raise ValueError(f"{path}: header missing column {missing[0]!r}")
            raise ValueError(f"{path}: unexpected header layout")
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != len(_CACHE_HEADER):
                raise ValueError(
                    f"{path}: row {line_no}: expected {len(_CACHE_HEADER)} fields"
                )
            pair_id = int(cells[0])
            stance = parse_stance(cells[1]) if cells[1] else None
            values = {}
            for name, cell in zip(FEATURE_NAMES, cells[2:]):
                values[name] = int(cell) if name in _INT_FEATURES else float(cell)
            rows.append((pair_id, stance, FeatureVector(**values)))
    return rows
