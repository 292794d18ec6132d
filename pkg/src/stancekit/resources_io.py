"""Persistence for the fitted feature resources directory.

A resources directory is self-contained for reuse across pipeline runs:

    resources/
      config.json   normalization settings, lexicon, refutation stems,
                    embedding file reference, fingerprint
      tfidf.json    fitted tf-idf vocabulary and idf values
      lda.json      trained topic model

Embedding tables can be large, so only their path and content digest are
recorded; loading verifies the digest before trusting the file.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import simil, topics
from .features import (FeatureResources, FileAnnotationProvider,
                       LexiconSentimentProvider, SentenceScoreTable)
from .simil import EmbeddingTable
from .textproc import PreprocessConfig

_FORMAT = "stancekit-resources-v1"


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def save_resources(out_dir: str | Path, res: FeatureResources,
                   embeddings_path: str | Path | None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    simil.save_tfidf(res.tfidf, out / "tfidf.json")
    topics.save_lda(res.lda, out / "lda.json")
    config = {
        "version": _FORMAT,
        "preprocess": {
            "stopwords": sorted(res.cfg.stopwords),
            "stem": res.cfg.stem,
            "ngram_n": res.cfg.ngram_n,
        },
        "refute_stems": sorted(res.refute_stems),
        "wmd_cap": res.wmd_cap,
        "lda_infer_iters": res.lda_infer_iters,
        "seed": res.seed,
        "embeddings": {
            "path": str(embeddings_path) if embeddings_path else None,
            "digest": file_digest(embeddings_path) if embeddings_path else None,
        },
        "lexicon": [[tok, score] for tok, score in res.sentiment.digest_items()],
        "fingerprint": res.fingerprint(),
    }
    with open(out / "config.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(config, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_resources(res_dir: str | Path,
                   embeddings_override: str | Path | None = None,
                   annotations: FileAnnotationProvider | None = None,
                   sentence_scores: SentenceScoreTable | None = None,
                   ) -> FeatureResources:
    """Rebuild FeatureResources from a saved directory.

    ``embeddings_override`` points at a relocated copy of the original
    embedding file; its digest must match the recorded one. Pair-keyed
    sidecars are per-dataset inputs and attached fresh per invocation.
    """
    res_dir = Path(res_dir)
    with open(res_dir / "config.json", encoding="utf-8") as fh:
        config = json.load(fh)
    if config.get("version") != _FORMAT:
        raise ValueError(
            f"{res_dir}: unsupported resources version {config.get('version')!r}"
        )
    cfg = PreprocessConfig(
        stopwords=frozenset(config["preprocess"]["stopwords"]),
        stem=bool(config["preprocess"]["stem"]),
        ngram_n=int(config["preprocess"]["ngram_n"]),
    )
    emb_info = config["embeddings"]
    emb_path = embeddings_override or emb_info["path"]
    if emb_info["digest"] is None:
        if embeddings_override is not None:
            raise ValueError(
                "resources were fitted without embeddings; refusing an override"
            )
        table = EmbeddingTable.empty()
    else:
        if emb_path is None or not Path(emb_path).exists():
            raise FileNotFoundError(
                f"embedding file {emb_path!r} not found; pass its current location"
            )
        if file_digest(emb_path) != emb_info["digest"]:
            raise ValueError(f"{emb_path}: embedding file digest mismatch")
        table = simil.load_embeddings(emb_path)
    res = FeatureResources(
        cfg=cfg,
        tfidf=simil.load_tfidf(res_dir / "tfidf.json"),
        embeddings=table,
        lda=topics.load_lda(res_dir / "lda.json"),
        sentiment=LexiconSentimentProvider(
            dict((tok, float(score)) for tok, score in config["lexicon"]), cfg
        ),
        annotations=annotations,
        sentence_scores=sentence_scores,
        refute_stems=frozenset(config["refute_stems"]),
        wmd_cap=float(config["wmd_cap"]),
        lda_infer_iters=int(config["lda_infer_iters"]),
        seed=int(config["seed"]),
    )
    recorded = config.get("fingerprint")
    if recorded and res.fingerprint() != recorded:
        raise ValueError(f"{res_dir}: resources fingerprint mismatch after load")
    return res
