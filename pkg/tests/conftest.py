import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stancekit.simil import EmbeddingTable
from stancekit.textproc import PreprocessConfig

import synthdata

#: Directory expected to hold the official CSV files, if available.
OFFICIAL_DATA_DIR = Path(os.environ.get("FNC1_DATA_DIR", "data/fnc-1"))

_OFFICIAL_FILES = (
    "train_bodies.csv",
    "train_stances.csv",
    "competition_test_bodies.csv",
    "competition_test_stances.csv",
)


def official_data_available() -> bool:
    return all((OFFICIAL_DATA_DIR / name).exists() for name in _OFFICIAL_FILES)


requires_official_data = pytest.mark.skipif(
    not official_data_available(),
    reason=f"official dataset not found under {OFFICIAL_DATA_DIR} "
           "(set FNC1_DATA_DIR to enable)",
)


@pytest.fixture(scope="session")
def tiny_cfg() -> PreprocessConfig:
    return PreprocessConfig(
        stopwords=frozenset({"the", "a", "an", "of", "to", "and", "in", "is"}),
        stem=True,
        ngram_n=2,
    )


@pytest.fixture(scope="session")
def synth_embeddings() -> EmbeddingTable:
    table = synthdata.make_embeddings()
    return EmbeddingTable(dim=10, vectors=table)


@pytest.fixture(scope="session")
def small_train_test():
    """A small but learnable train/test corpus pair (shared across tests).

    The refute-word noise rates are chosen so the unresampled model starves
    on the rare disagree class while oversampling recovers part of its
    recall, mirroring the real task's shape.
    """
    from stancekit.corpus import Stance

    train_counts = {Stance.AGREE: 360, Stance.DISAGREE: 55,
                    Stance.DISCUSS: 850, Stance.UNRELATED: 2700}
    test_counts = {Stance.AGREE: 170, Stance.DISAGREE: 60,
                   Stance.DISCUSS: 400, Stance.UNRELATED: 1370}
    train = synthdata.generate(train_counts, n_bodies=160, seed=11,
                               first_body_id=0, refute_present=0.45,
                               refute_crosstalk=0.15)
    test = synthdata.generate(test_counts, n_bodies=90, seed=13,
                              first_body_id=10_000, refute_present=0.45,
                              refute_crosstalk=0.15)
    return train, test


@pytest.fixture(scope="session")
def small_resources(small_train_test, tiny_cfg, synth_embeddings):
    """Resources fitted on the small training corpus, plus its features."""
    from stancekit.features import LexiconSentimentProvider, extract_features
    from stancekit.pipeline import LdaSettings, ResourceSpec, fit_resources
    from stancekit.textproc import default_stopwords

    train, test = small_train_test
    cfg = PreprocessConfig(stopwords=default_stopwords(), stem=True, ngram_n=2)
    spec = ResourceSpec(
        cfg=cfg,
        embeddings=synth_embeddings,
        sentiment=LexiconSentimentProvider.default(cfg),
        lda=LdaSettings(n_topics=6, train_iters=100, infer_iters=20),
        seed=5,
    )
    res = fit_resources(train, spec)
    train_rows, _ = extract_features(train, res)
    test_rows, _ = extract_features(test, res)
    return res, train_rows, test_rows
