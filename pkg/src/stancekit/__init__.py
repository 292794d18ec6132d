"""Stance detection for headline/body news pairs.

Hand-crafted text features feed a from-scratch gradient-boosted tree
classifier in 1-stage and 2-stage configurations, evaluated with the
weighted FNC-1 metric.
"""

__version__ = "0.1.0"

from .corpus import (ArticleBody, Dataset, Stance, StanceInstance,
                     load_dataset, make_folds, oversample)
from .features import FEATURE_NAMES, FeatureVector, extract_pair
from .gbdt import BoostedEnsemble, TrainParams
from .scoring import ScoreReport, confusion, fnc_score

__all__ = [
    "ArticleBody",
    "BoostedEnsemble",
    "Dataset",
    "FEATURE_NAMES",
    "FeatureVector",
    "ScoreReport",
    "Stance",
    "StanceInstance",
    "TrainParams",
    "confusion",
    "extract_pair",
    "fnc_score",
    "load_dataset",
    "make_folds",
    "oversample",
    "__version__",
]
