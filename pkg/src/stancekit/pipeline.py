"""1-stage and 2-stage classifier assembly, bundles and grid search.

The 2-stage variant first separates related from unrelated pairs, then
assigns agree/disagree/discuss to the related ones; stage 2 is trained on
the gold related subset. Oversampling, when configured, duplicates
minority-class rows before training and never touches evaluation data.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Sequence

import numpy as np

from . import gbdt, scoring, topics
from .corpus import (RELATED_STANCES, STANCE_INDEX, STANCE_ORDER, Dataset,
                     Stance, make_folds, oversample_draw)
from .features import (FEATURE_NAMES, FeatureResources, FeatureVector,
                       extract_features)
from .gbdt import BoostedEnsemble, TrainParams

_PLAN_FORMAT = "stance-plan-v1"

ONE_STAGE = "1stage"
TWO_STAGE = "2stage"

_RELATED_CLASSES = (Stance.AGREE, Stance.DISAGREE, Stance.DISCUSS)


@dataclass(frozen=True)
class OversampleSpec:
    """Duplicate ``target`` until it matches the count of ``to_match``."""

    target: Stance = Stance.DISAGREE
    to_match: Stance = Stance.AGREE


def _mask_columns(X: np.ndarray, names: Sequence[str] | None) -> np.ndarray:
    """Restrict a full feature matrix to a mask; no mask means no slicing."""
    if names is None:
        return X
    cols = np.array(sorted(FEATURE_NAMES.index(n) for n in set(names)))
    return X[:, cols]


def _check_feature_mask(names: Sequence[str] | None) -> None:
    if names is None:
        return
    if not names:
        raise ValueError("a feature mask cannot be empty")
    unknown = [n for n in names if n not in FEATURE_NAMES]
    if unknown:
        raise ValueError(f"unknown feature name(s): {', '.join(unknown)}")


@dataclass(frozen=True)
class StagePlan:
    """Classifier configuration.

    ``stage1_features``/``stage2_features`` optionally restrict a stage to a
    subset of the 20 features; the default is the full vector for both.
    """

    variant: str = TWO_STAGE
    stage1: TrainParams = TrainParams()
    stage2: TrainParams = TrainParams()
    oversample: OversampleSpec | None = None
    stage1_features: tuple[str, ...] | None = None
    stage2_features: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.variant not in (ONE_STAGE, TWO_STAGE):
            raise ValueError(f"unknown plan variant {self.variant!r}")
        _check_feature_mask(self.stage1_features)
        _check_feature_mask(self.stage2_features)

    def to_dict(self) -> dict:
        return {
            "version": _PLAN_FORMAT,
            "variant": self.variant,
            "stage1": vars(self.stage1).copy(),
            "stage2": vars(self.stage2).copy(),
            "oversample": (
                {"target": self.oversample.target.value,
                 "to_match": self.oversample.to_match.value}
                if self.oversample else None
            ),
            "stage1_features": list(self.stage1_features) if self.stage1_features else None,
            "stage2_features": list(self.stage2_features) if self.stage2_features else None,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StagePlan":
        if payload.get("version") != _PLAN_FORMAT:
            raise ValueError(f"unsupported plan version {payload.get('version')!r}")
        over = payload.get("oversample")
        s1f = payload.get("stage1_features")
        s2f = payload.get("stage2_features")
        return cls(
            variant=payload["variant"],
            stage1=TrainParams(**payload["stage1"]),
            stage2=TrainParams(**payload["stage2"]),
            oversample=OversampleSpec(
                target=Stance(over["target"]), to_match=Stance(over["to_match"])
            ) if over else None,
            stage1_features=tuple(s1f) if s1f else None,
            stage2_features=tuple(s2f) if s2f else None,
        )


@dataclass
class TrainedPipeline:
    plan: StagePlan
    fingerprint: str
    stage1: BoostedEnsemble
    stage2: BoostedEnsemble | None = None


def _feature_matrix(rows: Sequence[tuple[int, Stance | None, FeatureVector]]
                    ) -> tuple[np.ndarray, list[Stance | None]]:
    X = np.stack([fv.as_array() for _, _, fv in rows]) if rows else np.zeros((0, len(FEATURE_NAMES)))
    labels = [stance for _, stance, _ in rows]
    return X, labels


def _apply_oversample(X: np.ndarray, labels: list[Stance], spec: OversampleSpec,
                      seed: int) -> tuple[np.ndarray, list[Stance]]:
    target_count = sum(1 for s in labels if s == spec.to_match)
    extra = oversample_draw(labels, spec.target, target_count, seed)
    if not extra:
        return X, labels
    X_out = np.concatenate([X, X[extra]], axis=0)
    labels_out = labels + [labels[i] for i in extra]
    return X_out, labels_out


def train_from_features(plan: StagePlan,
                        rows: Sequence[tuple[int, Stance | None, FeatureVector]],
                        fingerprint: str) -> TrainedPipeline:
    """Train the configured plan from extracted feature rows."""
    X, labels = _feature_matrix(rows)
    if any(s is None for s in labels):
        raise ValueError("training rows must be labeled")
    if plan.oversample is not None:
        X, labels = _apply_oversample(X, labels, plan.oversample, plan.stage1.seed)

    if plan.variant == ONE_STAGE:
        y = np.array([STANCE_INDEX[s] for s in labels], dtype=np.int64)
        model = gbdt.fit(_mask_columns(X, plan.stage1_features), y, plan.stage1,
                         n_classes=4)
        return TrainedPipeline(plan=plan, fingerprint=fingerprint, stage1=model)

    y_bin = np.array([0 if s in RELATED_STANCES else 1 for s in labels], dtype=np.int64)
    stage1 = gbdt.fit(_mask_columns(X, plan.stage1_features), y_bin, plan.stage1,
                      n_classes=2)
    related_idx = [i for i, s in enumerate(labels) if s in RELATED_STANCES]
    if not related_idx:
        raise ValueError("cannot train stage 2: no related instances")
    X_rel = _mask_columns(X[related_idx], plan.stage2_features)
    y_rel = np.array(
        [_RELATED_CLASSES.index(labels[i]) for i in related_idx], dtype=np.int64
    )
    stage2 = gbdt.fit(X_rel, y_rel, plan.stage2, n_classes=3)
    return TrainedPipeline(plan=plan, fingerprint=fingerprint, stage1=stage1,
                           stage2=stage2)


def train(plan: StagePlan, train_ds: Dataset, resources: FeatureResources,
          jobs: int = 1) -> TrainedPipeline:
    """Extract features for the training dataset and train the plan."""
    rows, _ = extract_features(train_ds, resources, jobs=jobs)
    return train_from_features(plan, rows, resources.fingerprint())


def predict_matrix(tp: TrainedPipeline, X: np.ndarray) -> list[Stance]:
    """Predict stances for a feature matrix.

    2-stage routing: a stage-1 unrelated verdict is final; related pairs get
    stage 2's argmax over the three related classes.
    """
    X = np.asarray(X, dtype=np.float64)
    X1 = _mask_columns(X, tp.plan.stage1_features)
    if tp.plan.variant == ONE_STAGE:
        labels = gbdt.predict_label(tp.stage1, X1)
        return [STANCE_ORDER[i] for i in np.atleast_1d(labels)]
    bin_labels = np.atleast_1d(gbdt.predict_label(tp.stage1, X1))
    out: list[Stance] = [Stance.UNRELATED] * X.shape[0]
    related_rows = np.nonzero(bin_labels == 0)[0]
    if related_rows.size:
        X2 = _mask_columns(X[related_rows], tp.plan.stage2_features)
        fine = np.atleast_1d(gbdt.predict_label(tp.stage2, X2))
        for row, cls in zip(related_rows, fine):
            out[row] = _RELATED_CLASSES[cls]
    return out


def predict_from_features(tp: TrainedPipeline,
                          rows: Sequence[tuple[int, Stance | None, FeatureVector]],
                          fingerprint: str | None = None) -> list[Stance]:
    """Predict from cached feature rows, refusing a mismatched cache."""
    if fingerprint is not None and fingerprint != tp.fingerprint:
        raise ValueError(
            "feature cache fingerprint does not match the trained pipeline"
        )
    X, _ = _feature_matrix(rows)
    return predict_matrix(tp, X)


def predict(tp: TrainedPipeline, ds: Dataset, resources: FeatureResources,
            jobs: int = 1) -> list[Stance]:
    """Extract features for a dataset and predict its stances.

    The resources must be the ones the pipeline was trained with; a
    fingerprint mismatch is an error.
    """
    rows, _ = extract_features(ds, resources, jobs=jobs)
    return predict_from_features(tp, rows, resources.fingerprint())


def save_bundle(tp: TrainedPipeline, out_dir: str | Path,
                resources_dir: str | Path | None = None) -> None:
    """Write plan.json, per-stage models and the resources/ directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan_payload = tp.plan.to_dict()
    plan_payload["fingerprint"] = tp.fingerprint
    with open(out / "plan.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(plan_payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    gbdt.save_model(tp.stage1, out / "stage1.model.json")
    if tp.stage2 is not None:
        gbdt.save_model(tp.stage2, out / "stage2.model.json")
    if resources_dir is not None:
        res_out = out / "resources"
        if res_out.exists():
            shutil.rmtree(res_out)
        shutil.copytree(resources_dir, res_out)


def load_bundle(bundle_dir: str | Path) -> TrainedPipeline:
    bundle = Path(bundle_dir)
    with open(bundle / "plan.json", encoding="utf-8") as fh:
        payload = json.load(fh)
    fingerprint = payload.pop("fingerprint", "")
    plan = StagePlan.from_dict(payload)
    stage1 = gbdt.load_model(bundle / "stage1.model.json")
    stage2_path = bundle / "stage2.model.json"
    stage2 = gbdt.load_model(stage2_path) if stage2_path.exists() else None
    if plan.variant == TWO_STAGE and stage2 is None:
        raise ValueError(f"{bundle}: 2-stage plan missing stage2.model.json")
    return TrainedPipeline(plan=plan, fingerprint=fingerprint, stage1=stage1,
                           stage2=stage2)


@dataclass(frozen=True)
class LdaSettings:
    n_topics: int = 100
    alpha: float | None = None  # defaults to 50 / n_topics
    beta: float = 0.01
    train_iters: int = 500
    infer_iters: int = 50

    def resolved_alpha(self) -> float:
        return self.alpha if self.alpha is not None else 50.0 / self.n_topics


@dataclass
class ResourceSpec:
    """Recipe for fitting FeatureResources on a training dataset.

    Static inputs (embedding table, providers) are shared; fitted inputs
    (tf-idf, topic model) are learned from whatever training portion is
    passed in, which keeps cross-validation folds leak-free.
    """

    cfg: object  # PreprocessConfig
    embeddings: object  # EmbeddingTable
    sentiment: object
    lda: LdaSettings = LdaSettings()
    lda_corpus_docs: list | None = None  # external topic corpus (token lists)
    annotations: object | None = None
    sentence_scores: object | None = None
    refute_stems: frozenset | None = None
    wmd_cap: float = 10.0
    seed: int = 0


def fit_resources(train_ds: Dataset, spec: ResourceSpec,
                  lda_model: topics.LdaModel | None = None) -> FeatureResources:
    """Fit tf-idf and the topic model on the training dataset.

    The tf-idf corpus is the union of training headlines and bodies. The
    topic model trains on the training bodies unless an external corpus or a
    pretrained model is supplied.
    """
    from .features import FeatureResources as FR
    from .simil import fit_tfidf
    from .textproc import preprocess

    body_seqs = [preprocess(body.text, spec.cfg)
                 for _, body in sorted(train_ds.bodies.items())]
    headline_seqs = [preprocess(inst.headline, spec.cfg)
                     for inst in train_ds.instances]
    tfidf = fit_tfidf(headline_seqs + body_seqs)
    if lda_model is None:
        corpus = spec.lda_corpus_docs
        if corpus is None:
            corpus = [seq.tokens for seq in body_seqs]
        corpus = [doc for doc in corpus if len(doc) > 0]
        lda_model = topics.lda_train(
            corpus, spec.lda.n_topics, spec.lda.resolved_alpha(), spec.lda.beta,
            spec.lda.train_iters, spec.seed,
        )
    kwargs = {}
    if spec.refute_stems is not None:
        kwargs["refute_stems"] = spec.refute_stems
    return FR(
        cfg=spec.cfg,
        tfidf=tfidf,
        embeddings=spec.embeddings,
        lda=lda_model,
        sentiment=spec.sentiment,
        annotations=spec.annotations,
        sentence_scores=spec.sentence_scores,
        wmd_cap=spec.wmd_cap,
        lda_infer_iters=spec.lda.infer_iters,
        seed=spec.seed,
        **kwargs,
    )


@dataclass(frozen=True)
class GridPointResult:
    overrides: dict
    fold_scores: tuple[float, ...]
    mean_relative: float


def grid_search(plan_template: StagePlan, grid: dict[str, list],
                ds: Dataset, k: int, seed: int, spec: ResourceSpec,
                jobs: int = 1) -> tuple[StagePlan, list[GridPointResult]]:
    """Exhaustive grid search scored by mean relative FNC score over k folds.

    Parameter overrides apply to both stages. Resources (tf-idf, topic
    model) are refit per fold on the fold's training portion so holdout
    bodies never leak into fitted resources. Ties prefer fewer boosting
    rounds, then lower max depth, then enumeration order.
    """
    if not grid:
        raise ValueError("grid must name at least one parameter")
    valid = set(vars(TrainParams()))
    for name in grid:
        if name not in valid:
            raise ValueError(f"unknown grid parameter {name!r}")
    folds = make_folds(ds, k, seed)

    def subset(indices) -> Dataset:
        instances = tuple(ds.instances[i] for i in indices)
        bodies = {inst.body_id: ds.bodies[inst.body_id] for inst in instances}
        return Dataset(instances=instances, bodies=bodies)

    fold_features: list[tuple[list, list]] = []
    for train_idx, holdout_idx in folds:
        fold_train = subset(train_idx)
        fold_holdout = subset(holdout_idx)
        res = fit_resources(fold_train, spec)
        train_rows, _ = extract_features(fold_train, res, jobs=jobs)
        holdout_rows, _ = extract_features(fold_holdout, res, jobs=jobs)
        fold_features.append((train_rows, holdout_rows))

    return grid_search_from_features(plan_template, grid, fold_features)


def grid_search_from_features(plan_template: StagePlan, grid: dict[str, list],
                              fold_features: Sequence[tuple[Sequence, Sequence]],
                              ) -> tuple[StagePlan, list[GridPointResult]]:
    """Evaluate every grid point on prepared per-fold (train, holdout) rows."""
    def plan_for(overrides: dict) -> StagePlan:
        return StagePlan(
            variant=plan_template.variant,
            stage1=plan_template.stage1.replace(**overrides),
            stage2=plan_template.stage2.replace(**overrides),
            oversample=plan_template.oversample,
        )

    names = list(grid)
    results: list[GridPointResult] = []
    for combo in product(*(grid[name] for name in names)):
        overrides = dict(zip(names, combo))
        plan = plan_for(overrides)
        fold_scores = []
        for train_rows, holdout_rows in fold_features:
            tp = train_from_features(plan, train_rows, fingerprint="cv")
            truth = [stance for _, stance, _ in holdout_rows]
            pred = predict_from_features(tp, holdout_rows)
            score, max_score = scoring.fnc_score(truth, pred)
            fold_scores.append(score / max_score)
        results.append(GridPointResult(
            overrides=overrides,
            fold_scores=tuple(fold_scores),
            mean_relative=float(np.mean(fold_scores)),
        ))

    def sort_key(r: GridPointResult):
        params = plan_template.stage1.replace(**r.overrides)
        return (-r.mean_relative, params.n_rounds, params.max_depth)

    best = min(results, key=sort_key)
    return plan_for(best.overrides), results
