"""Gradient-boosted decision trees with a softmax multiclass objective.

Exact greedy split search over sorted distinct feature values, Newton leaf
weights with L2 regularization, per-round training log-loss tracking, and a
versioned JSON serialization. Boosting is inherently sequential; trained
ensembles are immutable and thread-safe for prediction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

MODEL_FORMAT = "gbdt-v1"


@dataclass(frozen=True)
class TrainParams:
    n_rounds: int = 1000
    learning_rate: float = 0.1
    max_depth: int = 6
    lambda_l2: float = 1.0
    gamma_min_gain: float = 0.0
    min_child_weight: float = 1.0
    subsample: float = 1.0
    colsample: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.lambda_l2 < 0 or self.gamma_min_gain < 0 or self.min_child_weight < 0:
            raise ValueError("regularization parameters must be >= 0")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must be in (0, 1]")
        if not 0.0 < self.colsample <= 1.0:
            raise ValueError("colsample must be in (0, 1]")

    def replace(self, **overrides) -> "TrainParams":
        values = asdict(self)
        values.update(overrides)
        return TrainParams(**values)


@dataclass(frozen=True)
class SplitCandidate:
    threshold: float
    gain: float


class Tree:
    """One regression tree stored as flat node arrays.

    ``feature[i] < 0`` marks node i as a leaf carrying ``weight[i]``;
    internal nodes route ``x[feature] < threshold`` to ``left``, else
    ``right``.
    """

    __slots__ = ("feature", "threshold", "left", "right", "weight")

    def __init__(self, feature, threshold, left, right, weight):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.weight = np.asarray(weight, dtype=np.float64)

    @classmethod
    def single_leaf(cls, weight: float) -> "Tree":
        return cls([-1], [0.0], [-1], [-1], [weight])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        idx = np.zeros(n, dtype=np.int32)
        while True:
            feat = self.feature[idx]
            internal = feat >= 0
            if not internal.any():
                break
            go_left = X[np.arange(n), np.maximum(feat, 0)] < self.threshold[idx]
            nxt = np.where(go_left, self.left[idx], self.right[idx])
            idx = np.where(internal, nxt, idx)
        return self.weight[idx]

    def to_node_dict(self, i: int = 0) -> dict:
        if self.feature[i] < 0:
            return {"weight": float(self.weight[i])}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "left": self.to_node_dict(int(self.left[i])),
            "right": self.to_node_dict(int(self.right[i])),
        }

    @classmethod
    def from_node_dict(cls, node: dict) -> "Tree":
        feature, threshold, left, right, weight = [], [], [], [], []

        def add(nd) -> int:
            if not isinstance(nd, dict):
                raise ValueError("malformed tree node: not an object")
            i = len(feature)
            if "weight" in nd:
                if set(nd) != {"weight"}:
                    raise ValueError(f"malformed leaf node: keys {sorted(nd)}")
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                weight.append(float(nd["weight"]))
                return i
            if set(nd) != {"feature", "threshold", "left", "right"}:
                raise ValueError(f"malformed internal node: keys {sorted(nd)}")
            feature.append(int(nd["feature"]))
            threshold.append(float(nd["threshold"]))
            left.append(-2)
            right.append(-2)
            weight.append(0.0)
            left[i] = add(nd["left"])
            right[i] = add(nd["right"])
            return i

        add(node)
        return cls(feature, threshold, left, right, weight)


@dataclass
class BoostedEnsemble:
    n_classes: int
    n_features: int
    base_score: float
    params: TrainParams
    trees: list[list[Tree]] = field(default_factory=list)  # [round][class]
    train_losses: list[float] = field(default_factory=list)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stabilized softmax along the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def grad_hess(labels: np.ndarray, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample softmax cross-entropy gradients and hessians.

    g[i, k] = p[i, k] - [y_i == k]; h[i, k] = p[i, k] * (1 - p[i, k]).
    """
    labels = np.asarray(labels)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ValueError(f"shape mismatch: labels {labels.shape}, probs {probs.shape}")
    g = probs.copy()
    g[np.arange(labels.size), labels] -= 1.0
    h = probs * (1.0 - probs)
    return g, h


def find_best_split(values: np.ndarray, g: np.ndarray, h: np.ndarray,
                    params: TrainParams) -> SplitCandidate | None:
    """Exact greedy scan of one feature column.

    Thresholds are midpoints between consecutive distinct sorted values; a
    candidate needs both children's hessian sums >= min_child_weight and a
    strictly positive gain. Ties keep the lowest threshold.
    """
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    v = values[order]
    boundaries = np.nonzero(v[:-1] < v[1:])[0]
    if boundaries.size == 0:
        return None
    gl = np.cumsum(g[order])
    hl = np.cumsum(h[order])
    g_total = gl[-1]
    h_total = hl[-1]
    g_left = gl[boundaries]
    h_left = hl[boundaries]
    g_right = g_total - g_left
    h_right = h_total - h_left
    lam = params.lambda_l2
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = 0.5 * (
            g_left ** 2 / (h_left + lam)
            + g_right ** 2 / (h_right + lam)
            - g_total ** 2 / (h_total + lam)
        ) - params.gamma_min_gain
    invalid = (
        (h_left < params.min_child_weight)
        | (h_right < params.min_child_weight)
        | ~np.isfinite(gains)
    )
    gains[invalid] = -np.inf
    best = int(np.argmax(gains))
    if not gains[best] > 0.0:
        return None
    i = boundaries[best]
    return SplitCandidate(threshold=float((v[i] + v[i + 1]) / 2.0), gain=float(gains[best]))


def _build_tree(X: np.ndarray, rows: np.ndarray, g: np.ndarray, h: np.ndarray,
                params: TrainParams, cols: np.ndarray) -> Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    weight: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        weight.append(0.0)
        return len(feature) - 1

    def leaf_weight(idx: np.ndarray) -> float:
        g_sum = float(g[idx].sum())
        h_sum = float(h[idx].sum())
        denom = h_sum + params.lambda_l2
        if denom <= 0.0:
            return 0.0
        return -g_sum / denom * params.learning_rate

    def rec(idx: np.ndarray, depth: int) -> int:
        node = new_node()
        if depth >= params.max_depth or idx.size < 2:
            weight[node] = leaf_weight(idx)
            return node
        best: SplitCandidate | None = None
        best_feat = -1
        for f in cols:
            cand = find_best_split(X[idx, f], g[idx], h[idx], params)
            if cand is not None and (best is None or cand.gain > best.gain):
                best = cand
                best_feat = int(f)
        if best is None:
            weight[node] = leaf_weight(idx)
            return node
        mask = X[idx, best_feat] < best.threshold
        feature[node] = best_feat
        threshold[node] = best.threshold
        left[node] = rec(idx[mask], depth + 1)
        right[node] = rec(idx[~mask], depth + 1)
        return node

    rec(rows, 0)
    return Tree(feature, threshold, left, right, weight)


def _multiclass_logloss(logits: np.ndarray, y: np.ndarray) -> float:
    probs = softmax(logits)
    picked = probs[np.arange(y.size), y]
    return float(-np.log(np.maximum(picked, 1e-300)).mean())


def fit(X: np.ndarray, y: Sequence[int], params: TrainParams,
        n_classes: int | None = None) -> BoostedEnsemble:
    """Train a boosted ensemble: one regression tree per class per round.

    Leaf weights are Newton steps -G/(H + lambda) scaled by the learning
    rate; logits accumulate additively from a 0.0 base score. The full-set
    multiclass log-loss is recorded after every round.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D matrix")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise ValueError("y length must match X rows")
    k = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")

    n, d = X.shape
    base_score = 0.0
    logits = np.full((n, k), base_score, dtype=np.float64)
    rng = np.random.default_rng(params.seed)
    ensemble = BoostedEnsemble(
        n_classes=k, n_features=d, base_score=base_score, params=params
    )
    n_sub = max(1, int(params.subsample * n)) if params.subsample < 1.0 else n
    n_cols = max(1, int(params.colsample * d)) if params.colsample < 1.0 else d

    for _ in range(params.n_rounds):
        probs = softmax(logits)
        g, h = grad_hess(y, probs)
        if n_sub < n:
            rows = np.sort(rng.choice(n, size=n_sub, replace=False))
        else:
            rows = np.arange(n)
        round_trees: list[Tree] = []
        for cls in range(k):
            if n_cols < d:
                cols = np.sort(rng.choice(d, size=n_cols, replace=False))
            else:
                cols = np.arange(d)
            tree = _build_tree(X, rows, g[:, cls], h[:, cls], params, cols)
            logits[:, cls] += tree.predict_batch(X)
            round_trees.append(tree)
        ensemble.trees.append(round_trees)
        ensemble.train_losses.append(_multiclass_logloss(logits, y))
    return ensemble


def predict_logits(model: BoostedEnsemble, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} features, got {X.shape[1]}"
        )
    logits = np.full((X.shape[0], model.n_classes), model.base_score)
    for round_trees in model.trees:
        for cls, tree in enumerate(round_trees):
            logits[:, cls] += tree.predict_batch(X)
    return logits[0] if single else logits


def predict_proba(model: BoostedEnsemble, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one feature vector (or a batch)."""
    return softmax(predict_logits(model, x))


def predict_label(model: BoostedEnsemble, x: np.ndarray) -> int | np.ndarray:
    """Argmax class index; ties resolve to the lowest index."""
    logits = predict_logits(model, x)
    return int(np.argmax(logits)) if logits.ndim == 1 else np.argmax(logits, axis=1)


def save_model(model: BoostedEnsemble, path: str | Path) -> None:
    """Write versioned JSON; the byte layout is canonical (sorted keys)."""
    payload = {
        "version": MODEL_FORMAT,
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "base_score": model.base_score,
        "params": asdict(model.params),
        "train_losses": model.train_losses,
        "trees": [[t.to_node_dict() for t in row] for row in model.trees],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path: str | Path) -> BoostedEnsemble:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid model file: {exc}") from None
    if payload.get("version") != MODEL_FORMAT:
        raise ValueError(f"{path}: unsupported model version {payload.get('version')!r}")
    try:
        params = TrainParams(**payload["params"])
        model = BoostedEnsemble(
            n_classes=int(payload["n_classes"]),
            n_features=int(payload["n_features"]),
            base_score=float(payload["base_score"]),
            params=params,
            trees=[
                [Tree.from_node_dict(nd) for nd in row] for row in payload["trees"]
            ],
            train_losses=[float(v) for v in payload["train_losses"]],
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed model file: {exc}") from None
    for row in model.trees:
        if len(row) != model.n_classes:
            raise ValueError(f"{path}: round has {len(row)} trees, expected {model.n_classes}")
    return model
