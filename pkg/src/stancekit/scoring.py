"""The weighted FNC-1 metric, confusion matrices and report rendering.

Scoring semantics follow the official challenge scorer: +0.25 for getting
the related/unrelated split right (on either side), plus +0.75 when a
related pair's exact label also matches. All functions here are pure.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import RELATED_STANCES, STANCE_INDEX, STANCE_ORDER, Stance


def fnc_score(truth: Sequence[Stance], pred: Sequence[Stance]) -> tuple[float, float]:
    """Weighted score and the maximum attainable score on the same truth.

    max_score = 0.25 * N + 0.75 * N_related.
    """
    if len(truth) != len(pred):
        raise ValueError(f"length mismatch: {len(truth)} vs {len(pred)}")
    if not truth:
        raise ValueError("empty prediction vectors")
    score = 0.0
    max_score = 0.0
    for t, p in zip(truth, pred):
        max_score += 0.25
        if t in RELATED_STANCES:
            max_score += 0.75
            if p in RELATED_STANCES:
                score += 0.25
                if p == t:
                    score += 0.75
        elif p == Stance.UNRELATED:
            score += 0.25
    return score, max_score


def confusion(truth: Sequence[Stance], pred: Sequence[Stance]) -> np.ndarray:
    """4x4 count matrix, rows = true label, columns = predicted label.

    Label order: agree, disagree, discuss, unrelated.
    """
    if len(truth) != len(pred):
        raise ValueError(f"length mismatch: {len(truth)} vs {len(pred)}")
    mat = np.zeros((4, 4), dtype=np.int64)
    for t, p in zip(truth, pred):
        mat[STANCE_INDEX[t], STANCE_INDEX[p]] += 1
    return mat


def accuracy(matrix: np.ndarray) -> float:
    total = int(matrix.sum())
    if total == 0:
        return 0.0
    return float(np.trace(matrix)) / total


def class_recall(matrix: np.ndarray, stance: Stance) -> float:
    """Diagonal over row sum for one label; 0.0 when the label is absent."""
    i = STANCE_INDEX[stance]
    row = int(matrix[i].sum())
    if row == 0:
        return 0.0
    return float(matrix[i, i]) / row


@dataclass(frozen=True)
class ScoreReport:
    score: float
    max_score: float
    relative: float
    confusion: np.ndarray
    accuracy: float

    @classmethod
    def from_predictions(cls, truth: Sequence[Stance],
                         pred: Sequence[Stance]) -> "ScoreReport":
        score, max_score = fnc_score(truth, pred)
        mat = confusion(truth, pred)
        return cls(
            score=score,
            max_score=max_score,
            relative=score / max_score,
            confusion=mat,
            accuracy=accuracy(mat),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScoreReport):
            return NotImplemented
        return (
            self.score == other.score
            and self.max_score == other.max_score
            and self.relative == other.relative
            and np.array_equal(self.confusion, other.confusion)
            and self.accuracy == other.accuracy
        )


_LABEL_NAMES = [s.value for s in STANCE_ORDER]


def render_report(report: ScoreReport, fmt: str = "text") -> str:
    """Render a ScoreReport as text, json or tsv with stable layout."""
    if fmt == "json":
        payload = {
            "score": report.score,
            "max_score": report.max_score,
            "relative": report.relative,
            "accuracy": report.accuracy,
            "confusion": report.confusion.tolist(),
            "labels": _LABEL_NAMES,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if fmt == "tsv":
        lines = ["truth\t" + "\t".join(_LABEL_NAMES)]
        for i, name in enumerate(_LABEL_NAMES):
            lines.append(name + "\t" + "\t".join(str(int(v)) for v in report.confusion[i]))
        lines.append(f"accuracy\t{report.accuracy:.9g}")
        lines.append(f"score\t{report.score:.9g}")
        lines.append(f"max_score\t{report.max_score:.9g}")
        lines.append(f"relative\t{report.relative:.9g}")
        return "\n".join(lines) + "\n"
    if fmt == "text":
        width = max(len(n) for n in _LABEL_NAMES) + 2
        header = " " * width + "".join(f"{n:>{width}}" for n in _LABEL_NAMES)
        lines = ["Confusion matrix (rows = truth)", header]
        for i, name in enumerate(_LABEL_NAMES):
            row = "".join(f"{int(v):>{width}d}" for v in report.confusion[i])
            lines.append(f"{name:<{width}}" + row)
        lines.append(f"Accuracy:    {report.accuracy:.3f}")
        lines.append(
            f"FNC-1 score: {report.score:.10g} out of {report.max_score:.10g}"
            f" ({100.0 * report.relative:.2f}%)"
        )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format: {fmt!r}")


def parse_report_json(text: str) -> ScoreReport:
    payload = json.loads(text)
    return ScoreReport(
        score=float(payload["score"]),
        max_score=float(payload["max_score"]),
        relative=float(payload["relative"]),
        confusion=np.array(payload["confusion"], dtype=np.int64),
        accuracy=float(payload["accuracy"]),
    )


def write_predictions(instances, predictions: Sequence[Stance],
                      path: str | Path) -> None:
    """Write a competition-format prediction file: Headline,Body ID,Stance."""
    if len(instances) != len(predictions):
        raise ValueError("instance and prediction counts differ")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Headline", "Body ID", "Stance"])
        for inst, stance in zip(instances, predictions):
            writer.writerow([inst.headline, inst.body_id, stance.value])


def score_files(truth_path: str | Path, pred_path: str | Path) -> ScoreReport:
    """Score two competition-format CSV files aligned by row order.

    Row pairs must reference the same headline and body id; a mismatch is an
    error rather than a silent misalignment.
    """
    from .corpus import load_stances

    truth = load_stances(truth_path, labeled=True)
    pred = load_stances(pred_path, labeled=True)
    if len(truth) != len(pred):
        raise ValueError(
            f"row count mismatch: {len(truth)} truth vs {len(pred)} predictions"
        )
    for i, (t, p) in enumerate(zip(truth, pred)):
        if t.headline != p.headline or t.body_id != p.body_id:
            raise ValueError(f"row {i + 2}: truth and prediction pairs differ")
    return ScoreReport.from_predictions(
        [t.stance for t in truth], [p.stance for p in pred]
    )
