"""FNC-1 dataset ingestion, oversampling and leakage-safe fold construction.

The official distribution ships paired CSV files: a bodies table
(``Body ID,articleBody``) and a stances table (``Headline,Body ID,Stance``),
both RFC-4180 quoted UTF-8 with embedded newlines inside quoted article
bodies. Loading is single-threaded; a loaded Dataset is immutable and safe
to share across threads.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class Stance(enum.Enum):
    AGREE = "agree"
    DISAGREE = "disagree"
    DISCUSS = "discuss"
    UNRELATED = "unrelated"


#: Canonical label order used by confusion matrices and class indices.
STANCE_ORDER: tuple[Stance, ...] = (
    Stance.AGREE,
    Stance.DISAGREE,
    Stance.DISCUSS,
    Stance.UNRELATED,
)

#: The three labels on the "related" side of the relatedness partition.
RELATED_STANCES = frozenset({Stance.AGREE, Stance.DISAGREE, Stance.DISCUSS})

STANCE_INDEX = {s: i for i, s in enumerate(STANCE_ORDER)}

_BODIES_HEADER = ["Body ID", "articleBody"]
_STANCES_HEADER = ["Headline", "Body ID", "Stance"]
_STANCES_HEADER_UNLABELED = ["Headline", "Body ID"]


def parse_stance(text: str) -> Stance:
    """Parse a stance label case-insensitively after trimming."""
    norm = text.strip().lower()
    for stance in STANCE_ORDER:
        if stance.value == norm:
            return stance
    raise ValueError(f"unknown stance label: {text!r}")


@dataclass(frozen=True)
class ArticleBody:
    body_id: int
    text: str


@dataclass(frozen=True)
class StanceInstance:
    headline: str
    body_id: int
    stance: Stance | None = None


@dataclass(frozen=True)
class Dataset:
    """Headline-body pairs joined against a body table.

    Every instance's body_id must resolve in ``bodies``; a broken join is a
    hard error at construction time, never a silent drop.
    """

    instances: tuple[StanceInstance, ...]
    bodies: dict[int, ArticleBody] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for i, inst in enumerate(self.instances):
            if inst.body_id not in self.bodies:
                raise ValueError(
                    f"instance {i} references body id {inst.body_id} "
                    "missing from the bodies table"
                )

    def __len__(self) -> int:
        return len(self.instances)

    def label_counts(self) -> dict[Stance, int]:
        counts = {s: 0 for s in STANCE_ORDER}
        for inst in self.instances:
            if inst.stance is not None:
                counts[inst.stance] += 1
        return counts

    def body_text(self, body_id: int) -> str:
        return self.bodies[body_id].text


def _open_csv(path: str | Path):
    # newline="" lets the csv module handle embedded newlines; utf-8-sig
    # strips a BOM if present.
    return open(path, encoding="utf-8-sig", newline="")


def _check_header(actual: list[str] | None, expected: list[str], path) -> None:
    if actual is None:
        raise ValueError(f"{path}: empty file, expected header {expected}")
    stripped = [c.strip() for c in actual]
    if stripped != expected:
        raise ValueError(f"{path}: bad header {stripped!r}, expected {expected}")


def load_bodies(path: str | Path) -> dict[int, ArticleBody]:
    """Load a bodies CSV into a map body_id -> ArticleBody.

    Duplicate body ids and malformed rows are errors reported with their row
    number (header = row 1).
    """
    bodies: dict[int, ArticleBody] = {}
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), _BODIES_HEADER, path)
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ValueError(f"{path}: row {row_no}: expected 2 fields, got {len(row)}")
            try:
                body_id = int(row[0])
            except ValueError:
                raise ValueError(f"{path}: row {row_no}: bad body id {row[0]!r}") from None
            if body_id < 0:
                raise ValueError(f"{path}: row {row_no}: negative body id {body_id}")
            if body_id in bodies:
                raise ValueError(f"{path}: row {row_no}: duplicate body id {body_id}")
            bodies[body_id] = ArticleBody(body_id=body_id, text=row[1])
    return bodies


def load_stances(path: str | Path, labeled: bool = True) -> list[StanceInstance]:
    """Load a stances CSV, preserving row order.

    With ``labeled=False`` the file has no Stance column and instances carry
    ``stance=None``.
    """
    expected = _STANCES_HEADER if labeled else _STANCES_HEADER_UNLABELED
    out: list[StanceInstance] = []
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), expected, path)
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise ValueError(
                    f"{path}: row {row_no}: expected {len(expected)} fields, got {len(row)}"
                )
            try:
                body_id = int(row[1])
            except ValueError:
                raise ValueError(f"{path}: row {row_no}: bad body id {row[1]!r}") from None
            stance = None
            if labeled:
                try:
                    stance = parse_stance(row[2])
                except ValueError as exc:
                    raise ValueError(f"{path}: row {row_no}: {exc}") from None
            out.append(StanceInstance(headline=row[0], body_id=body_id, stance=stance))
    return out


def load_dataset(bodies_path: str | Path, stances_path: str | Path,
                 labeled: bool = True) -> Dataset:
    """Load and join the two official CSV files into a Dataset."""
    bodies = load_bodies(bodies_path)
    instances = load_stances(stances_path, labeled=labeled)
    return Dataset(instances=tuple(instances), bodies=bodies)


def oversample_draw(labels: Sequence[Stance | None], target: Stance,
                    target_count: int, seed: int) -> list[int]:
    """Indices to duplicate so the target class reaches ``target_count``.

    Draws uniformly with replacement from the target-class positions; the
    result is the deterministic core shared by Dataset- and feature-row-level
    oversampling.
    """
    positions = [i for i, lab in enumerate(labels) if lab == target]
    current = len(positions)
    if target_count < current:
        raise ValueError(
            f"target_count {target_count} below current {target.value} count {current}"
        )
    n_extra = target_count - current
    if n_extra == 0:
        return []
    if current == 0:
        raise ValueError(f"no {target.value} instances to oversample from")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, current, size=n_extra)
    return [positions[p] for p in picks]


def oversample(ds: Dataset, target: Stance, target_count: int, seed: int) -> Dataset:
    """Append seeded uniform-with-replacement duplicates of the target class.

    All non-target instances are untouched; the original order is preserved
    with duplicates appended at the end.
    """
    labels = [inst.stance for inst in ds.instances]
    extra = oversample_draw(labels, target, target_count, seed)
    if not extra:
        return ds
    instances = list(ds.instances) + [ds.instances[i] for i in extra]
    return Dataset(instances=tuple(instances), bodies=ds.bodies)


def make_folds(ds: Dataset, k: int, seed: int) -> list[tuple[list[int], list[int]]]:
    """Cross-validation folds grouped by body_id.

    All instances sharing a body land in the same holdout so body text never
    leaks between a fold's train and holdout portions. Bodies are shuffled
    by seed and assigned greedily to the currently smallest fold, giving
    near-balanced instance counts. Returns ``k`` (train_indices,
    holdout_indices) pairs.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    by_body: dict[int, list[int]] = {}
    for i, inst in enumerate(ds.instances):
        by_body.setdefault(inst.body_id, []).append(i)
    body_ids = sorted(by_body)
    if k > len(body_ids):
        raise ValueError(f"k={k} exceeds the {len(body_ids)} distinct body ids")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(body_ids))
    fold_sizes = [0] * k
    fold_members: list[list[int]] = [[] for _ in range(k)]
    for pos in order:
        body = body_ids[pos]
        dest = min(range(k), key=lambda f: (fold_sizes[f], f))
        fold_members[dest].extend(by_body[body])
        fold_sizes[dest] += len(by_body[body])
    folds = []
    for f in range(k):
        holdout = sorted(fold_members[f])
        holdout_set = set(holdout)
        train = [i for i in range(len(ds.instances)) if i not in holdout_set]
        folds.append((train, holdout))
    return folds


def write_dataset_tsv(ds: Dataset, path: str | Path) -> None:
    """Dump the normalized pair table: pair_id, stance, headline, body_id.

    Tabs and newlines inside headlines are replaced by spaces so the file
    stays one row per pair.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("pair_id\tstance\theadline\tbody_id\n")
        for i, inst in enumerate(ds.instances):
            stance = inst.stance.value if inst.stance is not None else ""
            headline = " ".join(inst.headline.split())
            fh.write(f"{i}\t{stance}\t{headline}\t{inst.body_id}\n")
