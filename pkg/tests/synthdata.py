"""Synthetic headline/body corpora in the official CSV layout.

Bodies belong to latent topics; related headlines reuse words from their
body, unrelated headlines come from a different topic. Each related body
carries a stance "flavor": agreeing bodies lean on positive words, refuting
bodies mix in (noisy) debunking vocabulary, discussing bodies hedge. That
makes relatedness nearly separable from overlap features while the fine
labels stay imperfectly separable, mirroring the real task's shape.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from stancekit import porter
from stancekit.corpus import (ArticleBody, Dataset, Stance, StanceInstance)

COMMON_WORDS = ["news", "report", "officials", "statement", "sources",
                "country", "public", "week", "media", "story"]
POSITIVE_WORDS = ["praise", "celebrate", "genuine", "trust", "success",
                  "confirm", "welcome", "support"]
HEDGE_WORDS = ["reportedly", "allegedly", "claims", "suggests", "unclear",
               "possibly", "rumored", "speculation"]
REFUTE_WORDS = ["hoax", "fake", "fraud", "denies", "fabricated", "authenticity"]

_FLAVOR_WORDS = {
    Stance.AGREE: POSITIVE_WORDS,
    Stance.DISCUSS: HEDGE_WORDS,
    Stance.DISAGREE: REFUTE_WORDS,
}


def _topic_vocab(topic: int, size: int = 50) -> list[str]:
    return [f"t{topic}w{i}" for i in range(size)]


def _make_body(rng: np.random.Generator, topic: int, flavor: Stance,
               refute_present: float, refute_crosstalk: float) -> str:
    vocab = _topic_vocab(topic)
    n_words = int(rng.integers(40, 90))
    words = [vocab[rng.integers(0, len(vocab))] for _ in range(n_words)]
    for _ in range(int(rng.integers(2, 5))):
        words.append(COMMON_WORDS[rng.integers(0, len(COMMON_WORDS))])
    flavor_words = _FLAVOR_WORDS[flavor] if flavor in _FLAVOR_WORDS else []
    if flavor == Stance.DISAGREE:
        # only part of the refuting bodies use explicit debunking words
        if rng.random() < refute_present:
            for _ in range(int(rng.integers(1, 3))):
                words.append(REFUTE_WORDS[rng.integers(0, len(REFUTE_WORDS))])
        for _ in range(int(rng.integers(0, 3))):
            words.append(HEDGE_WORDS[rng.integers(0, len(HEDGE_WORDS))])
    elif flavor_words:
        for _ in range(int(rng.integers(2, 6))):
            words.append(flavor_words[rng.integers(0, len(flavor_words))])
        # cross-talk: debunking words also appear in other flavors
        if rng.random() < refute_crosstalk:
            words.append(REFUTE_WORDS[rng.integers(0, len(REFUTE_WORDS))])
    perm = rng.permutation(len(words))
    words = [words[i] for i in perm]
    sentences = []
    i = 0
    while i < len(words):
        step = int(rng.integers(7, 13))
        sentences.append(" ".join(words[i:i + step]) + ".")
        i += step
    text = " ".join(sentences)
    if rng.random() < 0.05:
        text = 'They said, "not so fast",\nbefore adding: ' + text
    return text


def _make_headline(rng: np.random.Generator, body_words: list[str],
                   topic: int, related: bool) -> str:
    n = int(rng.integers(5, 10))
    if related:
        content = [w for w in body_words if w.startswith("t")]
        if not content:
            content = _topic_vocab(topic)
        return " ".join(content[rng.integers(0, len(content))] for _ in range(n))
    other_topics = [t for t in range(6) if t != topic]
    foreign = _topic_vocab(other_topics[rng.integers(0, len(other_topics))])
    return " ".join(foreign[rng.integers(0, len(foreign))] for _ in range(n))


def generate(counts: dict[Stance, int], n_bodies: int, seed: int,
             first_body_id: int = 0, refute_present: float = 0.55,
             refute_crosstalk: float = 0.08) -> Dataset:
    """Build a synthetic Dataset with exactly the requested label counts."""
    rng = np.random.default_rng(seed)
    n_related = counts[Stance.AGREE] + counts[Stance.DISAGREE] + counts[Stance.DISCUSS]
    total = n_related + counts[Stance.UNRELATED]
    if n_bodies < 4:
        raise ValueError("need at least 4 bodies")

    flavors: list[Stance] = []
    for stance in (Stance.AGREE, Stance.DISAGREE, Stance.DISCUSS):
        share = max(1, round(n_bodies * counts[stance] / max(1, n_related)))
        flavors.extend([stance] * share)
    flavors = flavors[:n_bodies]
    while len(flavors) < n_bodies:
        flavors.append(Stance.DISCUSS)

    bodies: dict[int, ArticleBody] = {}
    body_meta: dict[Stance, list[int]] = {s: [] for s in _FLAVOR_WORDS}
    body_topic: dict[int, int] = {}
    for i, flavor in enumerate(flavors):
        body_id = first_body_id + i
        topic = int(rng.integers(0, 6))
        text = _make_body(rng, topic, flavor, refute_present, refute_crosstalk)
        bodies[body_id] = ArticleBody(body_id=body_id, text=text)
        body_meta[flavor].append(body_id)
        body_topic[body_id] = topic

    all_ids = sorted(bodies)
    labels: list[Stance] = []
    for stance, count in counts.items():
        labels.extend([stance] * count)
    perm = rng.permutation(len(labels))
    labels = [labels[i] for i in perm]

    instances = []
    for stance in labels:
        if stance == Stance.UNRELATED:
            body_id = all_ids[rng.integers(0, len(all_ids))]
            related = False
        else:
            pool = body_meta[stance]
            body_id = pool[rng.integers(0, len(pool))]
            related = True
        body_words = bodies[body_id].text.replace(".", " ").split()
        headline = _make_headline(rng, body_words, body_topic[body_id], related)
        instances.append(StanceInstance(headline=headline, body_id=body_id,
                                        stance=stance))
    assert len(instances) == total
    return Dataset(instances=tuple(instances), bodies=bodies)


def write_csvs(ds: Dataset, bodies_path: Path, stances_path: Path) -> None:
    with open(bodies_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Body ID", "articleBody"])
        for body_id in sorted(ds.bodies):
            writer.writerow([body_id, ds.bodies[body_id].text])
    with open(stances_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Headline", "Body ID", "Stance"])
        for inst in ds.instances:
            writer.writerow([inst.headline, inst.body_id, inst.stance.value])


def vocabulary_stems() -> list[str]:
    words = set(COMMON_WORDS + POSITIVE_WORDS + HEDGE_WORDS + REFUTE_WORDS)
    for topic in range(6):
        words.update(_topic_vocab(topic))
    return sorted({porter.stem(w) for w in words})


def make_embeddings(dim_noise: float = 0.05, seed: int = 12) -> dict[str, np.ndarray]:
    """Embedding vectors keyed by stem: topic direction plus mild noise."""
    rng = np.random.default_rng(seed)
    table: dict[str, np.ndarray] = {}
    dim = 10
    for topic in range(6):
        for word in _topic_vocab(topic):
            vec = rng.normal(0, dim_noise, dim)
            vec[topic] += 1.0
            table[porter.stem(word)] = vec
    for group, axis in ((COMMON_WORDS, 6), (POSITIVE_WORDS, 7),
                        (HEDGE_WORDS, 8), (REFUTE_WORDS, 9)):
        for word in group:
            vec = rng.normal(0, dim_noise, dim)
            vec[axis] += 1.0
            table.setdefault(porter.stem(word), vec)
    return table


def write_embeddings(path: Path, seed: int = 12) -> None:
    table = make_embeddings(seed=seed)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        first = next(iter(table.values()))
        fh.write(f"{len(table)} {len(first)}\n")
        for token in sorted(table):
            values = " ".join(format(v, ".6f") for v in table[token])
            fh.write(f"{token} {values}\n")


#: Label distribution of the official training split.
OFFICIAL_TRAIN_COUNTS = {
    Stance.AGREE: 3678,
    Stance.DISAGREE: 840,
    Stance.DISCUSS: 8909,
    Stance.UNRELATED: 36545,
}

#: Label distribution of the official competition test split.
OFFICIAL_TEST_COUNTS = {
    Stance.AGREE: 1903,
    Stance.DISAGREE: 697,
    Stance.DISCUSS: 4464,
    Stance.UNRELATED: 18349,
}
