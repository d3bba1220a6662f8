"""Oracle label mining: exhaustive abstract-by-body pair scoring, positive and
negative training pairs, and gold extractive selections used as upper bounds.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Document
from .rouge import avg_f, tokenize

log = logging.getLogger(__name__)

POSITIVE = 1
NEGATIVE = 0

MIN_BODY_SENTENCES = 4  # 2 positives plus 2 negatives drawn from the rest


@dataclass(frozen=True)
class LabeledPair:
    doc_id: str
    abstract_idx: int
    body_idx: int
    label: int  # POSITIVE or NEGATIVE
    score: float  # avg_f actually computed, also for negatives

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "abstract_idx": self.abstract_idx,
            "body_idx": self.body_idx,
            "label": self.label,
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledPair":
        return cls(d["doc_id"], d["abstract_idx"], d["body_idx"], d["label"], d["score"])


@dataclass(frozen=True)
class GoldExtract:
    doc_id: str
    selected_body_idxs: tuple[int, ...]  # strictly increasing

    def to_dict(self) -> dict:
        return {"doc_id": self.doc_id, "selected_body_idxs": list(self.selected_body_idxs)}


def stable_seed(seed: int, doc_id: str) -> int:
    """Per-document RNG seed that does not depend on iteration order."""
    digest = hashlib.sha256(f"{seed}:{doc_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def score_all_pairs(doc: Document) -> np.ndarray:
    """Score matrix of shape [abstract sentences, body sentences].

    Entry (i, j) is avg_f with body sentence j as candidate and abstract
    sentence i as reference.
    """
    abstract_tokens = [tokenize(s) for s in doc.abstract_sents]
    body_tokens = [tokenize(s) for s in doc.body_sents]
    matrix = np.zeros((len(abstract_tokens), len(body_tokens)), dtype=np.float64)
    for i, ref in enumerate(abstract_tokens):
        for j, cand in enumerate(body_tokens):
            matrix[i, j] = avg_f(cand, ref)
    return matrix


def build_pair_dataset(
    doc: Document,
    rng_seed: int,
    per_document: bool = False,
) -> list[LabeledPair]:
    """Mine two positive and two negative pairs per abstract sentence.

    Positives are the top-2 body indices of the row (ties broken by the lower
    index); negatives are sampled uniformly without replacement from the
    indices that are not positive for that row. ``per_document=True`` switches
    to two positives for the whole document instead. Documents with fewer than
    four body sentences are skipped with a warning.
    """
    n_body = len(doc.body_sents)
    if n_body < MIN_BODY_SENTENCES:
        log.warning(
            "skipping document %s: %d body sentences (< %d)",
            doc.id,
            n_body,
            MIN_BODY_SENTENCES,
        )
        return []
    scores = score_all_pairs(doc)
    rng = random.Random(stable_seed(rng_seed, doc.id))
    pairs: list[LabeledPair] = []
    if per_document:
        flat = [(-scores[i, j], i, j) for i in range(scores.shape[0]) for j in range(n_body)]
        flat.sort()
        anchors = [(i, j) for _, i, j in flat[:2]]
        for i, j in anchors:
            pairs.append(LabeledPair(doc.id, i, j, POSITIVE, float(scores[i, j])))
        used = set(anchors)
        for i, _ in anchors:
            pool = [c for c in range(n_body) if (i, c) not in used]
            neg = rng.choice(pool)
            used.add((i, neg))
            pairs.append(LabeledPair(doc.id, i, neg, NEGATIVE, float(scores[i, neg])))
        return pairs
    for i in range(scores.shape[0]):
        row = scores[i]
        order = sorted(range(n_body), key=lambda j: (-row[j], j))
        positives = order[:2]
        for j in positives:
            pairs.append(LabeledPair(doc.id, i, j, POSITIVE, float(row[j])))
        pool = [j for j in range(n_body) if j not in positives]
        for j in rng.sample(pool, 2):
            pairs.append(LabeledPair(doc.id, i, j, NEGATIVE, float(row[j])))
    return pairs


def build_pair_datasets(docs: list[Document], rng_seed: int, per_document: bool = False) -> list[LabeledPair]:
    pairs: list[LabeledPair] = []
    for doc in docs:
        pairs.extend(build_pair_dataset(doc, rng_seed, per_document=per_document))
    return pairs


def build_gold_extract(doc: Document, k: int | None = None) -> GoldExtract:
    """Greedy gold selection: each abstract sentence votes for its argmax body
    index; the union is ranked by score and truncated to ``k`` indices,
    emitted in document order. ``k`` defaults to the abstract length."""
    if k is None:
        k = len(doc.abstract_sents)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = score_all_pairs(doc)
    best: dict[int, float] = {}
    for i in range(scores.shape[0]):
        row = scores[i]
        j = int(np.argmax(row))  # argmax takes the lowest index on ties
        best[j] = max(best.get(j, 0.0), float(row[j]))
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    chosen = sorted(j for j, _ in ranked[: min(k, len(ranked))])
    return GoldExtract(doc.id, tuple(chosen))


def save_pairs(pairs: list[LabeledPair], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            handle.write(json.dumps(pair.to_dict(), sort_keys=True) + "\n")


def load_pairs(path: str | Path) -> list[LabeledPair]:
    pairs = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                pairs.append(LabeledPair.from_dict(json.loads(line)))
    return pairs
