"""Deterministic toy corpora for tests and demos.

Each generated document plants one body sentence per abstract sentence that is
the unique lexical-overlap argmax for it ("paraphrase" mode rewords the
abstract sentence; "verbatim" mode copies it), surrounded by distractor
sentences built from a disjoint noise vocabulary. Documents clear the default
ingestion filters, normalize to themselves, and carry introduction, method,
and conclusion sections.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"

N_INTRO = 2
N_METHOD = 10
N_CONCLUSION = 2


def word_pool(seed: int = 0, size: int = 48) -> list[str]:
    """Pronounceable three-syllable pseudo-words, distinct and deterministic."""
    rng = random.Random(seed)
    pool: list[str] = []
    seen = set()
    while len(pool) < size:
        word = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(3))
        if word not in seen:
            seen.add(word)
            pool.append(word)
    return pool


def toy_records(
    n_docs: int,
    seed: int = 0,
    plant: str = "paraphrase",
) -> tuple[list[dict], dict[str, tuple[int, int]]]:
    """Raw ingestion records for `n_docs` toy documents plus, per document,
    the body indices of the two planted sentences (in abstract order)."""
    if plant not in ("paraphrase", "verbatim"):
        raise ValueError(f"plant must be 'paraphrase' or 'verbatim', got {plant!r}")
    pool = word_pool(seed)
    topic_pool = pool[:32]  # abstract content words
    noise_pool = pool[32:]  # distractor-only words
    rng = random.Random(seed)
    records: list[dict] = []
    plants: dict[str, tuple[int, int]] = {}
    for n in range(n_docs):
        doc_id = f"doc{n:04d}"
        a, b, c, d = rng.sample(topic_pool, 4)
        e, f = rng.sample(noise_pool, 2)

        abstract = [
            f"we study {a} and {b} .",
            f"we report {c} and {d} .",
        ]
        if plant == "verbatim":
            planted = list(abstract)
        else:
            planted = [
                f"we study {a} and {b} in practice .",
                f"we report {c} and {d} in practice .",
            ]

        intro = [
            f"this paper studies {a} {b} and {c} {d} in depth .",
            f"prior work on {e} focused only on {f} .",
        ]
        slots = sorted(rng.sample(range(N_METHOD), 2))
        method = []
        for m in range(N_METHOD):
            if m == slots[0]:
                method.append(planted[0])
            elif m == slots[1]:
                method.append(planted[1])
            else:
                x, y = rng.sample(noise_pool, 2)
                method.append(f"the method uses {x} and {y} for the task .")
        conclusion = [
            f"we conclude that {a} {b} {c} {d} are useful .",
            f"future work will extend {e} further .",
        ]

        records.append(
            {
                "article_id": doc_id,
                "abstract_text": " ".join(abstract),
                "article_text": " ".join(intro + method + conclusion),
                "section_names": ["introduction", "method", "conclusion"],
                "sections": [intro, method, conclusion],
            }
        )
        plants[doc_id] = (N_INTRO + slots[0], N_INTRO + slots[1])
    return records, plants


def write_toy_corpus(path: str | Path, n_docs: int, seed: int = 0, plant: str = "paraphrase") -> dict[str, tuple[int, int]]:
    """Write toy records as JSON lines; returns the planted indices."""
    records, plants = toy_records(n_docs, seed=seed, plant=plant)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for rec in records:
            handle.write(json.dumps(rec, sort_keys=True) + "\n")
    return plants
