"""Exact ROUGE-1/2/L scoring with precision, recall and f1.

All scoring in this package goes through this module so that oracle labels,
model evaluation and reports share one deterministic metric definition:
lowercased whitespace tokens, no stemming, no stopword removal.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokenization used for every score in the package."""
    return text.lower().split()


def f_measure(precision: float, recall: float) -> float:
    if precision + recall <= 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: float, n_candidate: int, n_reference: int) -> "RougeScore":
        """Build a score from an overlap count and the two denominators.

        A zero denominator yields 0 for that component, never an error, so
        degenerate sentences cannot abort corpus runs.
        """
        precision = overlap / n_candidate if n_candidate > 0 else 0.0
        recall = overlap / n_reference if n_reference > 0 else 0.0
        return cls(precision, recall, f_measure(precision, recall))

    def to_dict(self) -> dict:
        return {"p": self.precision, "r": self.recall, "f1": self.f1}

    @classmethod
    def from_dict(cls, d: dict) -> "RougeScore":
        return cls(d["p"], d["r"], d["f1"])


@dataclass(frozen=True)
class RougeTriple:
    r1: RougeScore
    r2: RougeScore
    rl: RougeScore

    def to_dict(self) -> dict:
        return {"r1": self.r1.to_dict(), "r2": self.r2.to_dict(), "rl": self.rl.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "RougeTriple":
        return cls(
            RougeScore.from_dict(d["r1"]),
            RougeScore.from_dict(d["r2"]),
            RougeScore.from_dict(d["rl"]),
        )


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: list[str], reference: list[str], n: int) -> RougeScore:
    """N-gram overlap score with clipped (multiset) counting."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand = _ngram_counts(candidate, n)
    ref = _ngram_counts(reference, n)
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    return RougeScore.from_counts(overlap, sum(cand.values()), sum(ref.values()))


def _lcs_length(a: list[str], b: list[str]) -> int:
    # Rolling-row dynamic programming, O(|a|*|b|) time, O(|b|) space.
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b):
            if x == y:
                cur[j + 1] = prev[j] + 1
            else:
                cur[j + 1] = max(prev[j + 1], cur[j])
        prev = cur
    return prev[-1]


def rouge_l(candidate: list[str], reference: list[str]) -> RougeScore:
    """Longest-common-subsequence score."""
    if not candidate or not reference:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = _lcs_length(candidate, reference)
    return RougeScore.from_counts(lcs, len(candidate), len(reference))


def score_pair(candidate: list[str], reference: list[str]) -> RougeTriple:
    """ROUGE-1/2/L for one candidate/reference token-list pair."""
    return RougeTriple(
        rouge_n(candidate, reference, 1),
        rouge_n(candidate, reference, 2),
        rouge_l(candidate, reference),
    )


def score_texts(candidate: str, reference: str) -> RougeTriple:
    """Convenience wrapper: tokenize two strings and score them."""
    return score_pair(tokenize(candidate), tokenize(reference))


def avg_f(candidate: list[str], reference: list[str]) -> float:
    """Mean of the three f1 components; the pair-scoring value for labeling."""
    triple = score_pair(candidate, reference)
    return (triple.r1.f1 + triple.r2.f1 + triple.rl.f1) / 3.0


def corpus_average(per_doc: list[RougeTriple]) -> RougeTriple:
    """Component-wise arithmetic mean of all nine numbers."""
    if not per_doc:
        raise ValueError("corpus_average requires a non-empty list")
    n = len(per_doc)

    def mean(get) -> float:
        return sum(get(t) for t in per_doc) / n

    def mean_score(which: str) -> RougeScore:
        return RougeScore(
            mean(lambda t: getattr(t, which).precision),
            mean(lambda t: getattr(t, which).recall),
            mean(lambda t: getattr(t, which).f1),
        )

    return RougeTriple(mean_score("r1"), mean_score("r2"), mean_score("rl"))
