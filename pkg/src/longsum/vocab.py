"""Subword vocabulary with greedy longest-match (wordpiece-style) tokenization.

The vocabulary is built from a corpus: reserved tokens first, then every
single character seen (plus its ``##`` continuation form), then whole words by
descending frequency. With all characters present, unknown-word fallout is
limited to unseen characters, which map to ``[UNK]``.
"""

from __future__ import annotations

import re
from collections import Counter
from pathlib import Path
from typing import Iterable

from .corpus import MARKUP_TOKENS

PAD = "[PAD]"
UNK = "[UNK]"
CLS = "[CLS]"
SEP = "[SEP]"
BOS = "[BOS]"
EOS = "[EOS]"
RESERVED_TOKENS = (PAD, UNK, CLS, SEP, BOS, EOS) + MARKUP_TOKENS

DEFAULT_MAX_SIZE = 30525

_RESERVED_SPLIT = re.compile(
    "(" + "|".join(re.escape(t) for t in RESERVED_TOKENS) + ")"
)


class Vocabulary:
    """Token-to-id map; line number equals id in the on-disk format."""

    def __init__(self, tokens: list[str]):
        self._tokens = list(tokens)
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}
        if len(self._ids) != len(self._tokens):
            raise ValueError("vocabulary contains duplicate tokens")
        missing = [t for t in RESERVED_TOKENS if t not in self._ids]
        if missing:
            raise ValueError(f"vocabulary is missing reserved tokens: {missing}")
        self.pad_id = self._ids[PAD]
        self.unk_id = self._ids[UNK]
        self.cls_id = self._ids[CLS]
        self.sep_id = self._ids[SEP]
        self.bos_id = self._ids[BOS]
        self.eos_id = self._ids[EOS]

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id(self, token: str) -> int:
        return self._ids[token]

    def token(self, token_id: int) -> str:
        return self._tokens[token_id]

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    @classmethod
    def build(cls, texts: Iterable[str], max_size: int = DEFAULT_MAX_SIZE) -> "Vocabulary":
        """Build a vocabulary from an iterable of normalized texts."""
        if max_size < len(RESERVED_TOKENS):
            raise ValueError(f"max_size must cover the {len(RESERVED_TOKENS)} reserved tokens")
        word_counts: Counter = Counter()
        chars: set[str] = set()
        for text in texts:
            for word in text.split():
                if word in RESERVED_TOKENS:
                    continue
                word_counts[word] += 1
                chars.update(word)
        tokens = list(RESERVED_TOKENS)
        for ch in sorted(chars):
            tokens.append(ch)
            tokens.append("##" + ch)
        seen = set(tokens)
        for word, _ in sorted(word_counts.items(), key=lambda kv: (-kv[1], kv[0])):
            if len(tokens) >= max_size:
                break
            if word not in seen:
                tokens.append(word)
                seen.add(word)
        return cls(tokens[:max_size] if len(tokens) > max_size else tokens)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for token in self._tokens:
                handle.write(token + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8") as handle:
            return cls([line.rstrip("\n") for line in handle if line.rstrip("\n")])


def _wordpiece(word: str, vocab: Vocabulary) -> list[int]:
    """Greedy longest-match segmentation of one whitespace word."""
    pieces: list[int] = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while end > start:
            sub = word[start:end]
            if start > 0:
                sub = "##" + sub
            if sub in vocab:
                match = sub
                break
            end -= 1
        if match is None:
            return [vocab.unk_id]
        pieces.append(vocab.id(match))
        start = end
    return pieces


def tokenize(sentence: str, vocab: Vocabulary) -> list[int]:
    """Token ids for a normalized sentence; reserved tokens map atomically."""
    ids: list[int] = []
    for word in sentence.split():
        for part in _RESERVED_SPLIT.split(word):
            if not part:
                continue
            if part in RESERVED_TOKENS:
                ids.append(vocab.id(part))
            else:
                ids.extend(_wordpiece(part, vocab))
    return ids


def detokenize(ids: Iterable[int], vocab: Vocabulary) -> str:
    """Inverse of `tokenize` up to [UNK] substitutions: continuation pieces
    are glued to the preceding piece, everything else is space-joined."""
    words: list[str] = []
    for token_id in ids:
        token = vocab.token(token_id)
        if token.startswith("##") and words:
            words[-1] += token[2:]
        else:
            words.append(token)
    return " ".join(words)
