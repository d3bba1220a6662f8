"""Back-translation paraphrasing: a summary is split into sentences, each
sentence goes through a forward translator and back through its inverse, and
the round-tripped sentences are rejoined. Translators are pluggable through a
registry so a real MT system can stand in for the bundled toy ones.
"""

from __future__ import annotations

import importlib
import json
from pathlib import Path
from typing import Callable, Protocol, runtime_checkable

from .corpus import split_sentences


@runtime_checkable
class Translator(Protocol):
    """Anything that maps one sentence to one sentence, with a direction label."""

    direction: str

    def __call__(self, sentence: str) -> str: ...


class TranslationError(RuntimeError):
    """A translator failed on one sentence; carries enough to resume."""

    def __init__(self, message: str, sentence_index: int, direction: str):
        super().__init__(f"{message} (sentence {sentence_index}, direction {direction})")
        self.sentence_index = sentence_index
        self.direction = direction


def back_translate(text: str, forward: Translator, backward: Translator) -> str:
    """Round-trip each sentence of `text` through forward then backward
    translation. Sentence boundaries are preserved: one sentence in, one out."""
    sentences = split_sentences(text, min_tokens=1)
    round_tripped = []
    for i, sentence in enumerate(sentences):
        try:
            pivot = forward(sentence)
        except Exception as exc:
            raise TranslationError(str(exc), i, forward.direction) from exc
        try:
            restored = backward(pivot)
        except Exception as exc:
            raise TranslationError(str(exc), i, backward.direction) from exc
        round_tripped.append(restored.strip())
    return " ".join(round_tripped)


# --- bundled translators --------------------------------------------------------


class IdentityTranslator:
    """Returns the sentence unchanged; the degenerate round trip."""

    def __init__(self, direction: str = "identity"):
        self.direction = direction

    def __call__(self, sentence: str) -> str:
        return sentence

    def inverse(self) -> "IdentityTranslator":
        return IdentityTranslator(self.direction + ":inv")


class ReverseTranslator:
    """Reverses word order; its own inverse, so the round trip is lossless."""

    def __init__(self, direction: str = "reverse"):
        self.direction = direction

    def __call__(self, sentence: str) -> str:
        return " ".join(reversed(sentence.split()))

    def inverse(self) -> "ReverseTranslator":
        return ReverseTranslator(self.direction + ":inv")


class SynonymTranslator:
    """Deterministic word-substitution cipher. The inverse table may map two
    source words to one pivot word, so round trips can genuinely rewrite."""

    TABLE = {
        "big": "large", "huge": "large",
        "small": "tiny",
        "fast": "quick", "rapid": "quick",
        "show": "demonstrate", "prove": "demonstrate",
        "method": "approach", "technique": "approach",
        "result": "outcome",
        "improve": "boost", "increase": "boost",
    }

    def __init__(self, table: dict[str, str] | None = None, direction: str = "synonym"):
        self.table = dict(self.TABLE if table is None else table)
        self.direction = direction

    def __call__(self, sentence: str) -> str:
        return " ".join(self.table.get(w, w) for w in sentence.split())

    def inverse(self) -> "SynonymTranslator":
        # collisions collapse to one source word; chosen alphabetically so the
        # inverse is deterministic
        inverted: dict[str, str] = {}
        for src in sorted(self.table):
            inverted.setdefault(self.table[src], src)
        return SynonymTranslator(inverted, self.direction + ":inv")


# --- registry --------------------------------------------------------------------

_BUILTIN: dict[str, Callable[[], object]] = {
    "identity": IdentityTranslator,
    "reverse": ReverseTranslator,
    "synonym": SynonymTranslator,
}

_REGISTRY: dict[str, Callable[[], object]] = {}


def register_translator(name: str, factory: Callable[[], object]) -> None:
    """Expose a translator factory under `name` for config files and the CLI."""
    _REGISTRY[name] = factory


def resolve_translator(name: str):
    """Translator instance for a registry name, a registered factory, or a
    "module:attr" import path."""
    if name in _REGISTRY:
        return _REGISTRY[name]()
    if name in _BUILTIN:
        return _BUILTIN[name]()
    if ":" in name:
        module_name, _, attr = name.partition(":")
        obj = getattr(importlib.import_module(module_name), attr)
        return obj() if callable(obj) else obj
    known = sorted(set(_BUILTIN) | set(_REGISTRY))
    raise KeyError(f"unknown translator {name!r}; known: {known}")


def load_registry(path: str | Path) -> None:
    """Register translators from a JSON file mapping names to import paths."""
    table = json.loads(Path(path).read_text())
    if not isinstance(table, dict):
        raise ValueError(f"translator registry {path} must be a JSON object")
    for name, target in table.items():
        module_name, _, attr = target.partition(":")
        module = importlib.import_module(module_name)
        register_translator(name, getattr(module, attr))


def paraphrase_summary(text: str, translator_name: str = "synonym") -> str:
    """Back-translate `text` with the named translator and its inverse."""
    forward = resolve_translator(translator_name)
    if not hasattr(forward, "inverse"):
        raise TypeError(f"translator {translator_name!r} does not define an inverse()")
    return back_translate(text, forward, forward.inverse())
