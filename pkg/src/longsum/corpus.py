"""Corpus ingestion: normalization, sentence segmentation, filtering, splits.

Input is a JSON-lines file of raw records with keys ``article_id``,
``abstract_text``, ``article_text``, ``section_names``, ``sections`` (an
optional ``labels`` key is ignored). Output is a list of normalized
documents plus a deterministic train/validation/test split.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

MATH_TOKEN = "[math]"
GRAPH_TOKEN = "[graph]"
TABLE_TOKEN = "[table]"
EQUATION_TOKEN = "[equation]"
MARKUP_TOKENS = (MATH_TOKEN, GRAPH_TOKEN, TABLE_TOKEN, EQUATION_TOKEN)


class CorpusError(ValueError):
    """Raised for malformed dataset files or empty ingestion results."""


@dataclass
class FilterConfig:
    min_words: int = 100
    max_words: int = 20000


@dataclass(frozen=True)
class Section:
    name: str
    start: int  # first body sentence index
    end: int  # one past the last body sentence index


@dataclass
class Document:
    id: str
    abstract_sents: list[str]
    body_sents: list[str]
    sections: list[Section] = field(default_factory=list)
    word_count: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "abstract_sents": self.abstract_sents,
            "body_sents": self.body_sents,
            "sections": [[s.name, s.start, s.end] for s in self.sections],
            "word_count": self.word_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Document":
        return cls(
            id=d["id"],
            abstract_sents=list(d["abstract_sents"]),
            body_sents=list(d["body_sents"]),
            sections=[Section(name, start, end) for name, start, end in d["sections"]],
            word_count=d["word_count"],
        )


@dataclass
class SplitAssignment:
    train: set[str]
    validation: set[str]
    test: set[str]

    def to_dict(self) -> dict:
        return {
            "train": sorted(self.train),
            "validation": sorted(self.validation),
            "test": sorted(self.test),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitAssignment":
        return cls(set(d["train"]), set(d["validation"]), set(d["test"]))


# --- text normalization ------------------------------------------------------

_ENV_RULES = [
    (re.compile(r"\\begin\{(equation|align)\*?\}.*?\\end\{\1\*?\}", re.S), EQUATION_TOKEN),
    (re.compile(r"\\begin\{(table|tabular)\*?\}.*?\\end\{\1\*?\}", re.S), TABLE_TOKEN),
    (re.compile(r"\\begin\{figure\*?\}.*?\\end\{figure\*?\}", re.S), GRAPH_TOKEN),
]
_INCLUDEGRAPHICS = re.compile(r"\\includegraphics\s*(\[[^\]]*\])?\s*(\{[^}]*\})?")
_DISPLAY_MATH = re.compile(r"\$\$[^$]*\$\$")
_INLINE_MATH = re.compile(r"\$[^$]*\$")
_PAREN_MATH = re.compile(r"\\\(.*?\\\)", re.S)
_BEGIN_END = re.compile(r"\\(?:begin|end)\s*\{[^}]*\}")
_COMMAND = re.compile(r"\\[a-zA-Z@]+\*?")
_BAD_CHARS = re.compile(r"[^A-Za-z0-9.,;:!?()\-' \t\r\n]")
_MARKUP_SPLIT = re.compile(r"(\[math\]|\[graph\]|\[table\]|\[equation\])")
_WHITESPACE = re.compile(r"\s+")


def normalize_text(raw: str) -> str:
    """Normalize arbitrary LaTeX-flavored text into a plain sentence stream.

    Math, table, and figure markup collapse to the literal tokens
    ``[math]``/``[table]``/``[graph]``/``[equation]``; remaining
    backslash-commands are deleted; characters outside Latin letters, digits,
    the markup tokens, and sentence punctuation are deleted; whitespace is
    collapsed to single spaces. Total and idempotent.
    """
    text = raw
    for pattern, token in _ENV_RULES:
        text = pattern.sub(f" {token} ", text)
    text = _INCLUDEGRAPHICS.sub(f" {GRAPH_TOKEN} ", text)
    text = _DISPLAY_MATH.sub(f" {MATH_TOKEN} ", text)
    text = _INLINE_MATH.sub(f" {MATH_TOKEN} ", text)
    text = _PAREN_MATH.sub(f" {MATH_TOKEN} ", text)
    # Leftover begin/end pairs (unmatched or unknown environments) drop their
    # environment-name argument too; other commands keep their brace contents.
    text = _BEGIN_END.sub(" ", text)
    text = _COMMAND.sub(" ", text)
    # Character whitelist, applied outside the markup tokens so their square
    # brackets survive.
    parts = _MARKUP_SPLIT.split(text)
    cleaned = [p if p in MARKUP_TOKENS else _BAD_CHARS.sub("", p) for p in parts]
    text = "".join(cleaned)
    return _WHITESPACE.sub(" ", text).strip()


# --- sentence segmentation ---------------------------------------------------

_SENT_BOUNDARY = re.compile(r"(?<=[.!?])\s+")
# Punctuation marks count as their own tokens when measuring fragment length,
# so "see [math] ." style sentences clear the floor.
_COUNT_TOKEN = re.compile(r"[^\s.,;:!?()]+|[.,;:!?()]")


def _token_count(fragment: str) -> int:
    return len(_COUNT_TOKEN.findall(fragment))


def split_sentences(text: str, min_tokens: int = 3) -> list[str]:
    """Split normalized text on ``.``/``!``/``?`` followed by whitespace.

    Fragments shorter than ``min_tokens`` tokens are dropped. The markup
    tokens contain no sentence punctuation, so a split can never land inside
    one.
    """
    parts = (p.strip() for p in _SENT_BOUNDARY.split(text))
    return [p for p in parts if p and _token_count(p) >= min_tokens]


# --- ingestion ---------------------------------------------------------------

_REQUIRED_KEYS = ("article_id", "abstract_text", "article_text", "section_names", "sections")


def _record_to_document(rec: dict) -> Document | None:
    """Normalize and segment one raw record; None when it has no usable text."""
    abstract_sents = split_sentences(normalize_text(rec["abstract_text"]))

    body_sents: list[str] = []
    sections: list[Section] = []
    for name, sent_list in zip(rec["section_names"], rec["sections"]):
        sents = split_sentences(normalize_text(" ".join(sent_list)))
        if not sents:
            continue
        start = len(body_sents)
        body_sents.extend(sents)
        sections.append(Section(str(name), start, start + len(sents)))
    if not body_sents:
        body_sents = split_sentences(normalize_text(rec["article_text"]))
        sections = []

    if not abstract_sents or not body_sents:
        return None
    word_count = sum(len(s.split()) for s in body_sents)
    return Document(
        id=rec["article_id"],
        abstract_sents=abstract_sents,
        body_sents=body_sents,
        sections=sections,
        word_count=word_count,
    )


def _validate_record(rec: dict, lineno: int) -> None:
    if not isinstance(rec, dict):
        raise CorpusError(f"line {lineno}: record is not a JSON object")
    for key in _REQUIRED_KEYS:
        if key not in rec:
            raise CorpusError(f"line {lineno}: missing required key {key!r}")
    if not rec["article_id"]:
        raise CorpusError(f"line {lineno}: empty article_id")
    if len(rec["section_names"]) != len(rec["sections"]):
        raise CorpusError(
            f"line {lineno}: section_names and sections lengths differ "
            f"({len(rec['section_names'])} vs {len(rec['sections'])})"
        )


def make_split(ids: list[str], seed: int) -> SplitAssignment:
    """Deterministic split: seeded shuffle of the sorted ids, then the last
    10 percent divided evenly into validation and test."""
    ordered = sorted(ids)
    rng = random.Random(seed)
    rng.shuffle(ordered)
    n = len(ordered)
    n_val = round(0.05 * n)
    n_test = round(0.05 * n)
    n_train = n - n_val - n_test
    return SplitAssignment(
        train=set(ordered[:n_train]),
        validation=set(ordered[n_train : n_train + n_val]),
        test=set(ordered[n_train + n_val :]),
    )


def ingest(
    path: str | Path,
    filters: FilterConfig | None = None,
    seed: int = 0,
) -> tuple[list[Document], SplitAssignment]:
    """Read a JSON-lines dataset file into filtered, normalized documents.

    Records with an empty abstract or body are removed, as are records whose
    body word count falls outside ``[min_words, max_words]``. Raises
    `CorpusError` for malformed lines (naming the line number) and when no
    document survives filtering.
    """
    filters = filters or FilterConfig()
    documents: list[Document] = []
    seen_ids: set[str] = set()
    dropped = 0
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            _validate_record(rec, lineno)
            if rec["article_id"] in seen_ids:
                raise CorpusError(f"line {lineno}: duplicate article_id {rec['article_id']!r}")
            seen_ids.add(rec["article_id"])
            doc = _record_to_document(rec)
            if doc is None or not filters.min_words <= doc.word_count <= filters.max_words:
                dropped += 1
                continue
            documents.append(doc)
    if not documents:
        raise CorpusError(f"no documents survived filtering in {path}")
    if dropped:
        log.info("dropped %d of %d records during ingestion", dropped, dropped + len(documents))
    split = make_split([d.id for d in documents], seed)
    return documents, split


# --- section resolution ------------------------------------------------------


def introduction_range(doc: Document) -> tuple[int, int]:
    """Body sentence range of the introduction.

    A section whose lowercased name contains "introduction" wins; otherwise
    the first section; documents without sections fall back to the whole body.
    """
    return _section_range(doc, "introduction", fallback_last=False)


def conclusion_range(doc: Document) -> tuple[int, int]:
    """Body sentence range of the conclusion (name contains "conclusion",
    falling back to the last section, then the whole body)."""
    return _section_range(doc, "conclusion", fallback_last=True)


def _section_range(doc: Document, keyword: str, fallback_last: bool) -> tuple[int, int]:
    for section in doc.sections:
        if keyword in section.name.lower():
            return section.start, section.end
    if doc.sections:
        section = doc.sections[-1] if fallback_last else doc.sections[0]
        return section.start, section.end
    return 0, len(doc.body_sents)


# --- persistence -------------------------------------------------------------

CORPUS_FILENAME = "corpus.jsonl"
SPLIT_FILENAME = "splits.json"


def save_corpus(documents: list[Document], split: SplitAssignment, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / CORPUS_FILENAME, "w", encoding="utf-8") as handle:
        for doc in documents:
            handle.write(json.dumps(doc.to_dict(), sort_keys=True) + "\n")
    with open(out / SPLIT_FILENAME, "w", encoding="utf-8") as handle:
        json.dump(split.to_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_corpus(corpus_dir: str | Path) -> tuple[list[Document], SplitAssignment]:
    corpus_dir = Path(corpus_dir)
    documents = []
    with open(corpus_dir / CORPUS_FILENAME, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                documents.append(Document.from_dict(json.loads(line)))
    with open(corpus_dir / SPLIT_FILENAME, encoding="utf-8") as handle:
        split = SplitAssignment.from_dict(json.load(handle))
    return documents, split
