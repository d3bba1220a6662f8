"""End-to-end pipeline: ingest, vocabulary, pair mining, scorer training,
sentence selection, optional paraphrasing, one abstractor per conditioning
variant, and a final evaluation report.

Every stage is content-addressed: its inputs are hashed into a key stored in
a stage.json marker next to the outputs, and a rerun with an unchanged key
loads the outputs instead of recomputing them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import torch

from .abstractor import (
    ConditioningBundle,
    ConditionVariant,
    TinyCausalLM,
    TinyEncoderDecoder,
    build_bundle,
    build_condition,
    generate_from_ids,
    parse_decode,
    reference_causal_lm,
    reference_seq2seq,
    train_abstractor,
)
from .checkpoint import config_hash, load_checkpoint, save_checkpoint
from .corpus import Document, FilterConfig, SplitAssignment, ingest, load_corpus, save_corpus
from .extractor import (
    TinyTransformerScorer,
    TrainConfig,
    default_anchor,
    extract_summary,
    extract_summary_leaky,
    reference_scorer,
    train_scorer,
)
from .oracle import build_gold_extract, build_pair_datasets, load_pairs, save_pairs
from .paraphrase import paraphrase_summary
from .report import build_metadata, triple_dict, validate_report, write_report
from .rouge import RougeTriple, corpus_average, score_texts
from .vocab import DEFAULT_MAX_SIZE, Vocabulary

log = logging.getLogger(__name__)

ANCHOR_PROTOCOLS = ("anchored", "leaky_abstract")


@dataclass
class RunConfig:
    """Everything one pipeline run depends on; serializes to a single JSON
    object and back without loss."""

    data_path: str
    out_dir: str
    seed: int = 0
    min_words: int = 100
    max_words: int = 20000
    vocab_max_size: int = DEFAULT_MAX_SIZE
    variants: list[str] = field(default_factory=lambda: ["none", "ext"])
    anchor_protocol: str = "anchored"
    k: int | None = None
    translator: str = "synonym"
    decode: str = "greedy"
    max_new_tokens: int = 24
    abstractor_mode: str = "causal_lm"  # or "enc_dec"
    max_total: int = 1024
    extractor_train: TrainConfig = field(default_factory=TrainConfig)
    abstractor_train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not self.variants:
            raise ValueError("variants must be non-empty")
        known = [v.value for v in ConditionVariant]
        for name in self.variants:
            if name not in known:
                raise ValueError(f"unknown conditioning variant {name!r}; known: {known}")
        if len(set(self.variants)) != len(self.variants):
            raise ValueError("variants must be unique")
        if self.anchor_protocol not in ANCHOR_PROTOCOLS:
            raise ValueError(
                f"anchor_protocol must be one of {ANCHOR_PROTOCOLS}, got {self.anchor_protocol!r}"
            )
        if self.abstractor_mode not in ("causal_lm", "enc_dec"):
            raise ValueError(f"unknown abstractor_mode {self.abstractor_mode!r}")
        if self.k is not None and self.k < 1:
            raise ValueError(f"k must be >= 1 when given, got {self.k}")
        if self.max_total < 2:
            raise ValueError(f"max_total must be >= 2, got {self.max_total}")
        parse_decode(self.decode)
        if isinstance(self.extractor_train, dict):
            self.extractor_train = TrainConfig(**self.extractor_train)
        if isinstance(self.abstractor_train, dict):
            self.abstractor_train = TrainConfig(**self.abstractor_train)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))

    def save_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")


def _data_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_hash(cfg: RunConfig) -> str:
    """Identity of the computation: the full config minus its file locations,
    plus a digest of the input data itself."""
    payload = cfg.to_dict()
    payload.pop("out_dir")
    payload.pop("data_path")
    return config_hash({"config": payload, "data_sha256": _data_digest(cfg.data_path)})


# --- stage plumbing ------------------------------------------------------------


def _run_stage(out: Path, name: str, key: str, compute: Callable[[Path], list[str]]) -> Path:
    """Run one content-addressed stage. `compute` fills the stage directory
    and returns the filenames it wrote; an unchanged key with intact outputs
    short-circuits."""
    stage_dir = out / name
    marker = stage_dir / "stage.json"
    if marker.exists():
        meta = json.loads(marker.read_text())
        if meta.get("key") == key and all((stage_dir / f).exists() for f in meta.get("outputs", [])):
            log.info("stage %-18s unchanged, skipping", name)
            return stage_dir
    if stage_dir.exists():
        shutil.rmtree(stage_dir)
    stage_dir.mkdir(parents=True)
    started = time.perf_counter()
    outputs = compute(stage_dir)
    with open(marker, "w", encoding="utf-8") as handle:
        json.dump({"key": key, "outputs": outputs}, handle, indent=2, sort_keys=True)
        handle.write("\n")
    log.info("stage %-18s done in %.1fs", name, time.perf_counter() - started)
    return stage_dir


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


# --- evaluation ----------------------------------------------------------------


def _reference_text(doc: Document) -> str:
    return " ".join(doc.abstract_sents)


def evaluate_extractive(
    docs: list[Document], selections: dict[str, list[int]]
) -> tuple[RougeTriple, list[tuple[str, RougeTriple]]]:
    """Corpus-average and per-document scores of sentence selections against
    each document's reference abstract. Every document must have a selection."""
    per_doc = []
    for doc in docs:
        if doc.id not in selections:
            raise KeyError(f"no selection for document {doc.id}")
        text = " ".join(doc.body_sents[j] for j in selections[doc.id])
        per_doc.append((doc.id, score_texts(text, _reference_text(doc))))
    return corpus_average([t for _, t in per_doc]), per_doc


def evaluate_abstractive(
    docs: list[Document], texts: dict[str, str]
) -> tuple[RougeTriple, list[tuple[str, RougeTriple]]]:
    """Same as evaluate_extractive but for already-written summary texts."""
    per_doc = []
    for doc in docs:
        if doc.id not in texts:
            raise KeyError(f"no summary for document {doc.id}")
        per_doc.append((doc.id, score_texts(texts[doc.id], _reference_text(doc))))
    return corpus_average([t for _, t in per_doc]), per_doc


def resolve_k(cfg_k: int | None, train_docs: list[Document]) -> int:
    """Selection size: configured value, else the mean reference length."""
    if cfg_k is not None:
        return cfg_k
    mean = sum(len(d.abstract_sents) for d in train_docs) / len(train_docs)
    return max(1, round(mean))


# --- model factories -----------------------------------------------------------


def _make_abstractor(cfg: RunConfig, vocab: Vocabulary) -> TinyCausalLM | TinyEncoderDecoder:
    # positions must cover condition + sentinels + the longest decode
    max_len = cfg.max_total + 2 + cfg.max_new_tokens
    if cfg.abstractor_mode == "enc_dec":
        return reference_seq2seq(vocab, max_len=max_len)
    return reference_causal_lm(vocab, max_len=max_len)


def _load_scorer(path: Path) -> TinyTransformerScorer:
    payload = load_checkpoint(path, "scorer")
    model = TinyTransformerScorer(**payload["config"]["hparams"])
    model.load_state_dict(payload["state_dict"])
    return model


def _load_abstractor(path: Path, kind: str) -> TinyCausalLM | TinyEncoderDecoder:
    payload = load_checkpoint(path, kind)
    cls = TinyEncoderDecoder if kind == "seq2seq" else TinyCausalLM
    model = cls(**payload["config"]["hparams"])
    model.load_state_dict(payload["state_dict"])
    return model


# --- pipeline ------------------------------------------------------------------


def _split_docs(docs: list[Document], ids: set[str]) -> list[Document]:
    return [d for d in docs if d.id in ids]


def _condition_for(
    doc: Document,
    variant: ConditionVariant,
    selections: dict[str, list[int]],
    paraphrased: dict[str, str],
) -> str:
    ext = selections.get(doc.id)
    para = [paraphrased[doc.id]] if doc.id in paraphrased else None
    return build_condition(doc, variant, ext=ext, paraphrased=para)


def run_pipeline(cfg: RunConfig) -> dict:
    """Execute every stage and return the validated report."""
    torch.set_num_threads(1)  # keeps reruns bit-identical regardless of host load
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save_json(out / "config.json")
    overall = run_hash(cfg)
    data_sha = _data_digest(cfg.data_path)
    variants = [ConditionVariant(v) for v in cfg.variants]

    # corpus
    corpus_key = config_hash(
        {"stage": "corpus", "data": data_sha, "min_words": cfg.min_words,
         "max_words": cfg.max_words, "seed": cfg.seed}
    )

    def build_corpus(stage: Path) -> list[str]:
        docs, split = ingest(
            cfg.data_path, FilterConfig(cfg.min_words, cfg.max_words), seed=cfg.seed
        )
        save_corpus(docs, split, stage)
        return ["corpus.jsonl", "splits.json"]

    stage = _run_stage(out, "corpus", corpus_key, build_corpus)
    docs, split = load_corpus(stage)
    by_id = {d.id: d for d in docs}
    train_docs = _split_docs(docs, split.train)
    test_docs = _split_docs(docs, split.test)
    if not train_docs or not test_docs:
        raise ValueError(
            f"degenerate split: {len(train_docs)} train / {len(test_docs)} test documents"
        )
    k = resolve_k(cfg.k, train_docs)

    # vocabulary, from training text only
    vocab_key = config_hash({"stage": "vocab", "corpus": corpus_key, "max_size": cfg.vocab_max_size})

    def build_vocab(stage: Path) -> list[str]:
        texts = [s for d in train_docs for s in d.abstract_sents + d.body_sents]
        Vocabulary.build(texts, max_size=cfg.vocab_max_size).save(stage / "vocab.txt")
        return ["vocab.txt"]

    stage = _run_stage(out, "vocab", vocab_key, build_vocab)
    vocab = Vocabulary.load(stage / "vocab.txt")

    # labeled sentence pairs, training split only
    pairs_key = config_hash({"stage": "pairs", "corpus": corpus_key, "seed": cfg.seed})

    def build_pairs(stage: Path) -> list[str]:
        save_pairs(build_pair_datasets(train_docs, cfg.seed), stage / "pairs.jsonl")
        return ["pairs.jsonl"]

    stage = _run_stage(out, "pairs", pairs_key, build_pairs)
    pairs = load_pairs(stage / "pairs.jsonl")

    # sentence scorer
    scorer_cfg = {"hparams": None, "train": cfg.extractor_train.to_dict()}
    extractor_key = config_hash(
        {"stage": "extractor", "pairs": pairs_key, "vocab": vocab_key,
         "train": cfg.extractor_train.to_dict()}
    )

    def build_extractor(stage: Path) -> list[str]:
        torch.manual_seed(cfg.extractor_train.seed)  # init draws from the global stream
        model = reference_scorer(len(vocab), max_len=cfg.extractor_train.max_len)
        model, losses = train_scorer(pairs, train_docs, model, vocab, cfg.extractor_train)
        scorer_cfg["hparams"] = model.hparams
        save_checkpoint(stage / "extractor.pt", model, "scorer", scorer_cfg)
        log.info("scorer loss %.4f -> %.4f", losses[0], losses[-1])
        return ["extractor.pt"]

    stage = _run_stage(out, "extractor", extractor_key, build_extractor)
    scorer = _load_scorer(stage / "extractor.pt")

    # sentence selection for every document
    selections_key = config_hash(
        {"stage": "selections", "extractor": extractor_key, "protocol": cfg.anchor_protocol, "k": k}
    )

    def build_selections(stage: Path) -> list[str]:
        rows = []
        for doc in docs:
            if cfg.anchor_protocol == "leaky_abstract":
                picked = extract_summary_leaky(doc, scorer, k, vocab, cfg.extractor_train.max_len)
            else:
                anchor = default_anchor(doc)
                picked = extract_summary(doc, anchor, scorer, k, vocab, cfg.extractor_train.max_len)
            indices = list(picked.selected_body_idxs)
            rows.append(
                {"doc_id": doc.id, "indices": indices,
                 "text": " ".join(doc.body_sents[j] for j in indices)}
            )
        _write_jsonl(stage / "selections.jsonl", rows)
        return ["selections.jsonl"]

    stage = _run_stage(out, "selections", selections_key, build_selections)
    selections = {r["doc_id"]: list(r["indices"]) for r in _read_jsonl(stage / "selections.jsonl")}

    # lexical-overlap gold selections, used as the oracle reference system
    gold_key = config_hash({"stage": "gold", "corpus": corpus_key, "k": k})

    def build_gold(stage: Path) -> list[str]:
        rows = []
        for doc in docs:
            gold = build_gold_extract(doc, k)
            rows.append({"doc_id": doc.id, "indices": list(gold.selected_body_idxs)})
        _write_jsonl(stage / "gold.jsonl", rows)
        return ["gold.jsonl"]

    stage = _run_stage(out, "gold", gold_key, build_gold)
    gold = {r["doc_id"]: list(r["indices"]) for r in _read_jsonl(stage / "gold.jsonl")}

    # paraphrased selections, only when a variant needs them
    paraphrased: dict[str, str] = {}
    paraphrase_key = config_hash(
        {"stage": "paraphrase", "selections": selections_key, "translator": cfg.translator}
    )
    if ConditionVariant.EXT_PARAPHRASED in variants:

        def build_paraphrase(stage: Path) -> list[str]:
            rows = []
            for doc in docs:
                text = " ".join(doc.body_sents[j] for j in selections[doc.id])
                rows.append({"doc_id": doc.id, "text": paraphrase_summary(text, cfg.translator)})
            _write_jsonl(stage / "paraphrased.jsonl", rows)
            return ["paraphrased.jsonl"]

        stage = _run_stage(out, "paraphrase", paraphrase_key, build_paraphrase)
        paraphrased = {r["doc_id"]: r["text"] for r in _read_jsonl(stage / "paraphrased.jsonl")}

    # one abstractor per conditioning variant
    kind = "seq2seq" if cfg.abstractor_mode == "enc_dec" else "causal_lm"
    abstractors: dict[ConditionVariant, TinyCausalLM | TinyEncoderDecoder] = {}
    for variant in variants:
        abs_key = config_hash(
            {"stage": "abstractor", "variant": variant.value, "selections": selections_key,
             "paraphrase": paraphrase_key if variant is ConditionVariant.EXT_PARAPHRASED else None,
             "vocab": vocab_key, "mode": cfg.abstractor_mode, "max_total": cfg.max_total,
             "train": cfg.abstractor_train.to_dict()}
        )

        def build_abstractor(stage: Path, variant: ConditionVariant = variant) -> list[str]:
            bundles = []
            for doc in train_docs:
                condition = _condition_for(doc, variant, selections, paraphrased)
                bundles.append(build_bundle(condition, _reference_text(doc), vocab, cfg.max_total))
            torch.manual_seed(cfg.abstractor_train.seed)
            model = _make_abstractor(cfg, vocab)
            model, losses = train_abstractor(bundles, model, cfg.abstractor_train)
            save_checkpoint(
                stage / "model.pt", model, kind,
                {"hparams": model.hparams, "train": cfg.abstractor_train.to_dict(),
                 "variant": variant.value},
            )
            log.info("abstractor[%s] loss %.4f -> %.4f", variant.value, losses[0], losses[-1])
            return ["model.pt"]

        stage = _run_stage(out, f"abstractor_{variant.value}", abs_key, build_abstractor)
        abstractors[variant] = _load_abstractor(stage / "model.pt", kind)

    # generation, evaluation, report
    report_key = config_hash(
        {"stage": "report", "overall": overall, "selections": selections_key, "gold": gold_key}
    )

    def build_report_stage(stage: Path) -> list[str]:
        decode_mode, beam_width = parse_decode(cfg.decode)
        generated_rows = []
        systems = []
        per_document = []

        def add_system(name: str, corpus_triple: RougeTriple, per_doc) -> dict:
            row = {"name": name, "n_documents": len(test_docs), "rouge": triple_dict(corpus_triple)}
            systems.append(row)
            for doc_id, triple in per_doc:
                per_document.append({"doc_id": doc_id, "system": name, "rouge": triple_dict(triple)})
            return row

        oracle_avg, oracle_docs = evaluate_extractive(test_docs, gold)
        add_system("oracle", oracle_avg, oracle_docs)
        ext_avg, ext_docs = evaluate_extractive(test_docs, selections)
        add_system("extractive", ext_avg, ext_docs)

        for variant in variants:
            model = abstractors[variant]
            texts = {}
            for doc in test_docs:
                condition = _condition_for(doc, variant, selections, paraphrased)
                bundle = build_bundle(condition, "", vocab, cfg.max_total)
                texts[doc.id] = generate_from_ids(
                    bundle.condition_ids, model, vocab,
                    decode=decode_mode, beam_width=beam_width,
                    max_new_tokens=cfg.max_new_tokens,
                )
                generated_rows.append(
                    {"doc_id": doc.id, "variant": variant.value, "text": texts[doc.id]}
                )
            avg, per_doc = evaluate_abstractive(test_docs, texts)
            add_system(f"abstractive:{variant.value}", avg, per_doc)

        report = {
            "metadata": build_metadata(overall, cfg.seed, cfg.anchor_protocol),
            "systems": systems,
            "per_document": per_document,
            "flags": {
                "oracle_dominance": oracle_avg.r1.f1 >= ext_avg.r1.f1,
            },
        }
        validate_report(report)
        _write_jsonl(stage / "generated.jsonl", generated_rows)
        write_report(report, stage)
        return ["generated.jsonl", "report.json", "report.csv", "per_document.csv", "scores.png"]

    stage = _run_stage(out, "report", report_key, build_report_stage)
    with open(stage / "report.json", encoding="utf-8") as handle:
        return json.load(handle)
