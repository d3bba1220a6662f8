"""Command-line entry points: the full pipeline plus each stage standalone.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import torch

from . import harness
from .abstractor import (
    ConditionVariant,
    build_bundle,
    build_condition,
    generate_from_ids,
    parse_decode,
    train_abstractor,
)
from .checkpoint import load_checkpoint, peek_kind, save_checkpoint
from .corpus import Document, FilterConfig, ingest, load_corpus, save_corpus
from .extractor import (
    TinyTransformerScorer,
    TrainConfig,
    default_anchor,
    extract_summary,
    extract_summary_leaky,
    reference_scorer,
    train_scorer,
)
from .harness import RunConfig, evaluate_extractive, evaluate_abstractive, run_pipeline
from .oracle import build_pair_datasets, load_pairs, save_pairs
from .paraphrase import load_registry, paraphrase_summary
from .report import triple_dict
from .synthetic import write_toy_corpus
from .vocab import DEFAULT_MAX_SIZE, Vocabulary

log = logging.getLogger(__name__)


def _write_jsonl(path: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def _read_jsonl(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_len=args.max_len,
        grad_clip_norm=args.clip,
        max_steps=args.steps,
        seed=args.seed,
        optimizer=args.optimizer,
    )


def _add_train_args(p: argparse.ArgumentParser, lr: float, steps: int, max_len: int) -> None:
    p.add_argument("--lr", type=float, default=lr)
    p.add_argument("--batch-size", type=int, default=24)
    p.add_argument("--max-len", type=int, default=max_len)
    p.add_argument("--clip", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=steps)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")


def _docs_for_split(corpus_dir: str, split_name: str) -> list[Document]:
    docs, split = load_corpus(corpus_dir)
    if split_name == "all":
        return docs
    wanted = getattr(split, split_name)
    return [d for d in docs if d.id in wanted]


# --- subcommands ----------------------------------------------------------------


def cmd_synth_corpus(args: argparse.Namespace) -> int:
    plants = write_toy_corpus(args.out, args.n_docs, seed=args.seed, plant=args.plant)
    print(f"wrote {len(plants)} documents to {args.out}")
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    docs, split = ingest(args.data, FilterConfig(args.min_words, args.max_words), seed=args.seed)
    save_corpus(docs, split, args.out)
    print(
        f"{len(docs)} documents -> {args.out} "
        f"(train {len(split.train)}, validation {len(split.validation)}, test {len(split.test)})"
    )
    return 0


def cmd_build_vocab(args: argparse.Namespace) -> int:
    docs = _docs_for_split(args.corpus, "train")
    texts = [s for d in docs for s in d.abstract_sents + d.body_sents]
    vocab = Vocabulary.build(texts, max_size=args.max_size)
    vocab.save(args.out)
    print(f"{len(vocab)} tokens -> {args.out}")
    return 0


def cmd_build_pairs(args: argparse.Namespace) -> int:
    docs = _docs_for_split(args.corpus, args.split)
    pairs = build_pair_datasets(docs, args.seed, per_document=args.per_document)
    save_pairs(pairs, args.out)
    positives = sum(p.label for p in pairs)
    print(f"{len(pairs)} pairs ({positives} positive) -> {args.out}")
    return 0


def cmd_train_ext(args: argparse.Namespace) -> int:
    docs = _docs_for_split(args.corpus, "all")
    vocab = Vocabulary.load(args.vocab)
    pairs = load_pairs(args.pairs)
    cfg = _train_config(args)
    torch.manual_seed(cfg.seed)
    model = reference_scorer(len(vocab), max_len=cfg.max_len)
    model, losses = train_scorer(pairs, docs, model, vocab, cfg)
    save_checkpoint(args.out, model, "scorer", {"hparams": model.hparams, "train": cfg.to_dict()})
    print(f"scorer loss {losses[0]:.4f} -> {losses[-1]:.4f}, saved to {args.out}")
    return 0


def _load_scorer(path: str) -> TinyTransformerScorer:
    payload = load_checkpoint(path, "scorer")
    model = TinyTransformerScorer(**payload["config"]["hparams"])
    model.load_state_dict(payload["state_dict"])
    return model


def cmd_extract(args: argparse.Namespace) -> int:
    docs = _docs_for_split(args.corpus, args.split)
    vocab = Vocabulary.load(args.vocab)
    model = _load_scorer(args.model)
    rows = []
    for doc in docs:
        if args.protocol == "leaky_abstract":
            picked = extract_summary_leaky(doc, model, args.k, vocab, args.max_len)
        else:
            picked = extract_summary(doc, default_anchor(doc), model, args.k, vocab, args.max_len)
        indices = list(picked.selected_body_idxs)
        rows.append(
            {"doc_id": doc.id, "indices": indices,
             "text": " ".join(doc.body_sents[j] for j in indices)}
        )
    _write_jsonl(args.out, rows)
    print(f"{len(rows)} selections -> {args.out}")
    return 0


def cmd_paraphrase(args: argparse.Namespace) -> int:
    if args.registry:
        load_registry(args.registry)
    rows = _read_jsonl(args.input)
    out_rows = [
        {"doc_id": r["doc_id"], "text": paraphrase_summary(r["text"], args.translator)}
        for r in rows
    ]
    _write_jsonl(args.out, out_rows)
    print(f"{len(out_rows)} paraphrased summaries -> {args.out}")
    return 0


def _conditions(
    docs: list[Document], args: argparse.Namespace
) -> dict[str, str]:
    variant = ConditionVariant(args.variant)
    selections = {}
    if args.selections:
        selections = {r["doc_id"]: list(r["indices"]) for r in _read_jsonl(args.selections)}
    paraphrased = {}
    if args.paraphrased:
        paraphrased = {r["doc_id"]: r["text"] for r in _read_jsonl(args.paraphrased)}
    out = {}
    for doc in docs:
        out[doc.id] = build_condition(
            doc, variant,
            ext=selections.get(doc.id),
            paraphrased=[paraphrased[doc.id]] if doc.id in paraphrased else None,
        )
    return out


def cmd_train_abs(args: argparse.Namespace) -> int:
    docs = _docs_for_split(args.corpus, "train")
    vocab = Vocabulary.load(args.vocab)
    cfg = _train_config(args)
    conditions = _conditions(docs, args)
    bundles = [
        build_bundle(conditions[d.id], " ".join(d.abstract_sents), vocab, args.max_total)
        for d in docs
    ]
    run_cfg_stub = RunConfig(
        data_path="unused", out_dir="unused",
        abstractor_mode=args.mode, max_total=args.max_total,
        max_new_tokens=args.max_new_tokens,
    )
    torch.manual_seed(cfg.seed)
    model = harness._make_abstractor(run_cfg_stub, vocab)
    model, losses = train_abstractor(bundles, model, cfg)
    kind = "seq2seq" if args.mode == "enc_dec" else "causal_lm"
    save_checkpoint(
        args.out, model, kind,
        {"hparams": model.hparams, "train": cfg.to_dict(), "variant": args.variant},
    )
    print(f"abstractor[{args.variant}] loss {losses[0]:.4f} -> {losses[-1]:.4f}, saved to {args.out}")
    return 0


def cmd_summarize(args: argparse.Namespace) -> int:
    docs = _docs_for_split(args.corpus, args.split)
    vocab = Vocabulary.load(args.vocab)
    kind = peek_kind(args.model)
    payload = load_checkpoint(args.model, kind)
    from .abstractor import TinyCausalLM, TinyEncoderDecoder

    cls = TinyEncoderDecoder if kind == "seq2seq" else TinyCausalLM
    model = cls(**payload["config"]["hparams"])
    model.load_state_dict(payload["state_dict"])
    decode_mode, beam_width = parse_decode(args.decode)
    conditions = _conditions(docs, args)
    rows = []
    for doc in docs:
        bundle = build_bundle(conditions[doc.id], "", vocab, args.max_total)
        text = generate_from_ids(
            bundle.condition_ids, model, vocab,
            decode=decode_mode, beam_width=beam_width, max_new_tokens=args.max_new_tokens,
        )
        rows.append({"doc_id": doc.id, "text": text})
    _write_jsonl(args.out, rows)
    print(f"{len(rows)} summaries -> {args.out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    docs = _docs_for_split(args.corpus, args.split)
    if args.selections:
        selections = {r["doc_id"]: list(r["indices"]) for r in _read_jsonl(args.selections)}
        avg, _ = evaluate_extractive(docs, selections)
    else:
        texts = {r["doc_id"]: r["text"] for r in _read_jsonl(args.summaries)}
        avg, _ = evaluate_abstractive(docs, texts)
    print(json.dumps(triple_dict(avg), indent=2, sort_keys=True))
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_json(args.config)
    if args.data:
        cfg.data_path = args.data
    if args.out:
        cfg.out_dir = args.out
    report = run_pipeline(cfg)
    for system in report["systems"]:
        rouge = system["rouge"]
        print(
            f"{system['name']:<28} r1 {rouge['r1']['f1']:.3f}  r2 {rouge['r2']['f1']:.3f}  "
            f"rl {rouge['rl']['f1']:.3f}  avg {rouge['avg_f']:.3f}"
        )
    print(f"oracle_dominance: {report['flags']['oracle_dominance']}")
    print(f"report: {Path(cfg.out_dir) / 'report' / 'report.json'}")
    return 0


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="longsum",
        description="Extract-then-abstract summarization for long structured documents.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-corpus", help="write a deterministic toy dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-docs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plant", choices=("paraphrase", "verbatim"), default="paraphrase")
    p.set_defaults(func=cmd_synth_corpus)

    p = sub.add_parser("preprocess", help="ingest raw records into a corpus directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-words", type=int, default=100)
    p.add_argument("--max-words", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("build-vocab", help="build a vocabulary from the training split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-size", type=int, default=DEFAULT_MAX_SIZE)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("build-pairs", help="mine labeled sentence pairs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("train", "validation", "test", "all"), default="train")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-document", action="store_true",
                   help="sample negatives per document instead of per abstract sentence")
    p.set_defaults(func=cmd_build_pairs)

    p = sub.add_parser("train-ext", help="train the sentence scorer")
    p.add_argument("--corpus", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    _add_train_args(p, lr=1e-5, steps=100, max_len=512)
    p.set_defaults(func=cmd_train_ext)

    p = sub.add_parser("extract", help="select summary sentences with a trained scorer")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("train", "validation", "test", "all"), default="all")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--max-len", type=int, default=512)
    p.add_argument("--protocol", choices=("anchored", "leaky_abstract"), default="anchored")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("paraphrase", help="round-trip summaries through a translator pair")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--translator", default="synonym")
    p.add_argument("--registry", help="JSON file mapping translator names to import paths")
    p.set_defaults(func=cmd_paraphrase)

    p = sub.add_parser("train-abs", help="train a conditional abstractor")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", default="ext",
                   choices=[v.value for v in ConditionVariant])
    p.add_argument("--selections")
    p.add_argument("--paraphrased")
    p.add_argument("--mode", choices=("causal_lm", "enc_dec"), default="causal_lm")
    p.add_argument("--max-total", type=int, default=1024)
    p.add_argument("--max-new-tokens", type=int, default=24)
    _add_train_args(p, lr=1e-5, steps=100, max_len=512)
    p.set_defaults(func=cmd_train_abs)

    p = sub.add_parser("summarize", help="generate summaries with a trained abstractor")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("train", "validation", "test", "all"), default="test")
    p.add_argument("--variant", default="ext",
                   choices=[v.value for v in ConditionVariant])
    p.add_argument("--selections")
    p.add_argument("--paraphrased")
    p.add_argument("--max-total", type=int, default=1024)
    p.add_argument("--decode", default="greedy", help='"greedy" or "beam:<width>"')
    p.add_argument("--max-new-tokens", type=int, default=24)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("evaluate", help="score selections or summaries against references")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=("train", "validation", "test", "all"), default="test")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--selections")
    group.add_argument("--summaries")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--data", help="override the config's data_path")
    p.add_argument("--out", help="override the config's out_dir")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
