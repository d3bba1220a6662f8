import json

import pytest

import longsum.paraphrase as paraphrase_mod
from longsum.checkpoint import peek_kind
from longsum.cli import main
from longsum.extractor import TrainConfig
from longsum.harness import RunConfig


def run_cli(capsys, *argv):
    rc = main(list(argv))
    assert rc == 0
    return capsys.readouterr().out


def test_stagewise_walkthrough(tmp_path, capsys):
    data = tmp_path / "data.jsonl"
    corpus = tmp_path / "corpus"
    vocab = tmp_path / "vocab.json"
    pairs = tmp_path / "pairs.jsonl"
    scorer = tmp_path / "scorer.pt"
    selections = tmp_path / "selections.jsonl"
    paraphrased = tmp_path / "paraphrased.jsonl"
    abstractor = tmp_path / "abstractor.pt"
    summaries = tmp_path / "summaries.jsonl"

    out = run_cli(capsys, "synth-corpus", "--out", str(data), "--n-docs", "12",
                  "--seed", "7")
    assert "wrote 12 documents" in out

    out = run_cli(capsys, "preprocess", "--data", str(data), "--out", str(corpus))
    assert "12 documents" in out
    assert (corpus / "corpus.jsonl").exists()
    assert (corpus / "splits.json").exists()

    out = run_cli(capsys, "build-vocab", "--corpus", str(corpus), "--out", str(vocab),
                  "--max-size", "500")
    assert "tokens" in out
    assert vocab.exists()

    out = run_cli(capsys, "build-pairs", "--corpus", str(corpus), "--out", str(pairs))
    assert "positive" in out
    rows = [json.loads(line) for line in pairs.read_text().splitlines()]
    assert rows and {r["label"] for r in rows} == {0, 1}

    out = run_cli(capsys, "train-ext", "--corpus", str(corpus), "--pairs", str(pairs),
                  "--vocab", str(vocab), "--out", str(scorer),
                  "--lr", "1e-3", "--batch-size", "8", "--max-len", "64", "--steps", "2")
    assert "saved to" in out
    assert peek_kind(scorer) == "scorer"

    out = run_cli(capsys, "extract", "--corpus", str(corpus), "--vocab", str(vocab),
                  "--model", str(scorer), "--out", str(selections),
                  "--split", "all", "--k", "2", "--max-len", "64")
    assert "12 selections" in out
    picked = [json.loads(line) for line in selections.read_text().splitlines()]
    assert all(len(r["indices"]) == 2 for r in picked)
    assert all(r["text"] for r in picked)

    out = run_cli(capsys, "paraphrase", "--input", str(selections),
                  "--out", str(paraphrased))
    assert "12 paraphrased" in out

    out = run_cli(capsys, "train-abs", "--corpus", str(corpus), "--vocab", str(vocab),
                  "--out", str(abstractor), "--variant", "ext",
                  "--selections", str(selections),
                  "--max-total", "96", "--max-new-tokens", "6",
                  "--lr", "1e-3", "--batch-size", "4", "--max-len", "128", "--steps", "2")
    assert "abstractor[ext]" in out
    assert peek_kind(abstractor) == "causal_lm"

    out = run_cli(capsys, "summarize", "--corpus", str(corpus), "--vocab", str(vocab),
                  "--model", str(abstractor), "--out", str(summaries),
                  "--variant", "ext", "--selections", str(selections),
                  "--max-total", "96", "--max-new-tokens", "6")
    assert "summaries ->" in out
    generated = [json.loads(line) for line in summaries.read_text().splitlines()]
    assert generated

    out = run_cli(capsys, "evaluate", "--corpus", str(corpus),
                  "--selections", str(selections))
    triple = json.loads(out)
    assert set(triple) == {"r1", "r2", "rl", "avg_f"}
    assert all(0.0 <= triple[m]["f1"] <= 1.0 for m in ("r1", "r2", "rl"))

    out = run_cli(capsys, "evaluate", "--corpus", str(corpus),
                  "--summaries", str(summaries))
    triple = json.loads(out)
    assert 0.0 <= triple["avg_f"] <= 1.0


def test_run_command_prints_table(tmp_path, capsys, toy_corpus_path):
    cfg = RunConfig(
        data_path=str(toy_corpus_path),
        out_dir=str(tmp_path / "run"),
        variants=["ext"],
        max_total=96,
        max_new_tokens=8,
        extractor_train=TrainConfig(
            learning_rate=1e-3, batch_size=8, max_len=64, max_steps=8, seed=0
        ),
        abstractor_train=TrainConfig(
            learning_rate=1e-3, batch_size=4, max_len=128, max_steps=10, seed=0
        ),
    )
    cfg_path = tmp_path / "config.json"
    cfg.save_json(cfg_path)

    out = run_cli(capsys, "run", "--config", str(cfg_path))
    lines = out.splitlines()
    assert any(line.startswith("oracle") for line in lines)
    assert any(line.startswith("extractive") for line in lines)
    assert any(line.startswith("abstractive:ext") for line in lines)
    assert "oracle_dominance: True" in out
    assert str(tmp_path / "run" / "report" / "report.json") in out


def test_run_command_out_override(tmp_path, capsys, toy_corpus_path):
    cfg = RunConfig(
        data_path=str(toy_corpus_path),
        out_dir=str(tmp_path / "ignored"),
        variants=["ext"],
        max_total=96,
        max_new_tokens=8,
        extractor_train=TrainConfig(
            learning_rate=1e-3, batch_size=8, max_len=64, max_steps=2, seed=0
        ),
        abstractor_train=TrainConfig(
            learning_rate=1e-3, batch_size=4, max_len=128, max_steps=2, seed=0
        ),
    )
    cfg_path = tmp_path / "config.json"
    cfg.save_json(cfg_path)

    out = run_cli(capsys, "run", "--config", str(cfg_path),
                  "--out", str(tmp_path / "actual"))
    assert (tmp_path / "actual" / "report" / "report.json").exists()
    assert not (tmp_path / "ignored").exists()
    assert "actual" in out


def test_missing_subcommand_exits():
    with pytest.raises(SystemExit):
        main([])


def test_evaluate_rejects_both_inputs(tmp_path):
    with pytest.raises(SystemExit):
        main(["evaluate", "--corpus", str(tmp_path),
              "--selections", "a", "--summaries", "b"])


def test_evaluate_requires_an_input(tmp_path):
    with pytest.raises(SystemExit):
        main(["evaluate", "--corpus", str(tmp_path)])


def test_unknown_translator_is_reported(tmp_path):
    source = tmp_path / "in.jsonl"
    source.write_text(json.dumps({"doc_id": "x", "text": "a b ."}) + "\n")
    with pytest.raises(KeyError) as err:
        main(["paraphrase", "--input", str(source), "--out", str(tmp_path / "o.jsonl"),
              "--translator", "nope"])
    assert "unknown translator" in str(err.value)


def test_paraphrase_with_registry(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(paraphrase_mod, "_REGISTRY", {})
    registry = tmp_path / "registry.json"
    registry.write_text(json.dumps({"rev": "longsum.paraphrase:ReverseTranslator"}))
    source = tmp_path / "in.jsonl"
    source.write_text(json.dumps({"doc_id": "x", "text": "alpha beta gamma ."}) + "\n")
    target = tmp_path / "out.jsonl"

    out = run_cli(capsys, "paraphrase", "--input", str(source), "--out", str(target),
                  "--registry", str(registry), "--translator", "rev")
    assert "1 paraphrased" in out
    row = json.loads(target.read_text())
    assert row["text"] == "alpha beta gamma ."  # reversing twice restores the sentence
