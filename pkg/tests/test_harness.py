import json
import logging
from pathlib import Path

import pytest

from longsum.corpus import Document
from longsum.extractor import TrainConfig
from longsum.harness import (
    RunConfig,
    _run_stage,
    evaluate_abstractive,
    evaluate_extractive,
    resolve_k,
    run_hash,
    run_pipeline,
)
from longsum.report import validate_report
from longsum.rouge import corpus_average, score_texts
from longsum.synthetic import write_toy_corpus


def base_cfg(**overrides):
    params = dict(data_path="data.jsonl", out_dir="out")
    params.update(overrides)
    return RunConfig(**params)


class TestRunConfig:
    def test_defaults_valid(self):
        cfg = base_cfg()
        assert cfg.variants == ["none", "ext"]
        assert cfg.anchor_protocol == "anchored"

    def test_empty_variants_rejected(self):
        with pytest.raises(ValueError):
            base_cfg(variants=[])

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError) as err:
            base_cfg(variants=["telepathy"])
        assert "telepathy" in str(err.value)
        assert "intro_ext_concl" in str(err.value)

    def test_duplicate_variants_rejected(self):
        with pytest.raises(ValueError):
            base_cfg(variants=["ext", "ext"])

    def test_bad_protocol_rejected(self):
        with pytest.raises(ValueError):
            base_cfg(anchor_protocol="psychic")

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            base_cfg(abstractor_mode="rnn")

    def test_bad_k_rejected(self):
        with pytest.raises(ValueError):
            base_cfg(k=0)

    def test_bad_max_total_rejected(self):
        with pytest.raises(ValueError):
            base_cfg(max_total=1)

    def test_bad_decode_rejected(self):
        with pytest.raises(ValueError):
            base_cfg(decode="sample")

    def test_dict_round_trip_revives_train_configs(self):
        cfg = base_cfg(extractor_train=TrainConfig(max_steps=5))
        revived = RunConfig.from_dict(cfg.to_dict())
        assert revived == cfg
        assert isinstance(revived.extractor_train, TrainConfig)

    def test_json_round_trip(self, tmp_path):
        cfg = base_cfg(variants=["ext", "intro"], k=3)
        path = tmp_path / "config.json"
        cfg.save_json(path)
        assert RunConfig.from_json(path) == cfg


class TestRunHash:
    def test_out_dir_ignored(self, tmp_path):
        data = tmp_path / "data.jsonl"
        data.write_text("{}\n")
        a = run_hash(base_cfg(data_path=str(data), out_dir="here"))
        b = run_hash(base_cfg(data_path=str(data), out_dir="elsewhere"))
        assert a == b

    def test_data_content_matters(self, tmp_path):
        data = tmp_path / "data.jsonl"
        data.write_text("{}\n")
        before = run_hash(base_cfg(data_path=str(data)))
        data.write_text('{"x": 1}\n')
        after = run_hash(base_cfg(data_path=str(data)))
        assert before != after

    def test_settings_matter(self, tmp_path):
        data = tmp_path / "data.jsonl"
        data.write_text("{}\n")
        a = run_hash(base_cfg(data_path=str(data), seed=0))
        b = run_hash(base_cfg(data_path=str(data), seed=1))
        assert a != b


class TestRunStage:
    def test_recompute_then_skip(self, tmp_path):
        calls = []

        def compute(stage):
            calls.append(1)
            (stage / "out.txt").write_text("payload")
            return ["out.txt"]

        _run_stage(tmp_path, "demo", "key-1", compute)
        _run_stage(tmp_path, "demo", "key-1", compute)
        assert len(calls) == 1

    def test_key_change_recomputes_and_clears(self, tmp_path):
        def compute_a(stage):
            (stage / "a.txt").write_text("a")
            return ["a.txt"]

        def compute_b(stage):
            (stage / "b.txt").write_text("b")
            return ["b.txt"]

        _run_stage(tmp_path, "demo", "key-1", compute_a)
        _run_stage(tmp_path, "demo", "key-2", compute_b)
        assert not (tmp_path / "demo" / "a.txt").exists()
        assert (tmp_path / "demo" / "b.txt").exists()

    def test_missing_output_forces_recompute(self, tmp_path):
        calls = []

        def compute(stage):
            calls.append(1)
            (stage / "out.txt").write_text("payload")
            return ["out.txt"]

        _run_stage(tmp_path, "demo", "key-1", compute)
        (tmp_path / "demo" / "out.txt").unlink()
        _run_stage(tmp_path, "demo", "key-1", compute)
        assert len(calls) == 2


def fixture_docs():
    return [
        Document("d0", ["the cat sat ."], ["the cat sat .", "dogs bark ."], [], 6),
        Document("d1", ["a b"], ["a c", "b d"], [], 4),
    ]


class TestEvaluate:
    def test_extractive_matches_direct_chain(self):
        docs = fixture_docs()
        selections = {"d0": [0], "d1": [0, 1]}
        avg, per_doc = evaluate_extractive(docs, selections)
        direct = [
            score_texts("the cat sat .", "the cat sat ."),
            score_texts("a c b d", "a b"),
        ]
        assert [doc_id for doc_id, _ in per_doc] == ["d0", "d1"]
        assert [t for _, t in per_doc] == direct
        assert avg == corpus_average(direct)

    def test_extractive_verbatim_selection_is_perfect(self):
        docs = fixture_docs()[:1]
        avg, _ = evaluate_extractive(docs, {"d0": [0]})
        assert avg.r1.f1 == 1.0
        assert avg.rl.f1 == 1.0

    def test_extractive_empty_selection_scores_zero(self):
        docs = fixture_docs()
        avg, _ = evaluate_extractive(docs, {"d0": [], "d1": []})
        assert avg.r1.f1 == 0.0
        assert avg.r2.f1 == 0.0
        assert avg.rl.f1 == 0.0

    def test_extractive_missing_selection_names_doc(self):
        docs = fixture_docs()
        with pytest.raises(KeyError) as err:
            evaluate_extractive(docs, {"d0": [0]})
        assert "d1" in str(err.value)

    def test_abstractive_reference_texts_are_perfect(self):
        docs = fixture_docs()
        texts = {d.id: " ".join(d.abstract_sents) for d in docs}
        avg, _ = evaluate_abstractive(docs, texts)
        assert avg.r1.f1 == 1.0

    def test_abstractive_matches_direct_chain(self):
        docs = fixture_docs()
        texts = {"d0": "the cat ran .", "d1": "b"}
        avg, per_doc = evaluate_abstractive(docs, texts)
        direct = [
            score_texts("the cat ran .", "the cat sat ."),
            score_texts("b", "a b"),
        ]
        assert [t for _, t in per_doc] == direct
        assert avg == corpus_average(direct)

    def test_abstractive_missing_text_names_doc(self):
        docs = fixture_docs()
        with pytest.raises(KeyError) as err:
            evaluate_abstractive(docs, {"d0": "x"})
        assert "d1" in str(err.value)


class TestResolveK:
    def test_configured_value_wins(self):
        assert resolve_k(5, fixture_docs()) == 5

    def test_mean_abstract_length(self):
        docs = [
            Document("a", ["s"] * 3, ["b"], [], 1),
            Document("b", ["s"] * 3, ["b"], [], 1),
            Document("c", ["s"] * 2, ["b"], [], 1),
        ]
        assert resolve_k(None, docs) == 3  # mean 8/3 rounds up

    def test_floor_of_one(self):
        docs = [Document("a", ["s"], ["b"], [], 1)]
        assert resolve_k(None, docs) == 1


@pytest.fixture(scope="module")
def mini_cfg(tmp_path_factory, toy_corpus_path):
    out = tmp_path_factory.mktemp("mini-run")
    return RunConfig(
        data_path=str(toy_corpus_path),
        out_dir=str(out),
        seed=0,
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


@pytest.fixture(scope="module")
def mini_report(mini_cfg):
    return run_pipeline(mini_cfg)


class TestPipeline:
    def test_report_is_schema_valid(self, mini_report):
        validate_report(mini_report)

    def test_systems_rows(self, mini_report):
        names = [s["name"] for s in mini_report["systems"]]
        assert names == ["oracle", "extractive", "abstractive:ext"]
        counts = {s["n_documents"] for s in mini_report["systems"]}
        assert len(counts) == 1

    def test_oracle_dominance_on_planted_corpus(self, mini_report):
        assert mini_report["flags"]["oracle_dominance"] is True

    def test_artifacts_on_disk(self, mini_cfg, mini_report):
        out = Path(mini_cfg.out_dir)
        assert (out / "config.json").exists()
        for stage in ("corpus", "vocab", "pairs", "extractor", "selections", "gold",
                      "abstractor_ext", "report"):
            assert (out / stage / "stage.json").exists(), stage
        assert (out / "report" / "report.json").exists()
        assert (out / "report" / "scores.png").exists()
        assert (out / "report" / "generated.jsonl").exists()

    def test_config_hash_recorded(self, mini_cfg, mini_report):
        assert mini_report["metadata"]["config_hash"] == run_hash(mini_cfg)
        assert mini_report["metadata"]["seed"] == mini_cfg.seed

    def test_per_document_reaggregates_exactly(self, mini_report):
        for system in mini_report["systems"]:
            rows = [
                r["rouge"]
                for r in mini_report["per_document"]
                if r["system"] == system["name"]
            ]
            assert len(rows) == system["n_documents"]
            for metric in ("r1", "r2", "rl"):
                for part in ("p", "r", "f1"):
                    mean = sum(r[metric][part] for r in rows) / len(rows)
                    assert mean == system["rouge"][metric][part]

    def test_rerun_skips_every_stage(self, mini_cfg, mini_report, caplog):
        with caplog.at_level(logging.INFO, logger="longsum.harness"):
            again = run_pipeline(mini_cfg)
        assert caplog.text.count("unchanged, skipping") == 8
        assert again == mini_report


def test_degenerate_split_rejected(tmp_path):
    data = tmp_path / "tiny.jsonl"
    write_toy_corpus(data, 2, seed=0)
    cfg = RunConfig(data_path=str(data), out_dir=str(tmp_path / "out"))
    with pytest.raises(ValueError) as err:
        run_pipeline(cfg)
    assert "degenerate split" in str(err.value)


def test_failed_stage_keeps_partial_outputs(tmp_path, toy_corpus_path):
    cfg = RunConfig(
        data_path=str(toy_corpus_path),
        out_dir=str(tmp_path / "out"),
        variants=["ext"],
        max_total=2,  # no target fits, so the abstractor stage must fail
        extractor_train=TrainConfig(
            learning_rate=1e-3, batch_size=8, max_len=64, max_steps=2, seed=0
        ),
        abstractor_train=TrainConfig(
            learning_rate=1e-3, batch_size=4, max_len=64, max_steps=2, seed=0
        ),
    )
    with pytest.raises(ValueError):
        run_pipeline(cfg)
    for stage in ("corpus", "vocab", "pairs", "extractor", "selections", "gold"):
        assert (tmp_path / "out" / stage / "stage.json").exists(), stage


def test_stage_markers_carry_keys(mini_cfg, mini_report):
    marker = json.loads((Path(mini_cfg.out_dir) / "corpus" / "stage.json").read_text())
    assert set(marker) == {"key", "outputs"}
    assert sorted(marker["outputs"]) == ["corpus.jsonl", "splits.json"]
