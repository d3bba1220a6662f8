"""Evaluation reports: a schema-validated JSON document, flat CSV exports,
and a score figure, all written deterministically so reruns are comparable
byte for byte (the created_utc field is the one exception).
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .rouge import RougeTriple

_SCORE = {
    "type": "object",
    "required": ["p", "r", "f1"],
    "properties": {
        "p": {"type": "number", "minimum": 0, "maximum": 1},
        "r": {"type": "number", "minimum": 0, "maximum": 1},
        "f1": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

_TRIPLE = {
    "type": "object",
    "required": ["r1", "r2", "rl", "avg_f"],
    "properties": {
        "r1": {"$ref": "#/definitions/score"},
        "r2": {"$ref": "#/definitions/score"},
        "rl": {"$ref": "#/definitions/score"},
        "avg_f": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["metadata", "systems", "per_document", "flags"],
    "definitions": {"score": _SCORE, "triple": _TRIPLE},
    "properties": {
        "metadata": {
            "type": "object",
            "required": ["config_hash", "seed", "created_utc", "anchor_protocol"],
            "properties": {
                "config_hash": {"type": "string", "pattern": "^[0-9a-f]{12}$"},
                "seed": {"type": "integer"},
                "created_utc": {"type": "string"},
                "anchor_protocol": {"type": "string", "enum": ["anchored", "leaky_abstract"]},
            },
        },
        "systems": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "n_documents", "rouge"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "n_documents": {"type": "integer", "minimum": 1},
                    "rouge": {"$ref": "#/definitions/triple"},
                },
            },
        },
        "per_document": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["doc_id", "system", "rouge"],
                "properties": {
                    "doc_id": {"type": "string", "minLength": 1},
                    "system": {"type": "string", "minLength": 1},
                    "rouge": {"$ref": "#/definitions/triple"},
                },
            },
        },
        "flags": {
            "type": "object",
            "required": ["oracle_dominance"],
            "properties": {"oracle_dominance": {"type": "boolean"}},
        },
    },
}


def triple_dict(triple: RougeTriple) -> dict:
    """JSON form of a score triple with the three-way f1 mean attached."""
    d = triple.to_dict()
    d["avg_f"] = (triple.r1.f1 + triple.r2.f1 + triple.rl.f1) / 3.0
    return d


def validate_report(report: dict) -> None:
    jsonschema.validate(report, REPORT_SCHEMA)


def build_metadata(config_hash: str, seed: int, anchor_protocol: str) -> dict:
    return {
        "config_hash": config_hash,
        "seed": seed,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "anchor_protocol": anchor_protocol,
    }


_CSV_COLUMNS = ["name", "n_documents"] + [
    f"{m}_{part}" for m in ("r1", "r2", "rl") for part in ("p", "r", "f1")
] + ["avg_f"]


def _flat_row(name: str, n_documents: int, rouge: dict) -> dict:
    row: dict = {"name": name, "n_documents": n_documents}
    for metric in ("r1", "r2", "rl"):
        for part in ("p", "r", "f1"):
            row[f"{metric}_{part}"] = repr(rouge[metric][part])
    row["avg_f"] = repr(rouge["avg_f"])
    return row


def write_report(report: dict, out_dir: str | Path) -> dict[str, Path]:
    """Validate and write report.json, report.csv, per_document.csv, and
    scores.png under `out_dir`. Returns the paths keyed by artifact name."""
    validate_report(report)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "report.json",
        "csv": out / "report.csv",
        "per_document": out / "per_document.csv",
        "figure": out / "scores.png",
    }
    with open(paths["json"], "w", encoding="utf-8") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write("\n")
    with open(paths["csv"], "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=_CSV_COLUMNS)
        writer.writeheader()
        for system in report["systems"]:
            writer.writerow(_flat_row(system["name"], system["n_documents"], system["rouge"]))
    with open(paths["per_document"], "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=["doc_id"] + _CSV_COLUMNS)
        writer.writeheader()
        for row in report["per_document"]:
            flat = _flat_row(row["system"], 1, row["rouge"])
            flat["doc_id"] = row["doc_id"]
            writer.writerow(flat)
    _write_figure(report, paths["figure"])
    return paths


def _write_figure(report: dict, path: Path) -> None:
    """Grouped bars of f1 per system for each score type."""
    systems = report["systems"]
    names = [s["name"] for s in systems]
    metrics = ("r1", "r2", "rl")
    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(names)), 4.0))
    width = 0.8 / len(metrics)
    for m, metric in enumerate(metrics):
        xs = [i + (m - 1) * width for i in range(len(names))]
        ys = [s["rouge"][metric]["f1"] for s in systems]
        ax.bar(xs, ys, width=width, label=metric)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("f1")
    ax.set_ylim(0.0, 1.0)
    ax.legend()
    ax.set_title("summary quality by system")
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def load_report(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as handle:
        report = json.load(handle)
    validate_report(report)
    return report
