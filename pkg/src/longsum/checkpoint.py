"""Versioned model checkpoints keyed by a canonical config hash, so a stage
can tell whether a saved model matches its configuration before loading it.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch

FORMAT_VERSION = 1
KINDS = ("scorer", "seq2seq", "causal_lm")


def config_hash(config: dict) -> str:
    """12 hex chars of the sha256 of the canonical JSON form of `config`."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def save_checkpoint(path: str | Path, model: torch.nn.Module, kind: str, config: dict) -> str:
    """Write model weights with enough metadata to validate on load. Returns
    the config hash stored in the file."""
    if kind not in KINDS:
        raise ValueError(f"unknown checkpoint kind {kind!r}; expected one of {KINDS}")
    digest = config_hash(config)
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "config_hash": digest,
        "state_dict": model.state_dict(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)
    return digest


def peek_kind(path: str | Path) -> str:
    """The `kind` recorded in a checkpoint, without validating the rest."""
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    return payload.get("kind", "")


def load_checkpoint(path: str | Path, expected_kind: str, expected_hash: str | None = None) -> dict:
    """Read and validate a checkpoint payload. Does not build the model; the
    caller constructs it from payload["config"] and loads the state dict."""
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"checkpoint {path}: format_version {version} != {FORMAT_VERSION}")
    kind = payload.get("kind")
    if kind != expected_kind:
        raise ValueError(f"checkpoint {path}: kind {kind!r} != expected {expected_kind!r}")
    if expected_hash is not None and payload["config_hash"] != expected_hash:
        raise ValueError(
            f"checkpoint {path}: config hash {payload['config_hash']} != expected {expected_hash}"
        )
    return payload
