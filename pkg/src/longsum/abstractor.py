"""Conditional abstractor: condition assembly for every conditioning variant,
segment-masked condition/target bundles, two tiny reference architectures
(encoder-decoder and decoder-only) behind one generation interface, training
with target-only loss, and greedy or beam decoding.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import torch
from torch import Tensor, nn
from torch.nn import functional as F

from .corpus import Document, conclusion_range, introduction_range
from .extractor import TrainConfig, make_optimizer
from .layers import CausalBlock, DecoderBlock, EncoderBlock
from .vocab import SEP, Vocabulary, detokenize, tokenize

log = logging.getLogger(__name__)


class ConditionVariant(str, Enum):
    NONE = "none"
    EXT = "ext"
    INTRO = "intro"
    INTRO_CONCL = "intro_concl"
    INTRO_EXT_CONCL = "intro_ext_concl"
    EXT_PARAPHRASED = "ext_paraphrased"


class ConditionError(ValueError):
    """A variant's required input is missing for a document."""


def _section_text(doc: Document, which: str, variant: ConditionVariant) -> str:
    start, end = introduction_range(doc) if which == "introduction" else conclusion_range(doc)
    text = " ".join(doc.body_sents[start:end])
    if not text:
        raise ConditionError(f"variant {variant.value}: document {doc.id} has no resolvable {which}")
    return text


def build_condition(
    doc: Document,
    variant: ConditionVariant,
    ext: Sequence[int] | None = None,
    paraphrased: Sequence[str] | None = None,
    separator: str = SEP,
) -> str:
    """Conditioning text for one document: the variant's parts, in the order
    the variant names them, joined by a single separator token."""
    if variant is ConditionVariant.NONE:
        return ""
    parts: list[str] = []
    if variant in (ConditionVariant.INTRO, ConditionVariant.INTRO_CONCL, ConditionVariant.INTRO_EXT_CONCL):
        parts.append(_section_text(doc, "introduction", variant))
    if variant in (ConditionVariant.EXT, ConditionVariant.INTRO_EXT_CONCL):
        if ext is None:
            raise ConditionError(f"variant {variant.value}: document {doc.id} has no extractive selection")
        parts.append(" ".join(doc.body_sents[j] for j in ext))
    if variant is ConditionVariant.EXT_PARAPHRASED:
        if paraphrased is None:
            raise ConditionError(f"variant {variant.value}: document {doc.id} has no paraphrased summary")
        parts.append(" ".join(paraphrased))
    if variant in (ConditionVariant.INTRO_CONCL, ConditionVariant.INTRO_EXT_CONCL):
        parts.append(_section_text(doc, "conclusion", variant))
    return f" {separator} ".join(parts)


@dataclass(frozen=True)
class ConditioningBundle:
    condition_ids: list[int]
    target_ids: list[int]
    segment_mask: list[int]  # 0 = condition, 1 = target, contiguous

    def __post_init__(self):
        expected = [0] * len(self.condition_ids) + [1] * len(self.target_ids)
        if self.segment_mask != expected:
            raise ValueError("segment_mask must be a 0-prefix over the condition "
                             "followed by a 1-suffix over the target")


def build_bundle(condition: str, target: str, vocab: Vocabulary, max_total: int) -> ConditioningBundle:
    """Tokenize condition and target into a segment-masked bundle. Over-length
    input truncates the condition from its end; the target is never cut."""
    condition_ids = tokenize(condition, vocab)
    target_ids = tokenize(target, vocab)
    if len(target_ids) > max_total:
        raise ValueError(
            f"target alone ({len(target_ids)} tokens) exceeds max_total {max_total}"
        )
    if len(condition_ids) + len(target_ids) > max_total:
        condition_ids = condition_ids[: max_total - len(target_ids)]
    mask = [0] * len(condition_ids) + [1] * len(target_ids)
    return ConditioningBundle(condition_ids, target_ids, mask)


# --- reference models ---------------------------------------------------------


class TinyEncoderDecoder(nn.Module):
    """Reference conditional generator: the condition feeds a two-block
    encoder, the target feeds a two-block decoder with cross-attention, and
    input/output embeddings are tied."""

    mode = "enc_dec"

    def __init__(
        self,
        vocab_size: int,
        pad_id: int,
        bos_id: int,
        eos_id: int,
        max_len: int = 512,
        d_model: int = 32,
        n_heads: int = 2,
        n_layers: int = 2,
        d_ff: int = 64,
    ):
        super().__init__()
        self.hparams = {
            "vocab_size": vocab_size,
            "pad_id": pad_id,
            "bos_id": bos_id,
            "eos_id": eos_id,
            "max_len": max_len,
            "d_model": d_model,
            "n_heads": n_heads,
            "n_layers": n_layers,
            "d_ff": d_ff,
        }
        self.pad_id, self.bos_id, self.eos_id = pad_id, bos_id, eos_id
        self.max_len = max_len
        self.tok_emb = nn.Embedding(vocab_size, d_model)
        self.enc_pos = nn.Embedding(max_len, d_model)
        self.dec_pos = nn.Embedding(max_len, d_model)
        self.enc_blocks = nn.ModuleList(EncoderBlock(d_model, n_heads, d_ff) for _ in range(n_layers))
        self.dec_blocks = nn.ModuleList(DecoderBlock(d_model, n_heads, d_ff) for _ in range(n_layers))

    def _embed(self, ids: Tensor, pos_table: nn.Embedding) -> Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device)
        return self.tok_emb(ids) + pos_table(positions)

    def encode_batch(self, enc_ids: Tensor, enc_mask: Tensor) -> Tensor:
        h = self._embed(enc_ids, self.enc_pos)
        for block in self.enc_blocks:
            h = block(h, enc_mask)
        return h

    def decoder_logits(self, memory: Tensor, memory_mask: Tensor, dec_in: Tensor) -> Tensor:
        h = self._embed(dec_in, self.dec_pos)
        for block in self.dec_blocks:
            h = block(h, memory, memory_mask)
        return h @ self.tok_emb.weight.T  # tied output projection

    def sequence_loss(
        self,
        enc_ids: Tensor,
        enc_mask: Tensor,
        dec_in: Tensor,
        labels: Tensor,
        label_mask: Tensor,
    ) -> Tensor:
        """Mean next-token cross-entropy over positions where label_mask=1."""
        memory = self.encode_batch(enc_ids, enc_mask)
        logits = self.decoder_logits(memory, enc_mask, dec_in)
        flat = logits.reshape(-1, logits.shape[-1])
        keep = label_mask.reshape(-1).bool()
        return F.cross_entropy(flat[keep], labels.reshape(-1)[keep])

    def batch_loss(self, bundles: list[ConditioningBundle]) -> Tensor:
        return self.sequence_loss(*seq2seq_training_tensors(bundles, self.pad_id, self.bos_id, self.eos_id))

    # generation interface
    def encode(self, condition_ids: list[int]):
        """Condition token ids -> opaque decoding state."""
        ids = condition_ids or [self.bos_id]  # empty condition gets a sentinel
        enc_ids = torch.tensor([ids], dtype=torch.long)
        enc_mask = torch.ones_like(enc_ids)
        return self.encode_batch(enc_ids, enc_mask), enc_mask

    def decode_step(self, state, prefix_ids: list[int]) -> Tensor:
        """Next-token probability distribution given the generated prefix."""
        memory, memory_mask = state
        dec_in = torch.tensor([[self.bos_id] + list(prefix_ids)], dtype=torch.long)
        logits = self.decoder_logits(memory, memory_mask, dec_in)
        return torch.softmax(logits[0, -1], dim=-1)


class TinyCausalLM(nn.Module):
    """Decoder-only reference generator: condition and target share one
    causally-masked stream and the segment mask confines the loss to the
    target region."""

    mode = "causal_lm"

    def __init__(
        self,
        vocab_size: int,
        pad_id: int,
        bos_id: int,
        eos_id: int,
        max_len: int = 1024,
        d_model: int = 32,
        n_heads: int = 2,
        n_layers: int = 2,
        d_ff: int = 64,
    ):
        super().__init__()
        self.hparams = {
            "vocab_size": vocab_size,
            "pad_id": pad_id,
            "bos_id": bos_id,
            "eos_id": eos_id,
            "max_len": max_len,
            "d_model": d_model,
            "n_heads": n_heads,
            "n_layers": n_layers,
            "d_ff": d_ff,
        }
        self.pad_id, self.bos_id, self.eos_id = pad_id, bos_id, eos_id
        self.max_len = max_len
        self.tok_emb = nn.Embedding(vocab_size, d_model)
        self.pos_emb = nn.Embedding(max_len, d_model)
        self.blocks = nn.ModuleList(CausalBlock(d_model, n_heads, d_ff) for _ in range(n_layers))

    def logits(self, ids: Tensor) -> Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device)
        h = self.tok_emb(ids) + self.pos_emb(positions)
        for block in self.blocks:
            h = block(h)
        return h @ self.tok_emb.weight.T

    def stream_loss(self, input_ids: Tensor, labels: Tensor, loss_mask: Tensor) -> Tensor:
        """Mean next-token cross-entropy over positions where loss_mask=1;
        labels at masked positions are never read."""
        logits = self.logits(input_ids)
        flat = logits.reshape(-1, logits.shape[-1])
        keep = loss_mask.reshape(-1).bool()
        return F.cross_entropy(flat[keep], labels.reshape(-1)[keep])

    def batch_loss(self, bundles: list[ConditioningBundle]) -> Tensor:
        return self.stream_loss(*causal_training_tensors(bundles, self.pad_id, self.bos_id, self.eos_id))

    # generation interface
    def encode(self, condition_ids: list[int]):
        return list(condition_ids) + [self.bos_id]

    def decode_step(self, state, prefix_ids: list[int]) -> Tensor:
        ids = torch.tensor([state + list(prefix_ids)], dtype=torch.long)
        return torch.softmax(self.logits(ids)[0, -1], dim=-1)


def reference_seq2seq(vocab: Vocabulary, max_len: int = 512, **overrides) -> TinyEncoderDecoder:
    return TinyEncoderDecoder(
        len(vocab), vocab.pad_id, vocab.bos_id, vocab.eos_id, max_len=max_len, **overrides
    )


def reference_causal_lm(vocab: Vocabulary, max_len: int = 1024, **overrides) -> TinyCausalLM:
    return TinyCausalLM(
        len(vocab), vocab.pad_id, vocab.bos_id, vocab.eos_id, max_len=max_len, **overrides
    )


# --- training tensors ---------------------------------------------------------


def seq2seq_training_tensors(
    bundles: list[ConditioningBundle],
    pad_id: int,
    bos_id: int,
    eos_id: int,
) -> tuple[Tensor, Tensor, Tensor, Tensor, Tensor]:
    """(enc_ids, enc_mask, dec_in, labels, label_mask) for teacher forcing.

    The decoder consumes [BOS] + target and predicts target + [EOS]; padded
    label positions carry mask 0.
    """
    enc_rows = [b.condition_ids or [bos_id] for b in bundles]
    dec_rows = [[bos_id] + b.target_ids for b in bundles]
    lab_rows = [b.target_ids + [eos_id] for b in bundles]
    enc_len = max(len(r) for r in enc_rows)
    dec_len = max(len(r) for r in dec_rows)
    enc_ids = torch.full((len(bundles), enc_len), pad_id, dtype=torch.long)
    enc_mask = torch.zeros((len(bundles), enc_len), dtype=torch.long)
    dec_in = torch.full((len(bundles), dec_len), pad_id, dtype=torch.long)
    labels = torch.full((len(bundles), dec_len), pad_id, dtype=torch.long)
    label_mask = torch.zeros((len(bundles), dec_len), dtype=torch.long)
    for i, (enc, dec, lab) in enumerate(zip(enc_rows, dec_rows, lab_rows)):
        enc_ids[i, : len(enc)] = torch.tensor(enc, dtype=torch.long)
        enc_mask[i, : len(enc)] = 1
        dec_in[i, : len(dec)] = torch.tensor(dec, dtype=torch.long)
        labels[i, : len(lab)] = torch.tensor(lab, dtype=torch.long)
        label_mask[i, : len(lab)] = 1
    return enc_ids, enc_mask, dec_in, labels, label_mask


def causal_training_tensors(
    bundles: list[ConditioningBundle],
    pad_id: int,
    bos_id: int,
    eos_id: int,
) -> tuple[Tensor, Tensor, Tensor]:
    """(input_ids, labels, loss_mask) over the concatenated stream
    condition + [BOS] + target + [EOS], shifted for next-token prediction.
    Only labels inside the target region (per the bundle's segment mask)
    receive loss; condition-region and pad labels are masked out."""
    streams = [b.condition_ids + [bos_id] + b.target_ids + [eos_id] for b in bundles]
    boundaries = [sum(1 for m in b.segment_mask if m == 0) for b in bundles]
    length = max(len(s) for s in streams)
    input_ids = torch.full((len(bundles), length - 1), pad_id, dtype=torch.long)
    labels = torch.full((len(bundles), length - 1), pad_id, dtype=torch.long)
    loss_mask = torch.zeros((len(bundles), length - 1), dtype=torch.long)
    for i, (stream, boundary) in enumerate(zip(streams, boundaries)):
        row = torch.tensor(stream, dtype=torch.long)
        input_ids[i, : len(stream) - 1] = row[:-1]
        labels[i, : len(stream) - 1] = row[1:]
        # label index j predicts stream position j+1; target region starts
        # right after the [BOS] at stream index `boundary`
        loss_mask[i, boundary : len(stream) - 1] = 1
    return input_ids, labels, loss_mask


def train_abstractor(
    bundles: list[ConditioningBundle],
    model: nn.Module,
    cfg: TrainConfig,
) -> tuple[nn.Module, list[float]]:
    """Teacher-forced training over target positions only, with gradient-norm
    clipping. Bundles with an empty target are skipped with a warning."""
    usable = []
    for i, bundle in enumerate(bundles):
        if bundle.target_ids:
            usable.append(bundle)
        else:
            log.warning("skipping bundle %d: empty target", i)
    if not usable:
        raise ValueError("train_abstractor requires at least one bundle with a target")
    longest = max(len(b.condition_ids) + len(b.target_ids) + 2 for b in usable)
    if longest > model.max_len:
        raise ValueError(f"bundle stream length {longest} exceeds model max_len {model.max_len}")
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    optimizer = make_optimizer(model, cfg)
    order: list[int] = []
    losses: list[float] = []
    model.train()
    for step in range(cfg.max_steps):
        if len(order) < cfg.batch_size:
            epoch = list(range(len(usable)))
            rng.shuffle(epoch)
            order.extend(epoch)
        batch = [usable[i] for i in order[: cfg.batch_size]]
        del order[: cfg.batch_size]
        loss = model.batch_loss(batch)
        optimizer.zero_grad()
        loss.backward()
        nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip_norm)
        optimizer.step()
        value = loss.item()
        if not math.isfinite(value):
            raise RuntimeError(f"non-finite training loss {value} at step {step}")
        losses.append(value)
    return model, losses


# --- generation ----------------------------------------------------------------


def parse_decode(spec: str) -> tuple[str, int]:
    """Parse a decode spec: "greedy" or "beam:<width>"."""
    if spec == "greedy":
        return "greedy", 1
    if spec.startswith("beam"):
        _, _, width = spec.partition(":")
        return "beam", int(width) if width else 4
    raise ValueError(f"unknown decode spec {spec!r}")


def generate(
    condition: str,
    model: nn.Module,
    vocab: Vocabulary,
    decode: str = "greedy",
    beam_width: int = 4,
    max_new_tokens: int = 64,
) -> str:
    """Decode a summary from the encoded condition until end-of-sequence or
    the token budget. Greedy takes the argmax each step; beam search is
    length-normalized with exponent 1.0."""
    return generate_from_ids(
        tokenize(condition, vocab), model, vocab,
        decode=decode, beam_width=beam_width, max_new_tokens=max_new_tokens,
    )


def generate_from_ids(
    condition_ids: list[int],
    model: nn.Module,
    vocab: Vocabulary,
    decode: str = "greedy",
    beam_width: int = 4,
    max_new_tokens: int = 64,
) -> str:
    """`generate` for already-tokenized (possibly truncated) conditions."""
    if max_new_tokens < 1:
        raise ValueError(f"max_new_tokens must be >= 1, got {max_new_tokens}")
    if decode not in ("greedy", "beam"):
        raise ValueError(f"unknown decode mode {decode!r}")
    model.eval()
    with torch.no_grad():
        state = model.encode(condition_ids)
        if decode == "greedy" or beam_width == 1:
            ids = _greedy(model, state, max_new_tokens)
        else:
            ids = _beam(model, state, beam_width, max_new_tokens)
    structural = {vocab.pad_id, vocab.bos_id, vocab.eos_id}
    return detokenize([i for i in ids if i not in structural], vocab)


def _greedy(model: nn.Module, state, max_new_tokens: int) -> list[int]:
    prefix: list[int] = []
    for _ in range(max_new_tokens):
        probs = model.decode_step(state, prefix)
        nxt = int(torch.argmax(probs))
        if nxt == model.eos_id:
            break
        prefix.append(nxt)
    return prefix


def _beam(model: nn.Module, state, width: int, max_new_tokens: int) -> list[int]:
    # hypotheses: (token ids, summed log prob, finished)
    live: list[tuple[list[int], float]] = [([], 0.0)]
    finished: list[tuple[list[int], float]] = []

    def normalized(item: tuple[list[int], float]) -> float:
        ids, logp = item
        return logp / max(len(ids), 1)

    for _ in range(max_new_tokens):
        candidates: list[tuple[list[int], float]] = []
        for ids, logp in live:
            probs = model.decode_step(state, ids)
            top = torch.topk(torch.log(probs), width)
            for value, token in zip(top.values.tolist(), top.indices.tolist()):
                candidates.append((ids + [token], logp + value))
        live = []
        for ids, logp in sorted(candidates, key=normalized, reverse=True)[:width]:
            if ids[-1] == model.eos_id:
                finished.append((ids[:-1], logp))
            else:
                live.append((ids, logp))
        if not live:
            break
    finished.extend(live)
    return max(finished, key=normalized)[0] if finished else []
