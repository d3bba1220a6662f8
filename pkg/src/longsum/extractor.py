"""Extractive scorer: dual-classification-token inputs, a tiny trainable
transformer reference model, training with gradient clipping, and top-k
sentence selection at inference.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import asdict, dataclass

import torch
from torch import Tensor, nn
from torch.nn import functional as F

from .corpus import Document, introduction_range
from .layers import EncoderBlock
from .oracle import GoldExtract, LabeledPair
from .vocab import Vocabulary, tokenize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractorInput:
    token_ids: list[int]
    attention_mask: list[int]


def build_extractor_input(
    gt_sent: str,
    candidate: str,
    vocab: Vocabulary,
    max_len: int = 512,
) -> ExtractorInput:
    """Assemble [CLS] + query tokens + [CLS] + candidate tokens, padded to
    ``max_len``. When over length the candidate is truncated first, then the
    query; both classification tokens always survive."""
    if max_len < 4:
        raise ValueError(f"max_len must be >= 4, got {max_len}")
    gt_ids = tokenize(gt_sent, vocab)
    cand_ids = tokenize(candidate, vocab)
    budget = max_len - 2
    if len(gt_ids) + len(cand_ids) > budget:
        cand_ids = cand_ids[: max(budget - len(gt_ids), 0)]
        gt_ids = gt_ids[:budget]
    ids = [vocab.cls_id] + gt_ids + [vocab.cls_id] + cand_ids
    mask = [1] * len(ids) + [0] * (max_len - len(ids))
    ids = ids + [vocab.pad_id] * (max_len - len(ids))
    return ExtractorInput(ids, mask)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    batch_size: int = 24
    max_len: int = 512
    grad_clip_norm: float = 1.0
    max_steps: int = 100
    seed: int = 0
    optimizer: str = "adam"  # or "sgd"

    def __post_init__(self):
        # zero rate is allowed so a no-op training step stays expressible
        if self.learning_rate < 0:
            raise ValueError("TrainConfig.learning_rate must be >= 0")
        for name in ("batch_size", "max_len", "grad_clip_norm", "max_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"TrainConfig.{name} must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        return asdict(self)


class TinyTransformerScorer(nn.Module):
    """Reference sentence-pair scorer: token plus learned position embeddings,
    two self-attention blocks, first-position pooling, and a two-affine head
    squashed through a sigmoid."""

    kind = "scorer"

    def __init__(
        self,
        vocab_size: int,
        max_len: int = 512,
        d_model: int = 32,
        n_heads: int = 2,
        n_layers: int = 2,
        d_ff: int = 64,
    ):
        super().__init__()
        self.hparams = {
            "vocab_size": vocab_size,
            "max_len": max_len,
            "d_model": d_model,
            "n_heads": n_heads,
            "n_layers": n_layers,
            "d_ff": d_ff,
        }
        self.tok_emb = nn.Embedding(vocab_size, d_model)
        self.pos_emb = nn.Embedding(max_len, d_model)
        self.blocks = nn.ModuleList(EncoderBlock(d_model, n_heads, d_ff) for _ in range(n_layers))
        self.head_hidden = nn.Linear(d_model, d_model)
        self.head_out = nn.Linear(d_model, 1)

    def score_logits(self, ids: Tensor, mask: Tensor) -> Tensor:
        """Pre-sigmoid scores for a batch: ids/mask [B, L] -> [B]."""
        positions = torch.arange(ids.shape[1], device=ids.device)
        h = self.tok_emb(ids) + self.pos_emb(positions)
        for block in self.blocks:
            h = block(h, mask)
        pooled = h[:, 0]
        return self.head_out(self.head_hidden(pooled)).squeeze(-1)

    def forward(self, ids: Tensor, mask: Tensor) -> Tensor:
        """Probabilities in (0, 1) for a batch."""
        return torch.sigmoid(self.score_logits(ids, mask))

    @torch.no_grad()
    def score(self, item: ExtractorInput) -> float:
        self.eval()
        ids = torch.tensor([item.token_ids], dtype=torch.long)
        mask = torch.tensor([item.attention_mask], dtype=torch.long)
        return float(self(ids, mask)[0])


def reference_scorer(vocab_size: int, max_len: int = 512, **overrides) -> TinyTransformerScorer:
    return TinyTransformerScorer(vocab_size, max_len=max_len, **overrides)


def make_optimizer(model: nn.Module, cfg: TrainConfig) -> torch.optim.Optimizer:
    if cfg.optimizer == "sgd":
        return torch.optim.SGD(model.parameters(), lr=cfg.learning_rate)
    return torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)


def pair_tensors(
    pairs: list[LabeledPair],
    corpus: list[Document],
    vocab: Vocabulary,
    max_len: int,
) -> tuple[Tensor, Tensor, Tensor]:
    """Tokenized training tensors (ids, mask, labels) for a pair dataset."""
    docs = {d.id: d for d in corpus}
    ids_rows, mask_rows, labels = [], [], []
    for pair in pairs:
        doc = docs[pair.doc_id]
        item = build_extractor_input(
            doc.abstract_sents[pair.abstract_idx],
            doc.body_sents[pair.body_idx],
            vocab,
            max_len,
        )
        ids_rows.append(item.token_ids)
        mask_rows.append(item.attention_mask)
        labels.append(float(pair.label))
    return (
        torch.tensor(ids_rows, dtype=torch.long),
        torch.tensor(mask_rows, dtype=torch.long),
        torch.tensor(labels, dtype=torch.float32),
    )


def train_scorer(
    pairs: list[LabeledPair],
    corpus: list[Document],
    model: TinyTransformerScorer,
    vocab: Vocabulary,
    cfg: TrainConfig,
) -> tuple[TinyTransformerScorer, list[float]]:
    """Minimize binary cross-entropy over labeled pairs with per-step global
    gradient-norm clipping. Returns the trained model and per-step losses."""
    if not pairs:
        raise ValueError("train_scorer requires a non-empty pair list")
    ids, mask, labels = pair_tensors(pairs, corpus, vocab, cfg.max_len)
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    optimizer = make_optimizer(model, cfg)
    n = len(pairs)
    order: list[int] = []
    losses: list[float] = []
    model.train()
    for step in range(cfg.max_steps):
        if len(order) < cfg.batch_size:
            epoch = list(range(n))
            rng.shuffle(epoch)
            order.extend(epoch)
        batch = order[: cfg.batch_size]
        del order[: cfg.batch_size]
        idx = torch.tensor(batch, dtype=torch.long)
        logits = model.score_logits(ids[idx], mask[idx])
        loss = F.binary_cross_entropy_with_logits(logits, labels[idx])
        optimizer.zero_grad()
        loss.backward()
        nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip_norm)
        optimizer.step()
        value = loss.item()
        if not math.isfinite(value):
            raise RuntimeError(f"non-finite training loss {value} at step {step}")
        losses.append(value)
    return model, losses


@torch.no_grad()
def score_candidates(
    doc: Document,
    anchor: str,
    model: TinyTransformerScorer,
    vocab: Vocabulary,
    max_len: int = 512,
) -> list[float]:
    """Model probability for every body sentence paired with the anchor."""
    model.eval()
    items = [build_extractor_input(anchor, s, vocab, max_len) for s in doc.body_sents]
    ids = torch.tensor([it.token_ids for it in items], dtype=torch.long)
    mask = torch.tensor([it.attention_mask for it in items], dtype=torch.long)
    return [float(p) for p in model(ids, mask)]


def default_anchor(doc: Document) -> str:
    """Inference-time query text: the first sentence of the introduction."""
    start, _ = introduction_range(doc)
    return doc.body_sents[start]


def extract_summary(
    doc: Document,
    anchor: str,
    model: TinyTransformerScorer,
    k: int,
    vocab: Vocabulary,
    max_len: int = 512,
) -> GoldExtract:
    """Top-k body sentences by model score (ties favor the lower index),
    emitted in document order."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    probs = score_candidates(doc, anchor, model, vocab, max_len)
    order = sorted(range(len(probs)), key=lambda j: (-probs[j], j))
    return GoldExtract(doc.id, tuple(sorted(order[:k])))


def extract_summary_leaky(
    doc: Document,
    model: TinyTransformerScorer,
    k: int,
    vocab: Vocabulary,
    max_len: int = 512,
) -> GoldExtract:
    """Abstract-anchored selection: every reference abstract sentence queries
    all candidates and its argmax is collected; the union is ranked by score
    and truncated to k. Uses the reference abstract at inference time, so it
    leaks the target; reports must label runs that use it."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    best: dict[int, float] = {}
    for anchor in doc.abstract_sents:
        probs = score_candidates(doc, anchor, model, vocab, max_len)
        j = min(range(len(probs)), key=lambda c: (-probs[c], c))
        best[j] = max(best.get(j, 0.0), probs[j])
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return GoldExtract(doc.id, tuple(sorted(j for j, _ in ranked[:k])))
