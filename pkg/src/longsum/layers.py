"""Minimal transformer building blocks shared by the reference models.

Masking uses additive negative infinity before the softmax, so excluded
positions receive exactly zero attention weight and masked content cannot
leak into any output, bit for bit.
"""

from __future__ import annotations

import math

import torch
from torch import Tensor, nn


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        if d_model % n_heads != 0:
            raise ValueError(f"d_model {d_model} not divisible by n_heads {n_heads}")
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)

    def forward(
        self,
        query: Tensor,
        keys: Tensor,
        key_mask: Tensor | None = None,
        causal: bool = False,
    ) -> Tensor:
        """query [B, Lq, D], keys [B, Lk, D], key_mask [B, Lk] with 1 = real.

        ``causal=True`` restricts position t to keys at positions <= t and
        requires Lq == Lk.
        """
        bsz, lq, _ = query.shape
        lk = keys.shape[1]
        q = self.q_proj(query).view(bsz, lq, self.n_heads, self.d_head).transpose(1, 2)
        k = self.k_proj(keys).view(bsz, lk, self.n_heads, self.d_head).transpose(1, 2)
        v = self.v_proj(keys).view(bsz, lk, self.n_heads, self.d_head).transpose(1, 2)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_head)  # [B, H, Lq, Lk]
        if key_mask is not None:
            pad = key_mask[:, None, None, :] == 0
            scores = scores.masked_fill(pad, float("-inf"))
        if causal:
            future = torch.triu(
                torch.ones(lq, lk, dtype=torch.bool, device=scores.device), diagonal=1
            )
            scores = scores.masked_fill(future, float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(bsz, lq, -1)
        return self.out_proj(out)


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ff: int):
        super().__init__()
        self.inner = nn.Linear(d_model, d_ff)
        self.outer = nn.Linear(d_ff, d_model)

    def forward(self, h: Tensor) -> Tensor:
        return self.outer(torch.relu(self.inner(h)))


class EncoderBlock(nn.Module):
    """Self-attention plus feed-forward, post-norm residual wiring."""

    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, n_heads)
        self.norm1 = nn.LayerNorm(d_model)
        self.ff = FeedForward(d_model, d_ff)
        self.norm2 = nn.LayerNorm(d_model)

    def forward(self, h: Tensor, mask: Tensor | None = None) -> Tensor:
        h = self.norm1(h + self.attn(h, h, key_mask=mask))
        return self.norm2(h + self.ff(h))


class DecoderBlock(nn.Module):
    """Causal self-attention, cross-attention over encoder memory, feed-forward."""

    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        self.self_attn = MultiHeadAttention(d_model, n_heads)
        self.norm1 = nn.LayerNorm(d_model)
        self.cross_attn = MultiHeadAttention(d_model, n_heads)
        self.norm2 = nn.LayerNorm(d_model)
        self.ff = FeedForward(d_model, d_ff)
        self.norm3 = nn.LayerNorm(d_model)

    def forward(self, h: Tensor, memory: Tensor, memory_mask: Tensor | None = None) -> Tensor:
        h = self.norm1(h + self.self_attn(h, h, causal=True))
        h = self.norm2(h + self.cross_attn(h, memory, key_mask=memory_mask))
        return self.norm3(h + self.ff(h))


class CausalBlock(nn.Module):
    """Decoder-only block: causal self-attention plus feed-forward."""

    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, n_heads)
        self.norm1 = nn.LayerNorm(d_model)
        self.ff = FeedForward(d_model, d_ff)
        self.norm2 = nn.LayerNorm(d_model)

    def forward(self, h: Tensor, mask: Tensor | None = None) -> Tensor:
        h = self.norm1(h + self.attn(h, h, key_mask=mask, causal=True))
        return self.norm2(h + self.ff(h))
