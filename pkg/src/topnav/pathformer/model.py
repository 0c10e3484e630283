"""Path/goal prediction network.

Data flow for one batch::

    maps (B, H, W)  --fuse-->  (B, H, W, C_in)  --patchify-->  (B, N_v, P*P*C_in)
        --linear + e_n + h_pos + h_rot-->  H_vp (B, N_v, D)
        --cross-attention over text x L_cross-->  H_fused
        --encoder with depth mixing x L_encoder-->  (B, N_v, D)
        --transposed-conv decoder-->  (B, 2, H, W) probabilities
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..gridmap import NUM_CLASSES, ChannelMask
from ..mapbuild.vocab import PAD, UNK
from .config import AttnMode, ModelConfig


class PoseError(ValueError):
    pass


class MaskingError(ValueError):
    pass


class ShapeError(ValueError):
    pass


QUATERNION_ATOL = 1e-6


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention with separate query and key/value sources."""

    def __init__(self, dim: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, dim)
        self.drop = nn.Dropout(dropout)
        self.last_weights: torch.Tensor | None = None

    def forward(self, x, context, key_padding=None, keep_weights: bool = False):
        B, N, D = x.shape
        M = context.shape[1]
        # (B, heads, tokens, head_dim)
        q = self.q(x).view(B, N, self.heads, self.head_dim).transpose(1, 2)
        k = self.k(context).view(B, M, self.heads, self.head_dim).transpose(1, 2)
        v = self.v(context).view(B, M, self.heads, self.head_dim).transpose(1, 2)
        logits = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)  # (B, heads, N, M)
        if key_padding is not None:
            if bool(key_padding.all(dim=1).any()):
                raise MaskingError("a sequence has no unmasked key positions")
            logits = logits.masked_fill(key_padding[:, None, None, :], float("-inf"))
        weights = logits.softmax(dim=-1)
        if keep_weights:
            self.last_weights = weights.detach()
        out = self.drop(weights) @ v
        return self.out(out.transpose(1, 2).reshape(B, N, D))


class CrossAttentionLayer(nn.Module):
    """Visual tokens query text: ``x + Attn(LN(x), LN(text))``."""

    def __init__(self, dim: int, heads: int, dropout: float):
        super().__init__()
        self.norm_q = nn.LayerNorm(dim)
        self.norm_kv = nn.LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, dropout)

    def forward(self, x, text, text_padding=None, keep_weights: bool = False):
        return x + self.attn(self.norm_q(x), self.norm_kv(text), text_padding, keep_weights)


class EncoderLayer(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: int, dropout: float):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, dropout)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, mlp_ratio * dim), nn.GELU(), nn.Linear(mlp_ratio * dim, dim))

    def forward(self, x):
        h = self.norm1(x)
        x = x + self.attn(h, h)
        return x + self.mlp(self.norm2(x))


def depth_mix_weights(query: torch.Tensor, history: list[torch.Tensor]) -> torch.Tensor:
    """Softmax over depth of ``<q, h_j> / sqrt(D)``; returns ``(B, N, l)``.

    ``query`` broadcasts against ``(B, N, D)``: a ``(D,)`` global query or ``(N, D)`` per token.
    """
    stacked = torch.stack(history, dim=2)  # (B, N, l, D)
    logits = (stacked * query[..., None, :]).sum(-1) / math.sqrt(stacked.shape[-1])
    return logits.softmax(dim=-1)


def depth_mix(query: torch.Tensor, history: list[torch.Tensor]) -> torch.Tensor:
    """Convex combination of the stored layer outputs, per token."""
    if not history:
        raise ValueError("depth history is empty")
    weights = depth_mix_weights(query, history)
    return (torch.stack(history, dim=2) * weights[..., None]).sum(dim=2)


@dataclass
class ForwardTrace:
    """Intermediate tensors kept for analysis when ``trace=True``."""

    visual: torch.Tensor  # (B, N_v, D) patch projection + e_n
    text: torch.Tensor  # (B, N_t, D)
    text_padding: torch.Tensor  # (B, N_t) bool
    h_pos: torch.Tensor  # (B, D)
    h_rot: torch.Tensor  # (B, D)
    mixed_inputs: list[torch.Tensor]  # per encoder layer, its depth-mixed input
    histories: list[list[torch.Tensor]]  # the history each layer mixed over
    encoded: torch.Tensor


class PathFormer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = c = config
        gen = torch.Generator().manual_seed(c.seed)
        self.text_embed = nn.Embedding(c.vocab_size, c.text_dim)
        self.text_pos = nn.Parameter(torch.zeros(c.max_text, c.text_dim))
        self.text_proj = nn.Linear(c.text_dim, c.dim)
        self.sem_embed = nn.Embedding(NUM_CLASSES, c.sem_dim)
        self.patch_proj = nn.Linear(c.patch * c.patch * c.in_channels, c.dim)
        self.pos_embed = nn.Parameter(torch.zeros(c.num_patches, c.dim))
        self.pose_pos = nn.Linear(2, c.dim)
        self.pose_rot = nn.Linear(4, c.dim)
        self.cross = nn.ModuleList(CrossAttentionLayer(c.dim, c.heads, c.dropout) for _ in range(c.cross_layers))
        self.encoder = nn.ModuleList(
            EncoderLayer(c.dim, c.heads, c.mlp_ratio, c.dropout) for _ in range(c.encoder_layers)
        )
        # depth-mix parameters exist in every mode so one state runs under any mode
        self.depth_w = nn.Parameter(torch.zeros(c.encoder_layers, c.dim))
        self.depth_f = nn.Linear(c.dim, c.dim)
        self.final_norm = nn.LayerNorm(c.dim)
        stages = []
        ch = c.dim
        for out in c.decoder_channels:
            stages.append(nn.Sequential(nn.ConvTranspose2d(ch, out, 2, stride=2), nn.BatchNorm2d(out), nn.ReLU()))
            ch = out
        self.decoder = nn.ModuleList(stages)
        self.head = nn.Conv2d(ch, 2, 3, padding=1)
        self._init(gen)
        if c.freeze_text:
            for p in (self.text_embed.weight, self.text_pos, *self.text_proj.parameters()):
                p.requires_grad_(False)

    def _init(self, gen: torch.Generator) -> None:
        for name, p in self.named_parameters():
            if name.startswith("depth_"):
                nn.init.zeros_(p)
            elif name.endswith("bias"):
                nn.init.zeros_(p)
            elif p.dim() == 1:  # norm gains
                nn.init.ones_(p)
            elif "embed" in name or name == "text_pos":
                with torch.no_grad():
                    p.copy_(torch.randn(p.shape, generator=gen) * 0.02)
            else:
                fan_in = p[0].numel()
                with torch.no_grad():
                    p.copy_(torch.randn(p.shape, generator=gen) / math.sqrt(fan_in))

    # ---- components -------------------------------------------------------------

    def encode_instruction(self, tokens: torch.Tensor):
        """``tokens`` (B, N_t) int; ids outside the vocabulary read as UNK. Returns features and padding mask."""
        c = self.config
        if tokens.shape[1] > c.max_text:
            raise ShapeError(f"instruction of {tokens.shape[1]} tokens exceeds {c.max_text}")
        tokens = torch.where((tokens < 0) | (tokens >= c.vocab_size), torch.full_like(tokens, UNK), tokens)
        x = self.text_embed(tokens) + self.text_pos[: tokens.shape[1]]
        return self.text_proj(x), tokens == PAD

    def fuse(self, rgb, occ, sem, mask: ChannelMask | None = None) -> torch.Tensor:
        """``[rgb / 255 | occ | embed(sem)]`` per pixel; masked modalities are zero-filled."""
        mask = mask or ChannelMask()
        dtype = self.pos_embed.dtype
        parts = [
            rgb.to(dtype) / 255.0 if mask.rgb else torch.zeros(rgb.shape, dtype=dtype),
            occ.to(dtype)[..., None] if mask.occ else torch.zeros(occ.shape + (1,), dtype=dtype),
            self.sem_embed(sem.long()) if mask.sem else torch.zeros(sem.shape + (self.config.sem_dim,), dtype=dtype),
        ]
        return torch.cat(parts, dim=-1)

    def patchify(self, fused: torch.Tensor) -> torch.Tensor:
        B, H, W, C = fused.shape
        P = self.config.patch
        x = fused.reshape(B, H // P, P, W // P, P, C).permute(0, 1, 3, 2, 4, 5)
        return x.reshape(B, (H // P) * (W // P), P * P * C)

    def patch_embed_inject(self, fused, pos, rot):
        c = self.config
        if fused.shape[1:] != (c.map_size, c.map_size, c.in_channels):
            raise ShapeError(f"fused map {tuple(fused.shape[1:])} does not match config")
        norms = rot.norm(dim=-1)
        if bool(((norms - 1.0).abs() > QUATERNION_ATOL).any()):
            raise PoseError("rotation quaternion is not unit length")
        visual = self.patch_proj(self.patchify(fused)) + self.pos_embed
        h_pos = self.pose_pos(pos)
        h_rot = self.pose_rot(rot)
        return visual + h_pos[:, None, :] + h_rot[:, None, :], visual, h_pos, h_rot

    def cross_fuse(self, x, text, text_padding=None):
        for layer in self.cross:
            x = layer(x, text, text_padding)
        return x

    def depth_query(self, layer: int, mode: AttnMode) -> torch.Tensor:
        if mode == AttnMode.AR_FULL:
            return self.depth_w[layer]
        return self.depth_w[layer] + self.depth_f(self.pos_embed)

    def encode(self, x, mode: AttnMode | None = None, trace: dict | None = None):
        mode = AttnMode(mode or self.config.mode)
        history = [x]
        for i, layer in enumerate(self.encoder):
            if mode == AttnMode.STD:
                mixed = history[-1]
            else:
                mixed = depth_mix(self.depth_query(i, mode), history)
            if trace is not None:
                trace.setdefault("mixed", []).append(mixed)
                trace.setdefault("histories", []).append(list(history))
            history.append(layer(mixed))
        return self.final_norm(history[-1])

    def decode(self, feats: torch.Tensor) -> torch.Tensor:
        B, N, D = feats.shape
        g = int(round(math.sqrt(N)))
        if g * g != N:
            raise ShapeError(f"{N} tokens do not form a square grid")
        x = feats.transpose(1, 2).reshape(B, D, g, g)
        for stage in self.decoder:
            x = stage(x)
        return torch.sigmoid(self.head(x))

    # ---- full pass ---------------------------------------------------------------

    def forward(self, rgb, occ, sem, tokens, pos, rot, mask: ChannelMask | None = None,
                mode: AttnMode | None = None, trace: bool = False):
        """Return ``(B, 2, H, W)`` path/goal probabilities (and a :class:`ForwardTrace` if asked)."""
        fused = self.fuse(rgb, occ, sem, mask)
        text, padding = self.encode_instruction(tokens)
        x, visual, h_pos, h_rot = self.patch_embed_inject(fused, pos.to(fused.dtype), rot.to(fused.dtype))
        x = self.cross_fuse(x, text, padding)
        record: dict | None = {} if trace else None
        encoded = self.encode(x, mode, record)
        probs = self.decode(encoded)
        if not trace:
            return probs
        return probs, ForwardTrace(visual, text, padding, h_pos, h_rot,
                                   record.get("mixed", []), record.get("histories", []), encoded)


def segment_of(name: str) -> str:
    """Parameter segment: the top-level module, split per layer for stacked modules."""
    parts = name.split(".")
    if parts[0] in ("cross", "encoder", "decoder"):
        return ".".join(parts[:2])
    return parts[0]


def segments(model: nn.Module) -> dict[str, list[tuple[str, nn.Parameter]]]:
    out: dict[str, list] = {}
    for name, p in model.named_parameters():
        out.setdefault(segment_of(name), []).append((name, p))
    return out
