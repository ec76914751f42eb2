"""Transformer context network, BENDR projection head and MAEEG decoder.

Token tensors inside the transformer are ``(B, N, D)``; the public heads
return channel-major outputs (``(B, 64, N)`` for the projection head and
``(B, 6, 96 N)`` for the reconstruction).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from maeeg.core import (
    Module,
    Parameter,
    Rng,
    Tensor,
    conv1d,
    dropout,
    gelu,
    layer_norm,
    linear,
    matmul,
    softmax,
)
from maeeg.errors import ConfigError, ContractError, DimensionError

INIT_STD = 0.02


@dataclass(frozen=True)
class TransformerConfig:
    input_dim: int = 64
    layers: int = 8
    model_dim: int = 192
    heads: int = 8
    ffn_dim: int = 768
    dropout: float = 0.1
    pos_kernel: int = 25
    pos_groups: int = 16
    tap_layer: int = 2

    def __post_init__(self):
        if self.layers < 1:
            raise ConfigError("transformer needs at least one layer")
        if self.model_dim % self.heads:
            raise ConfigError(f"model_dim {self.model_dim} not divisible by {self.heads} heads")
        if self.model_dim % self.pos_groups:
            raise ConfigError(f"model_dim {self.model_dim} not divisible by pos_groups {self.pos_groups}")
        if self.pos_kernel % 2 == 0:
            raise ConfigError("pos_kernel must be odd so the positional conv keeps length")
        if not 1 <= self.tap_layer <= self.layers:
            raise ConfigError(f"tap_layer must lie in [1, {self.layers}], got {self.tap_layer}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        return asdict(self)


def _normal(rng: Rng, shape, std, dtype):
    return Parameter(rng.normal(0.0, std, size=shape), dtype=dtype)


def _zeros(n, dtype):
    return Parameter(np.zeros(n), dtype=dtype)


def _ones(n, dtype):
    return Parameter(np.ones(n), dtype=dtype)


class EncoderLayer(Module):
    """Pre-norm block: ``x + Attn(LN(x))`` then ``h + FFN(LN(h))``."""

    def __init__(self, cfg: TransformerConfig, rng: Rng, dtype):
        d, f = cfg.model_dim, cfg.ffn_dim
        self.cfg = cfg
        self.ln1_gain, self.ln1_bias = _ones(d, dtype), _zeros(d, dtype)
        self.qkv_weight, self.qkv_bias = _normal(rng, (3 * d, d), INIT_STD, dtype), _zeros(3 * d, dtype)
        self.out_weight, self.out_bias = _normal(rng, (d, d), INIT_STD, dtype), _zeros(d, dtype)
        self.ln2_gain, self.ln2_bias = _ones(d, dtype), _zeros(d, dtype)
        self.ffn1_weight, self.ffn1_bias = _normal(rng, (f, d), INIT_STD, dtype), _zeros(f, dtype)
        self.ffn2_weight, self.ffn2_bias = _normal(rng, (d, f), INIT_STD, dtype), _zeros(d, dtype)

    def attention(self, x: Tensor):
        b, n, d = x.shape
        h = self.cfg.heads
        dh = d // h
        qkv = linear(x, self.qkv_weight, self.qkv_bias)  # (B, N, 3D)
        qkv = qkv.reshape(b, n, 3, h, dh).transpose(2, 0, 3, 1, 4)  # (3, B, H, N, dh)
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = matmul(q, k.swapaxes(-1, -2)) * (1.0 / math.sqrt(dh))
        weights = softmax(scores, axis=-1)  # (B, H, N, N)
        ctx = matmul(weights, v).transpose(0, 2, 1, 3).reshape(b, n, d)
        return linear(ctx, self.out_weight, self.out_bias), weights

    def __call__(self, x: Tensor):
        p = self.cfg.dropout
        attn_out, weights = self.attention(layer_norm(x, self.ln1_gain, self.ln1_bias))
        h = x + dropout(attn_out, p, self.training, self.rng)
        ff = linear(layer_norm(h, self.ln2_gain, self.ln2_bias), self.ffn1_weight, self.ffn1_bias)
        ff = linear(dropout(gelu(ff), p, self.training, self.rng), self.ffn2_weight, self.ffn2_bias)
        return h + dropout(ff, p, self.training, self.rng), weights


@dataclass
class AttentionMap:
    layer: int
    weights: np.ndarray  # (heads, N, N)

    @property
    def mean(self) -> np.ndarray:
        """Head-averaged ``(N, N)`` map."""
        return self.weights.mean(axis=0)


@dataclass
class ContextSequence:
    layers: list  # per-layer (B, N, D) tensors; 1-based layer i is layers[i-1]
    tap_layer: int
    attention: list | None = None  # per-layer (B, H, N, N) arrays
    batched: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def tapped(self) -> Tensor:
        return self.layers[self.tap_layer - 1]

    @property
    def last(self) -> Tensor:
        return self.layers[-1]


class ContextTransformer(Module):
    def __init__(self, cfg: TransformerConfig, rng: Rng, dtype=np.float32):
        self.cfg = cfg
        d = cfg.model_dim
        # kernel-1 conv 64 -> D, applied position-wise
        self.in_weight = _normal(rng, (d, cfg.input_dim), 1.0 / math.sqrt(cfg.input_dim), dtype)
        self.in_bias = _zeros(d, dtype)
        fan_in = (d // cfg.pos_groups) * cfg.pos_kernel
        self.pos_weight = _normal(rng, (d, d // cfg.pos_groups, cfg.pos_kernel), 1.0 / math.sqrt(fan_in), dtype)
        self.pos_bias = _zeros(d, dtype)
        self.blocks = [EncoderLayer(cfg, rng, dtype) for _ in range(cfg.layers)]

    def embed(self, q: Tensor) -> Tensor:
        """Input projection plus convolutional relative position term; ``(B, N, D)``."""
        x = linear(q.swapaxes(1, 2), self.in_weight, self.in_bias)  # (B, N, D)
        pos = conv1d(x.swapaxes(1, 2), self.pos_weight, self.pos_bias,
                     padding=self.cfg.pos_kernel // 2, groups=self.cfg.pos_groups)
        return x + gelu(pos).swapaxes(1, 2)

    def __call__(self, q: Tensor, keep_attention: bool = False, upto: int | None = None) -> ContextSequence:
        batched = q.ndim == 3
        if not batched:
            q = q.reshape(1, *q.shape)
        if q.shape[1] != self.cfg.input_dim:
            raise DimensionError(f"transformer expects {self.cfg.input_dim} input rows, got {q.shape}")
        x = self.embed(q)
        outs, attn = [], []
        n_layers = self.cfg.layers if upto is None else upto
        for block in self.blocks[:n_layers]:
            x, w = block(x)
            outs.append(x)
            if keep_attention:
                attn.append(w.data.copy())
        return ContextSequence(outs, self.cfg.tap_layer, attn if keep_attention else None, batched)


def contextualize(transformer: ContextTransformer, q, keep_attention: bool = False) -> ContextSequence:
    from maeeg.masking import MaskedSequence

    if isinstance(q, MaskedSequence):
        q = q.q
    return transformer(q, keep_attention=keep_attention)


class BendrHead(Module):
    """Kernel-1 conv mapping the last transformer layer back to feature_dim."""

    def __init__(self, model_dim: int, out_dim: int, rng: Rng, dtype=np.float32):
        self.weight = _normal(rng, (out_dim, model_dim), 1.0 / math.sqrt(model_dim), dtype)
        self.bias = _zeros(out_dim, dtype)

    def __call__(self, ctx: ContextSequence) -> Tensor:
        return linear(ctx.last, self.weight, self.bias).swapaxes(1, 2)  # (B, 64, N)


def bendr_project(head: BendrHead, ctx: ContextSequence) -> Tensor:
    out = head(ctx)
    return out if ctx.batched else out.reshape(out.shape[1:])


@dataclass(frozen=True)
class DecoderConfig:
    hidden: int = 512
    out_channels: int = 6
    samples_per_token: int = 96

    def to_dict(self) -> dict:
        return asdict(self)


class ReconstructionHead(Module):
    """Two position-wise layers: D -> hidden (gelu) -> channels * samples_per_token."""

    def __init__(self, model_dim: int, cfg: DecoderConfig, rng: Rng, dtype=np.float32):
        self.cfg = cfg
        out = cfg.out_channels * cfg.samples_per_token
        self.fc1_weight = _normal(rng, (cfg.hidden, model_dim), 1.0 / math.sqrt(model_dim), dtype)
        self.fc1_bias = _zeros(cfg.hidden, dtype)
        self.fc2_weight = _normal(rng, (out, cfg.hidden), 1.0 / math.sqrt(cfg.hidden), dtype)
        self.fc2_bias = _zeros(out, dtype)

    def __call__(self, ctx: ContextSequence) -> Tensor:
        x = ctx.last
        b, n, _ = x.shape
        c, s = self.cfg.out_channels, self.cfg.samples_per_token
        h = gelu(linear(x, self.fc1_weight, self.fc1_bias))
        y = linear(h, self.fc2_weight, self.fc2_bias)  # (B, N, C*S)
        return y.reshape(b, n, c, s).transpose(0, 2, 1, 3).reshape(b, c, n * s)


def maeeg_reconstruct(head: ReconstructionHead, ctx: ContextSequence) -> Tensor:
    out = head(ctx)
    return out if ctx.batched else out.reshape(out.shape[1:])


def attention_maps(ctx: ContextSequence, layer: int | None = None, index: int = 0) -> AttentionMap:
    """Per-head and head-averaged attention of sequence ``index`` at ``layer`` (1-based)."""
    if ctx.attention is None:
        raise ContractError("attention maps were not retained; pass keep_attention=True")
    layer = ctx.tap_layer if layer is None else layer
    if not 1 <= layer <= len(ctx.attention):
        raise ContractError(f"layer must lie in [1, {len(ctx.attention)}], got {layer}")
    return AttentionMap(layer, ctx.attention[layer - 1][index].astype(np.float64))
