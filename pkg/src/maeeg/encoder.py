"""Strided 1-D convolutional feature encoder.

Six blocks of ``conv1d -> dropout -> group_norm -> gelu`` turn a 6-channel
100 Hz signal into 64-dimensional tokens.  With kernels = strides =
(3, 2, 2, 2, 2, 2) the total downsampling is 96, i.e. one token per 0.96 s
(~1.04 Hz).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from maeeg.core import Module, Parameter, Rng, Tensor, conv1d, dropout, gelu, group_norm
from maeeg.core.ops import conv_output_length
from maeeg.errors import ConfigError, DimensionError, InputTooShortError

SAMPLE_RATE = 100


@dataclass(frozen=True)
class EncoderConfig:
    in_channels: int = 6
    feature_dim: int = 64
    kernels: tuple = (3, 2, 2, 2, 2, 2)
    strides: tuple = (3, 2, 2, 2, 2, 2)
    norm_groups: int = 8
    dropout: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(int(k) for k in self.kernels))
        object.__setattr__(self, "strides", tuple(int(s) for s in self.strides))
        if len(self.kernels) != len(self.strides) or not self.kernels:
            raise ConfigError("encoder kernels and strides must be equal-length, non-empty")
        if any(k < 1 for k in self.kernels) or any(s < 1 for s in self.strides):
            raise ConfigError("encoder kernels and strides must be positive")
        if self.in_channels < 1 or self.feature_dim < 1:
            raise ConfigError("encoder channel counts must be positive")
        if self.feature_dim % self.norm_groups:
            raise ConfigError(f"feature_dim {self.feature_dim} not divisible by {self.norm_groups} groups")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")

    @property
    def downsample(self) -> int:
        return int(np.prod(self.strides))

    @property
    def min_length(self) -> int:
        """Shortest input that yields one token."""
        need = 1
        for k, s in zip(reversed(self.kernels), reversed(self.strides)):
            need = (need - 1) * s + k
        return need

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernels"] = list(self.kernels)
        d["strides"] = list(self.strides)
        return d


def token_length(n_samples: int, config: EncoderConfig | None = None) -> int:
    """Number of tokens the encoder emits for ``n_samples`` input samples."""
    config = config or EncoderConfig()
    if n_samples < config.min_length:
        raise InputTooShortError(n_samples, config.min_length)
    n = n_samples
    for k, s in zip(config.kernels, config.strides):
        n = conv_output_length(n, k, s)
    return n


@dataclass
class FeatureSequence:
    t: Tensor  # (64, N) or (B, 64, N)
    token_rate: float

    @property
    def n_tokens(self) -> int:
        return self.t.shape[-1]


class ConvEncoder(Module):
    def __init__(self, config: EncoderConfig, rng: Rng, dtype=np.float32):
        self.config = config
        c_in = config.in_channels
        for i, k in enumerate(config.kernels):
            fan_in = c_in * k
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(config.feature_dim, c_in, k))
            setattr(self, f"conv{i}_weight", Parameter(w, dtype=dtype))
            setattr(self, f"conv{i}_bias", Parameter(np.zeros(config.feature_dim), dtype=dtype))
            setattr(self, f"norm{i}_gain", Parameter(np.ones(config.feature_dim), dtype=dtype))
            setattr(self, f"norm{i}_bias", Parameter(np.zeros(config.feature_dim), dtype=dtype))
            c_in = config.feature_dim

    def __call__(self, x: Tensor) -> Tensor:
        cfg = self.config
        if x.shape[-2] != cfg.in_channels:
            raise DimensionError(f"encoder expects {cfg.in_channels} channels, got shape {x.shape}")
        if x.shape[-1] < cfg.min_length:
            raise InputTooShortError(x.shape[-1], cfg.min_length)
        h = x
        for i, s in enumerate(cfg.strides):
            h = conv1d(h, getattr(self, f"conv{i}_weight"), getattr(self, f"conv{i}_bias"), stride=s)
            h = dropout(h, cfg.dropout, self.training, self.rng)
            h = group_norm(h, cfg.norm_groups, getattr(self, f"norm{i}_gain"), getattr(self, f"norm{i}_bias"))
            h = gelu(h)
        return h


def init_encoder(config: EncoderConfig, rng: Rng, dtype=np.float32) -> ConvEncoder:
    """Kaiming fan-in normal conv weights, zero biases, unit GroupNorm affine."""
    return ConvEncoder(config, rng, dtype=dtype)


def encode(encoder: ConvEncoder, x) -> FeatureSequence:
    x = x if isinstance(x, Tensor) else Tensor(x)
    t = encoder(x)
    return FeatureSequence(t, SAMPLE_RATE / encoder.config.downsample)
