"""ModelBundle: conv encoder + transformer + the mode-specific head."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from maeeg.core import Module, Rng
from maeeg.encoder import ConvEncoder, EncoderConfig
from maeeg.errors import ConfigError
from maeeg.transformer import (
    BendrHead,
    ContextTransformer,
    DecoderConfig,
    ReconstructionHead,
    TransformerConfig,
)

MODES = ("maeeg", "bendr", "supervised-baseline")


@dataclass(frozen=True)
class ModelConfig:
    mode: str = "maeeg"
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    transformer: TransformerConfig = field(default_factory=TransformerConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown model mode {self.mode!r}; expected one of {MODES}")
        if self.transformer.input_dim != self.encoder.feature_dim:
            raise ConfigError("transformer input_dim must equal encoder feature_dim")
        if self.decoder.out_channels != self.encoder.in_channels:
            raise ConfigError("decoder out_channels must equal encoder in_channels")
        if self.decoder.samples_per_token != self.encoder.downsample:
            raise ConfigError("decoder samples_per_token must equal the encoder's total stride")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "encoder": self.encoder.to_dict(),
            "transformer": self.transformer.to_dict(),
            "decoder": self.decoder.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            mode=d["mode"],
            encoder=EncoderConfig(**d["encoder"]),
            transformer=TransformerConfig(**d["transformer"]),
            decoder=DecoderConfig(**d["decoder"]),
        )

    def with_mode(self, mode: str) -> "ModelConfig":
        return ModelConfig(mode, self.encoder, self.transformer, self.decoder)


def tiny_config(mode: str = "maeeg", tap_layer: int = 2) -> ModelConfig:
    """A 2-layer, width-8 model used by gradient checks and plumbing tests."""
    enc = EncoderConfig(feature_dim=8, norm_groups=2, dropout=0.0)
    tr = TransformerConfig(input_dim=8, layers=2, model_dim=8, heads=2, ffn_dim=16, dropout=0.0,
                           pos_kernel=3, pos_groups=2, tap_layer=tap_layer)
    dec = DecoderConfig(hidden=16)
    return ModelConfig(mode, enc, tr, dec)


class ModelBundle(Module):
    """Encoder, transformer and head sharing one configuration.

    ``head`` is a :class:`BendrHead` in ``bendr`` mode, a
    :class:`ReconstructionHead` in ``maeeg`` mode and absent for the
    supervised baseline.
    """

    def __init__(self, config: ModelConfig, rng: Rng, dtype=np.float32):
        self.config = config
        self.encoder = ConvEncoder(config.encoder, rng.child("encoder"), dtype)
        self.transformer = ContextTransformer(config.transformer, rng.child("transformer"), dtype)
        if config.mode == "bendr":
            self.head = BendrHead(config.transformer.model_dim, config.encoder.feature_dim,
                                  rng.child("head"), dtype)
        elif config.mode == "maeeg":
            self.head = ReconstructionHead(config.transformer.model_dim, config.decoder,
                                           rng.child("head"), dtype)
        else:
            self.head = None

    @property
    def mode(self) -> str:
        return self.config.mode


def build_model(config: ModelConfig, seed: int, dtype=np.float32) -> ModelBundle:
    return ModelBundle(config, Rng(seed).child("init"), dtype)
