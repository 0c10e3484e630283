"""Model hyperparameters and named presets."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

from ..gridmap import DEFAULT_SEM_DIM
from ..mapbuild.vocab import VOCAB_SIZE


class AttnMode(str, Enum):
    STD = "STD"  # plain residual chain
    AR_FULL = "AR_FULL"  # depth mix with one learned query per layer
    AR_FULL_SQ = "AR_FULL_SQ"  # depth mix with a per-token spatial bias on the query


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    map_size: int = 64
    patch: int = 8
    dim: int = 64
    text_dim: int = 64
    sem_dim: int = DEFAULT_SEM_DIM
    cross_layers: int = 2
    encoder_layers: int = 4
    heads: int = 4
    mlp_ratio: int = 4
    mode: AttnMode = AttnMode.AR_FULL_SQ
    dropout: float = 0.1  # attention weights only
    vocab_size: int = VOCAB_SIZE
    max_text: int = 64
    freeze_text: bool = False
    decoder_channels: tuple[int, ...] = field(default=())
    seed: int = 0

    def __post_init__(self):
        if self.map_size % self.patch:
            raise ConfigError(f"map size {self.map_size} not divisible by patch {self.patch}")
        if self.dim % self.heads:
            raise ConfigError(f"width {self.dim} not divisible by {self.heads} heads")
        stages = int(round(math.log2(self.patch)))
        if 2 ** stages != self.patch:
            raise ConfigError(f"patch size {self.patch} is not a power of two")
        object.__setattr__(self, "mode", AttnMode(self.mode))
        if not self.decoder_channels:
            object.__setattr__(self, "decoder_channels", tuple(max(self.dim >> (i + 1), 4) for i in range(stages)))
        if len(self.decoder_channels) != stages:
            raise ConfigError(f"need {stages} decoder stages for patch {self.patch}, got {len(self.decoder_channels)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")

    @property
    def in_channels(self) -> int:
        return 3 + 1 + self.sem_dim

    @property
    def grid(self) -> int:
        return self.map_size // self.patch

    @property
    def num_patches(self) -> int:
        return self.grid * self.grid

    def with_(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["decoder_channels"] = list(self.decoder_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys {sorted(unknown)}")
        d = dict(d)
        if "decoder_channels" in d:
            d["decoder_channels"] = tuple(d["decoder_channels"])
        return cls(**d)


PRESETS = {
    "toy": ModelConfig(),
    # full-size ViT-B/16 shape; recorded for reference, not trained here
    "full": ModelConfig(map_size=256, patch=16, dim=768, text_dim=768, cross_layers=12, encoder_layers=12,
                         heads=12, decoder_channels=(256, 128, 64, 32)),
}


def preset(name: str) -> ModelConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
