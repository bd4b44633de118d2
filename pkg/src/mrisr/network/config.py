"""Architecture hyperparameters for the super-resolution network."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigError


@dataclass
class ModelConfig:
    in_channels: int = 1
    feat_channels: int = 144
    num_rhag: int = 6
    habs_per_rhag: int = 6
    window_size: int = 16
    num_heads: int = 6
    mlp_ratio: float = 2.0
    cbam_weight: float = 0.01
    cbam_reduction: int = 16
    cbam_spatial_kernel: int = 7
    ocab_overlap: float = 0.5
    upscale: int = 2

    def validate(self) -> "ModelConfig":
        if self.in_channels < 1:
            raise ConfigError("in_channels must be >= 1")
        if self.feat_channels % self.num_heads != 0:
            raise ConfigError(
                f"feat_channels ({self.feat_channels}) must be divisible by num_heads ({self.num_heads})"
            )
        if self.upscale < 1:
            raise ConfigError(f"upscale must be >= 1, got {self.upscale}")
        if self.feat_channels % (self.upscale ** 2) != 0:
            raise ConfigError(
                f"feat_channels ({self.feat_channels}) must be divisible by upscale^2 "
                f"({self.upscale ** 2}) at the pixel-shuffle boundary"
            )
        if self.window_size < 2:
            raise ConfigError("window_size must be >= 2")
        if self.cbam_weight < 0:
            raise ConfigError("cbam_weight must be >= 0")
        if not 0.0 <= self.ocab_overlap < 1.0:
            raise ConfigError(f"ocab_overlap must lie in [0, 1), got {self.ocab_overlap}")
        if self.feat_channels < self.cbam_reduction:
            raise ConfigError(
                f"feat_channels ({self.feat_channels}) must be >= cbam_reduction ({self.cbam_reduction})"
            )
        if self.cbam_spatial_kernel % 2 != 1:
            raise ConfigError("cbam_spatial_kernel must be odd")
        if self.num_rhag < 1 or self.habs_per_rhag < 1:
            raise ConfigError("need at least one group and one attention block per group")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d).validate()


def toy_config(**overrides) -> ModelConfig:
    """Small configuration used for gradient checks and fast tests."""
    base = dict(
        in_channels=1,
        feat_channels=8,
        num_rhag=1,
        habs_per_rhag=1,
        window_size=4,
        num_heads=2,
        mlp_ratio=2.0,
        cbam_weight=0.01,
        cbam_reduction=4,
        cbam_spatial_kernel=7,
        ocab_overlap=0.5,
        upscale=2,
    )
    base.update(overrides)
    return ModelConfig(**base).validate()
