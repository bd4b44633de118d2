"""The full super-resolution network: shallow extraction, residual hybrid
attention groups, and Inception-aided pixel-shuffle reconstruction."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError, InputError
from ..image import Image2D
from .blocks import RHAG, InceptionConv
from .config import ModelConfig


class SuperResolutionNet(nn.Module):
    """Maps an H x W single-channel image to an (s*H) x (s*W) one.

    Pipeline: Inception shallow features -> chain of RHAGs -> Inception
    convolution -> global residual with the shallow features -> Inception
    convolution, pixel shuffle by the upscale factor, Inception convolution.
    Inputs are reflect-padded to a window multiple and the output cropped back.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        c = cfg.feat_channels

        self.shallow = InceptionConv(cfg.in_channels, c)
        self.groups = nn.ModuleList(
            RHAG(c, cfg.habs_per_rhag, cfg.window_size, cfg.num_heads, cfg.mlp_ratio,
                 cfg.cbam_weight, cfg.cbam_reduction, cfg.cbam_spatial_kernel,
                 cfg.ocab_overlap)
            for _ in range(cfg.num_rhag)
        )
        self.deep_conv = InceptionConv(c, c)
        self.recon_pre = InceptionConv(c, c)
        self.recon_post = InceptionConv(c // cfg.upscale ** 2, cfg.in_channels)

        self.apply(self._init_module)
        # Residual tails start at zero so every group (and the deep branch)
        # begins as an identity map.
        for g in self.groups:
            g.conv.reset_zero()
        self.deep_conv.reset_zero()

    @staticmethod
    def _init_module(m: nn.Module):
        if isinstance(m, (nn.Linear, nn.Conv2d)):
            nn.init.trunc_normal_(m.weight, std=0.02)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.LayerNorm):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)

    def shallow_extract(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C_in, H, W) -> (B, C, H, W) shallow features."""
        if x.shape[1] != self.cfg.in_channels:
            raise ConfigError(f"expected {self.cfg.in_channels} input channels, got {x.shape[1]}")
        return self.shallow(x)

    def deep_extract(self, f0: torch.Tensor) -> torch.Tensor:
        """Chain of RHAGs followed by the trailing Inception convolution."""
        y = f0
        for g in self.groups:
            y = g(y)
        return self.deep_conv(y)

    def reconstruct(self, f0: torch.Tensor, f_df: torch.Tensor) -> torch.Tensor:
        """Global residual fusion, then conv -> pixel shuffle -> conv."""
        s = self.cfg.upscale
        y = self.recon_pre(f0 + f_df)
        if y.shape[1] % (s * s):
            raise ConfigError(f"{y.shape[1]} channels not divisible by upscale^2 = {s * s}")
        y = F.pixel_shuffle(y, s)
        return self.recon_post(y)

    def forward_tensor(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C_in, H, W) -> (B, C_in, s*H, s*W); pads to a window multiple internally."""
        if not torch.isfinite(x).all():
            raise InputError("input contains non-finite values")
        _, _, h, w = x.shape
        ws = self.cfg.window_size
        pad_h = (ws - h % ws) % ws
        pad_w = (ws - w % ws) % ws
        if pad_h >= h or pad_w >= w:
            raise ConfigError(
                f"window size {ws} too large for a {h}x{w} input even after reflect padding"
            )
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="reflect")
        f0 = self.shallow_extract(x)
        f_df = self.deep_extract(f0)
        out = self.reconstruct(f0, f_df)
        s = self.cfg.upscale
        return out[:, :, : h * s, : w * s]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.forward_tensor(x)

    @torch.no_grad()
    def super_resolve(self, img: Image2D) -> Image2D:
        """Run inference on one image; spacing shrinks by the upscale factor."""
        dtype = next(self.parameters()).dtype
        x = torch.from_numpy(np.ascontiguousarray(img.data)).to(dtype)[None, None]
        y = self.forward_tensor(x)[0, 0].cpu().numpy()
        return Image2D(y.astype(img.data.dtype), pixel_spacing=img.pixel_spacing / self.cfg.upscale)


def parameter_manifest(model: nn.Module) -> list[tuple[str, tuple[int, ...]]]:
    """Deterministic (name, shape) listing of every learnable tensor, each exactly once."""
    return [(name, tuple(p.shape)) for name, p in model.named_parameters()]


def build_model(cfg: ModelConfig, seed: int | None = None,
                dtype: torch.dtype = torch.float32) -> SuperResolutionNet:
    """Construct a network with seeded initialization in the requested precision."""
    if seed is not None:
        torch.manual_seed(seed)
    model = SuperResolutionNet(cfg)
    return model.to(dtype)
