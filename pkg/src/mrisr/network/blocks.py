"""Building blocks: Inception-style convolutions, CBAM, window attention, HAB, OCAB, RHAG."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError

ATTN_MASK_FILL = -100.0


def window_partition(x: torch.Tensor, window_size: int) -> torch.Tensor:
    """(B, H, W, C) -> (B*nW, ws, ws, C)."""
    b, h, w, c = x.shape
    x = x.view(b, h // window_size, window_size, w // window_size, window_size, c)
    return x.permute(0, 1, 3, 2, 4, 5).reshape(-1, window_size, window_size, c)


def window_reverse(windows: torch.Tensor, window_size: int, h: int, w: int) -> torch.Tensor:
    """(B*nW, ws, ws, C) -> (B, H, W, C)."""
    b = windows.shape[0] // (h * w // window_size // window_size)
    x = windows.view(b, h // window_size, w // window_size, window_size, window_size, -1)
    return x.permute(0, 1, 3, 2, 4, 5).reshape(b, h, w, -1)


_MASK_CACHE: dict = {}


def shift_attention_mask(h: int, w: int, window_size: int, shift: int,
                         device, dtype) -> torch.Tensor:
    """Per-window mask (nW, ws^2, ws^2) hiding pairs that cross a cyclic-shift seam."""
    key = (h, w, window_size, shift, str(device), dtype)
    if key in _MASK_CACHE:
        return _MASK_CACHE[key]
    img_mask = torch.zeros((1, h, w, 1), device=device, dtype=dtype)
    cnt = 0
    for hs in (slice(0, -window_size), slice(-window_size, -shift), slice(-shift, None)):
        for ws_ in (slice(0, -window_size), slice(-window_size, -shift), slice(-shift, None)):
            img_mask[:, hs, ws_, :] = cnt
            cnt += 1
    mask_windows = window_partition(img_mask, window_size).view(-1, window_size * window_size)
    attn_mask = mask_windows.unsqueeze(1) - mask_windows.unsqueeze(2)
    attn_mask = attn_mask.masked_fill(attn_mask != 0, ATTN_MASK_FILL).masked_fill(attn_mask == 0, 0.0)
    _MASK_CACHE[key] = attn_mask
    return attn_mask


class InceptionConv(nn.Module):
    """Parallel 1x1 / 3x3 / 5x5 convolutions, concatenated and fused by a 1x1 projection.

    All branches use same-padding, so spatial extent is preserved. The block
    is linear (no activation): zero weights give a zero map, and a suitably
    constructed parameter set gives the identity.
    """

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.branch1 = nn.Conv2d(in_channels, out_channels, 1)
        self.branch3 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.branch5 = nn.Conv2d(in_channels, out_channels, 5, padding=2)
        self.fuse = nn.Conv2d(3 * out_channels, out_channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.in_channels:
            raise ConfigError(
                f"InceptionConv expects {self.in_channels} channels, got {x.shape[1]}"
            )
        y = torch.cat([self.branch1(x), self.branch3(x), self.branch5(x)], dim=1)
        return self.fuse(y)

    def reset_zero(self):
        for p in self.parameters():
            nn.init.zeros_(p)


class ChannelGate(nn.Module):
    """Sigmoid channel weights from a shared MLP over global average/max descriptors."""

    def __init__(self, channels: int, reduction: int):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.mlp = nn.Sequential(
            nn.Conv2d(channels, hidden, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(hidden, channels, 1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        avg = x.mean(dim=(2, 3), keepdim=True)
        mx = x.amax(dim=(2, 3), keepdim=True)
        return torch.sigmoid(self.mlp(avg) + self.mlp(mx))


class SpatialGate(nn.Module):
    """Sigmoid spatial map from a k x k convolution over channel-wise mean/max maps."""

    def __init__(self, kernel_size: int):
        super().__init__()
        self.conv = nn.Conv2d(2, 1, kernel_size, padding=kernel_size // 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        stacked = torch.cat([x.mean(dim=1, keepdim=True), x.amax(dim=1, keepdim=True)], dim=1)
        return torch.sigmoid(self.conv(stacked))


class CBAM(nn.Module):
    """Channel-then-spatial attention: x * channel_gate(x) * spatial_gate(...)."""

    def __init__(self, channels: int, reduction: int = 16, spatial_kernel: int = 7):
        super().__init__()
        if channels < reduction:
            raise ConfigError(f"CBAM needs channels >= reduction, got {channels} < {reduction}")
        self.channel_gate = ChannelGate(channels, reduction)
        self.spatial_gate = SpatialGate(spatial_kernel)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x * self.channel_gate(x)
        return x * self.spatial_gate(x)


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden_dim: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden_dim)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden_dim, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class WindowAttention(nn.Module):
    """Multi-head self-attention inside a window, with relative position bias."""

    def __init__(self, dim: int, window_size: int, num_heads: int):
        super().__init__()
        if dim % num_heads:
            raise ConfigError(f"dim {dim} not divisible by num_heads {num_heads}")
        self.dim = dim
        self.window_size = window_size
        self.num_heads = num_heads
        self.scale = (dim // num_heads) ** -0.5

        self.relative_position_bias_table = nn.Parameter(
            torch.zeros((2 * window_size - 1) ** 2, num_heads)
        )
        coords = torch.stack(
            torch.meshgrid(torch.arange(window_size), torch.arange(window_size), indexing="ij")
        ).flatten(1)
        rel = coords[:, :, None] - coords[:, None, :]  # (2, N, N)
        rel = rel.permute(1, 2, 0).contiguous()
        rel[:, :, 0] += window_size - 1
        rel[:, :, 1] += window_size - 1
        rel[:, :, 0] *= 2 * window_size - 1
        self.register_buffer("relative_position_index", rel.sum(-1))

        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, mask: torch.Tensor | None = None,
                return_attn: bool = False):
        """x: (B_, N, C) window tokens; mask: (nW, N, N) or None."""
        b_, n, c = x.shape
        qkv = self.qkv(x).reshape(b_, n, 3, self.num_heads, c // self.num_heads).permute(2, 0, 3, 1, 4)
        q, k, v = qkv.unbind(0)

        attn = (q * self.scale) @ k.transpose(-2, -1)
        bias = self.relative_position_bias_table[self.relative_position_index.view(-1)]
        bias = bias.view(n, n, -1).permute(2, 0, 1)
        attn = attn + bias.unsqueeze(0)
        if mask is not None:
            nw = mask.shape[0]
            attn = attn.view(b_ // nw, nw, self.num_heads, n, n) + mask.unsqueeze(1).unsqueeze(0)
            attn = attn.view(-1, self.num_heads, n, n)
        attn = F.softmax(attn, dim=-1)

        out = (attn @ v).transpose(1, 2).reshape(b_, n, c)
        out = self.proj(out)
        if return_attn:
            return out, attn
        return out


class OverlapAttention(nn.Module):
    """Cross-attention: queries from non-overlapping windows, keys/values from
    enlarged windows (overlap fraction of the window size on each side, zero-padded
    at the borders and implicitly cropped by the query partition)."""

    def __init__(self, dim: int, window_size: int, overlap: float, num_heads: int):
        super().__init__()
        if dim % num_heads:
            raise ConfigError(f"dim {dim} not divisible by num_heads {num_heads}")
        self.dim = dim
        self.window_size = window_size
        self.num_heads = num_heads
        self.scale = (dim // num_heads) ** -0.5
        self.overlap_size = window_size + int(round(overlap * window_size))
        if (self.overlap_size - window_size) % 2:
            raise ConfigError(
                f"overlap {overlap} with window {window_size} gives an odd margin; "
                "use an overlap that widens the window by an even pixel count"
            )

        span = window_size + self.overlap_size - 1
        self.relative_position_bias_table = nn.Parameter(torch.zeros(span * span, num_heads))
        coords_q = torch.stack(
            torch.meshgrid(torch.arange(window_size), torch.arange(window_size), indexing="ij")
        ).flatten(1)
        coords_k = torch.stack(
            torch.meshgrid(torch.arange(self.overlap_size), torch.arange(self.overlap_size), indexing="ij")
        ).flatten(1)
        rel = coords_q[:, :, None] - coords_k[:, None, :]
        rel = rel.permute(1, 2, 0).contiguous()
        rel[:, :, 0] += self.overlap_size - 1
        rel[:, :, 1] += self.overlap_size - 1
        rel[:, :, 0] *= span
        self.register_buffer("relative_position_index", rel.sum(-1))

        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, h: int, w: int, return_attn: bool = False):
        """x: (B, H*W, C) tokens; returns tokens of the same shape."""
        b, _, c = x.shape
        ws, ows = self.window_size, self.overlap_size
        nh = self.num_heads
        hd = c // nh

        qkv = self.qkv(x).reshape(b, h, w, 3, c).permute(3, 0, 4, 1, 2)  # (3, B, C, H, W)
        q = qkv[0].permute(0, 2, 3, 1)  # (B, H, W, C)
        kv = torch.cat([qkv[1], qkv[2]], dim=1)  # (B, 2C, H, W)

        q = window_partition(q, ws).view(-1, ws * ws, nh, hd).permute(0, 2, 1, 3)

        kv = F.unfold(kv, kernel_size=ows, stride=ws, padding=(ows - ws) // 2)
        n_windows = kv.shape[-1]
        kv = kv.view(b, 2, c, ows * ows, n_windows).permute(1, 0, 4, 3, 2)
        kv = kv.reshape(2, b * n_windows, ows * ows, nh, hd).permute(0, 1, 3, 2, 4)
        k, v = kv.unbind(0)

        attn = (q * self.scale) @ k.transpose(-2, -1)
        bias = self.relative_position_bias_table[self.relative_position_index.view(-1)]
        bias = bias.view(ws * ws, ows * ows, -1).permute(2, 0, 1)
        attn = F.softmax(attn + bias.unsqueeze(0), dim=-1)

        out = (attn @ v).transpose(1, 2).reshape(-1, ws * ws, c)
        out = self.proj(out)
        out = window_reverse(out.view(-1, ws, ws, c), ws, h, w).reshape(b, h * w, c)
        if return_attn:
            return out, attn
        return out


class HAB(nn.Module):
    """Hybrid attention block: LN -> (S)W-MSA + alpha * CBAM + residual, then LN -> MLP + residual."""

    def __init__(self, dim: int, window_size: int, num_heads: int, shifted: bool,
                 mlp_ratio: float, cbam_weight: float, cbam_reduction: int,
                 cbam_spatial_kernel: int):
        super().__init__()
        self.window_size = window_size
        self.shift = window_size // 2 if shifted else 0
        self.cbam_weight = cbam_weight
        self.norm1 = nn.LayerNorm(dim)
        self.attn = WindowAttention(dim, window_size, num_heads)
        self.cbam = CBAM(dim, cbam_reduction, cbam_spatial_kernel)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def _windowed_attention(self, xn: torch.Tensor, h: int, w: int) -> torch.Tensor:
        b = xn.shape[0]
        c = xn.shape[-1]
        spat = xn.view(b, h, w, c)
        if self.shift:
            spat = torch.roll(spat, shifts=(-self.shift, -self.shift), dims=(1, 2))
            mask = shift_attention_mask(h, w, self.window_size, self.shift, xn.device, xn.dtype)
        else:
            mask = None
        windows = window_partition(spat, self.window_size).view(-1, self.window_size ** 2, c)
        attn_out = self.attn(windows, mask=mask)
        spat = window_reverse(attn_out.view(-1, self.window_size, self.window_size, c), self.window_size, h, w)
        if self.shift:
            spat = torch.roll(spat, shifts=(self.shift, self.shift), dims=(1, 2))
        return spat.reshape(b, h * w, c)

    def forward(self, x: torch.Tensor, h: int, w: int) -> torch.Tensor:
        """x: (B, H*W, C) tokens with window_size dividing h and w."""
        if h % self.window_size or w % self.window_size:
            raise ConfigError(f"window {self.window_size} does not divide extents {h}x{w}")
        b, _, c = x.shape
        xn = self.norm1(x)
        attn_out = self._windowed_attention(xn, h, w)
        cbam_out = self.cbam(xn.transpose(1, 2).view(b, c, h, w)).flatten(2).transpose(1, 2)
        xm = attn_out + self.cbam_weight * cbam_out + x
        return self.mlp(self.norm2(xm)) + xm


class OCAB(nn.Module):
    """Overlapping cross-attention block with the same residual/MLP wrapping as HAB,
    minus the CBAM term."""

    def __init__(self, dim: int, window_size: int, overlap: float, num_heads: int,
                 mlp_ratio: float):
        super().__init__()
        self.window_size = window_size
        self.norm1 = nn.LayerNorm(dim)
        self.attn = OverlapAttention(dim, window_size, overlap, num_heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def forward(self, x: torch.Tensor, h: int, w: int) -> torch.Tensor:
        if h % self.window_size or w % self.window_size:
            raise ConfigError(f"window {self.window_size} does not divide extents {h}x{w}")
        xm = self.attn(self.norm1(x), h, w) + x
        return self.mlp(self.norm2(xm)) + xm


class RHAG(nn.Module):
    """Residual group: HABs alternating unshifted/shifted, one OCAB, one Inception
    convolution, plus the group residual."""

    def __init__(self, dim: int, depth: int, window_size: int, num_heads: int,
                 mlp_ratio: float, cbam_weight: float, cbam_reduction: int,
                 cbam_spatial_kernel: int, ocab_overlap: float):
        super().__init__()
        self.blocks = nn.ModuleList(
            HAB(dim, window_size, num_heads, shifted=(i % 2 == 1), mlp_ratio=mlp_ratio,
                cbam_weight=cbam_weight, cbam_reduction=cbam_reduction,
                cbam_spatial_kernel=cbam_spatial_kernel)
            for i in range(depth)
        )
        self.ocab = OCAB(dim, window_size, ocab_overlap, num_heads, mlp_ratio)
        self.conv = InceptionConv(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: (B, C, H, W)."""
        b, c, h, w = x.shape
        tokens = x.flatten(2).transpose(1, 2)
        y = tokens
        for blk in self.blocks:
            y = blk(y, h, w)
        y = self.ocab(y, h, w)
        y = y.transpose(1, 2).view(b, c, h, w)
        return self.conv(y) + x
