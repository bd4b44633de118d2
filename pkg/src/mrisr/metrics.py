"""Fidelity metrics (PSNR, SSIM) and the bicubic upsampling baseline."""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F
from scipy.ndimage import gaussian_filter

from .errors import InputError
from .image import Image2D


def _as_array(x) -> np.ndarray:
    if isinstance(x, Image2D):
        return x.data.astype(np.float64)
    return np.asarray(x, dtype=np.float64)


def mse(pred, target) -> float:
    """Mean squared pixel difference; shapes must match."""
    a, b = _as_array(pred), _as_array(target)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(pred, target, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give +inf."""
    if peak <= 0:
        raise InputError(f"peak must be positive, got {peak}")
    err = mse(pred, target)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def ssim(pred, target, peak: float = 1.0, sigma: float = 1.5) -> float:
    """Mean structural similarity with a Gaussian window (k1=0.01, k2=0.03)."""
    a, b = _as_array(pred), _as_array(target)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    # 11x11 support at sigma=1.5: truncate at radius 5.
    blur = lambda x: gaussian_filter(x, sigma, truncate=5.0 / sigma, mode="reflect")
    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a ** 2
    var_b = blur(b * b) - mu_b ** 2
    cov = blur(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def bicubic_upscale(img: Image2D, factor: int) -> Image2D:
    """Bicubic interpolation baseline, clipped to [0, 1]."""
    if factor < 1:
        raise InputError(f"factor must be >= 1, got {factor}")
    x = torch.from_numpy(img.data.astype(np.float32))[None, None]
    y = F.interpolate(x, scale_factor=factor, mode="bicubic", align_corners=False)
    out = y[0, 0].clamp_(0.0, 1.0).numpy()
    return Image2D(out.astype(img.data.dtype), pixel_spacing=img.pixel_spacing / factor)
