"""Single-channel 2D images with spacing metadata and raw-binary persistence.

Images persist as raw 32-bit IEEE-754 little-endian values in row-major
(C) order, with a JSON sidecar describing the geometry, so two readers
agree on the byte layout without guessing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

SIDECAR_SUFFIX = ".json"
RAW_SUFFIX = ".f32"


@dataclass
class Image2D:
    """A single-channel intensity grid plus the physical pixel spacing in mm."""

    data: np.ndarray
    pixel_spacing: float = 1.0

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise InputError(f"expected a 2D array, got shape {self.data.shape}")
        if self.data.size == 0:
            raise InputError("image is empty")
        if not np.issubdtype(self.data.dtype, np.floating):
            self.data = self.data.astype(np.float32)
        if not np.isfinite(self.data).all():
            raise InputError("image contains non-finite values")
        if not self.pixel_spacing > 0:
            raise InputError(f"pixel_spacing must be positive, got {self.pixel_spacing}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def normalize_intensity(data: np.ndarray, clip_percentiles=(0.1, 99.9)) -> np.ndarray:
    """Clip to the given intensity percentiles and min/max-rescale to [0, 1].

    A constant image maps to all zeros.
    """
    data = np.asarray(data, dtype=np.float64)
    if not np.isfinite(data).all():
        raise InputError("cannot normalize non-finite data")
    lo, hi = np.percentile(data, clip_percentiles)
    clipped = np.clip(data, lo, hi)
    span = hi - lo
    if span <= 0:
        return np.zeros_like(clipped)
    return (clipped - lo) / span


def save_image(img: Image2D, path) -> Path:
    """Write `<path>.f32` raw bytes plus a `<path>.json` sidecar; returns the raw path."""
    path = Path(path)
    if path.suffix == RAW_SUFFIX:
        path = path.with_suffix("")
    raw_path = path.with_suffix(RAW_SUFFIX)
    raw_path.write_bytes(np.ascontiguousarray(img.data, dtype="<f4").tobytes())
    meta = {
        "height": img.height,
        "width": img.width,
        "pixel_spacing": img.pixel_spacing,
        "dtype": "float32-le",
        "scan_order": "row-major",
    }
    path.with_suffix(SIDECAR_SUFFIX).write_text(json.dumps(meta, indent=2) + "\n")
    return raw_path


def load_image(path) -> Image2D:
    """Load an image written by :func:`save_image` (either path suffix accepted)."""
    path = Path(path)
    if path.suffix in (RAW_SUFFIX, SIDECAR_SUFFIX):
        path = path.with_suffix("")
    raw_path = path.with_suffix(RAW_SUFFIX)
    meta_path = path.with_suffix(SIDECAR_SUFFIX)
    if not raw_path.exists() or not meta_path.exists():
        raise InputError(f"missing image file or sidecar for {path}")
    meta = json.loads(meta_path.read_text())
    if meta.get("dtype") != "float32-le" or meta.get("scan_order") != "row-major":
        raise InputError(f"unsupported image encoding in {meta_path}")
    h, w = int(meta["height"]), int(meta["width"])
    data = np.frombuffer(raw_path.read_bytes(), dtype="<f4")
    if data.size != h * w:
        raise InputError(
            f"{raw_path}: expected {h * w} values for {h}x{w}, found {data.size}"
        )
    return Image2D(data.reshape(h, w).copy(), pixel_spacing=float(meta["pixel_spacing"]))
