"""Synthetic knee-like phantoms and the k-space degradation that pairs them.

High-resolution phantoms are composited from soft-edged ellipse bands
(bone/cartilage/fluid analogues), triangular wedges (menisci analogue),
and an optional focal lesion. Low-resolution counterparts come from
truncating the centered 2D DFT to its central block, which reproduces
ringing next to sharp edges, followed by optional Rician noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError
from .image import Image2D

GRADE_TOKENS = ("0", "1", "2A", "2B", "3")


@dataclass
class EllipseBand:
    """Axis-aligned-then-rotated ellipse in unit coordinates with a fill intensity."""

    cx: float
    cy: float
    rx: float
    ry: float
    angle_deg: float = 0.0
    intensity: float = 0.5


@dataclass
class Wedge:
    """Filled triangle in unit coordinates (menisci analogue)."""

    vertices: tuple  # ((x0, y0), (x1, y1), (x2, y2))
    intensity: float = 0.15


@dataclass
class Lesion:
    """Focal disk perturbation inside a cartilage band."""

    cx: float
    cy: float
    radius: float
    delta: float
    grade: str = "2A"  # nominal severity token, one of GRADE_TOKENS


@dataclass
class PhantomSpec:
    """Parametric description of one synthetic scene.

    Geometry lives in unit coordinates ([0,1] x [0,1]); `size` scales it
    to pixels. `texture_amp` adds a smooth seeded intensity field so that
    different seeds give visually distinct tissue.
    """

    size: int = 384
    seed: int = 0
    bands: list = field(default_factory=list)
    wedges: list = field(default_factory=list)
    lesion: Lesion | None = None
    background: float = 0.05
    edge_px: float = 1.5
    texture_amp: float = 0.0
    pixel_spacing: float = 0.4


@dataclass
class DegradationConfig:
    truncation_factor: int = 2
    noise_sigma: float = 0.01
    keep_grid: bool = False

    def validate(self):
        if self.truncation_factor < 1 or int(self.truncation_factor) != self.truncation_factor:
            raise InputError(f"truncation_factor must be a positive integer, got {self.truncation_factor}")
        if self.noise_sigma < 0:
            raise InputError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


def default_knee_spec(size: int = 384, seed: int = 0) -> PhantomSpec:
    """A layered scene loosely laid out like a sagittal knee slice."""
    bands = [
        EllipseBand(0.50, 0.28, 0.34, 0.22, 0.0, 0.32),    # upper bone block
        EllipseBand(0.50, 0.80, 0.37, 0.18, 0.0, 0.30),    # lower bone block
        EllipseBand(0.50, 0.47, 0.30, 0.085, 0.0, 0.88),   # upper cartilage band
        EllipseBand(0.50, 0.62, 0.32, 0.060, 0.0, 0.82),   # lower cartilage band
        EllipseBand(0.78, 0.50, 0.10, 0.050, 20.0, 0.96),  # fluid pocket
    ]
    wedges = [
        Wedge(((0.135, 0.50), (0.30, 0.525), (0.155, 0.615)), 0.12),
        Wedge(((0.865, 0.50), (0.70, 0.525), (0.845, 0.615)), 0.12),
    ]
    return PhantomSpec(size=size, seed=seed, bands=bands, wedges=wedges)


def _unit_grids(size):
    ys, xs = np.mgrid[0:size, 0:size]
    return (xs + 0.5) / size, (ys + 0.5) / size


def _soft_mask_from_distance(dist_px: np.ndarray, edge_px: float) -> np.ndarray:
    """Linear edge ramp: 1 inside, 0 outside, transition of width 2*edge_px."""
    if edge_px <= 0:
        return (dist_px > 0).astype(np.float64)
    return np.clip(0.5 + dist_px / (2.0 * edge_px), 0.0, 1.0)


def _ellipse_distance_px(band: EllipseBand, xs, ys, size) -> np.ndarray:
    """Approximate signed distance (pixels, positive inside) to the ellipse boundary."""
    theta = math.radians(band.angle_deg)
    dx, dy = xs - band.cx, ys - band.cy
    u = dx * math.cos(theta) + dy * math.sin(theta)
    v = -dx * math.sin(theta) + dy * math.cos(theta)
    r = np.sqrt((u / band.rx) ** 2 + (v / band.ry) ** 2)
    return (1.0 - r) * min(band.rx, band.ry) * size


def _triangle_distance_px(wedge: Wedge, xs, ys, size) -> np.ndarray:
    """Signed distance (pixels, positive inside) to a triangle."""
    (x0, y0), (x1, y1), (x2, y2) = wedge.vertices
    px, py = xs, ys
    verts = [(x0, y0), (x1, y1), (x2, y2)]
    d2 = np.full(xs.shape, np.inf)
    signs = []
    for (ax, ay), (bx, by) in zip(verts, verts[1:] + verts[:1]):
        ex, ey = bx - ax, by - ay
        wx, wy = px - ax, py - ay
        t = np.clip((wx * ex + wy * ey) / (ex * ex + ey * ey), 0.0, 1.0)
        d2 = np.minimum(d2, (wx - t * ex) ** 2 + (wy - t * ey) ** 2)
        signs.append(ex * wy - ey * wx)
    inside = ((signs[0] >= 0) & (signs[1] >= 0) & (signs[2] >= 0)) | (
        (signs[0] <= 0) & (signs[1] <= 0) & (signs[2] <= 0)
    )
    dist = np.sqrt(d2) * size
    return np.where(inside, dist, -dist)


def _validate_spec(spec: PhantomSpec):
    if spec.size < 8:
        raise InputError(f"phantom size too small: {spec.size}")
    if not 0.0 <= spec.background <= 1.0:
        raise InputError("background intensity must lie in [0, 1]")
    for band in spec.bands:
        if not (0.0 <= band.intensity <= 1.0):
            raise InputError(f"band intensity {band.intensity} outside [0, 1]")
        if band.rx <= 0 or band.ry <= 0:
            raise InputError("ellipse radii must be positive")
        if not (0.0 <= band.cx <= 1.0 and 0.0 <= band.cy <= 1.0):
            raise InputError(f"band center ({band.cx}, {band.cy}) outside the unit square")
    for wedge in spec.wedges:
        if not (0.0 <= wedge.intensity <= 1.0):
            raise InputError(f"wedge intensity {wedge.intensity} outside [0, 1]")
        for x, y in wedge.vertices:
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise InputError(f"wedge vertex ({x}, {y}) outside the unit square")
    if spec.lesion is not None:
        les = spec.lesion
        if les.radius <= 0:
            raise InputError("lesion radius must be positive")
        if les.grade not in GRADE_TOKENS:
            raise InputError(f"unknown lesion grade {les.grade!r}")
        xs = np.array([les.cx])
        ys = np.array([les.cy])
        inside_any = any(
            _ellipse_distance_px(b, xs, ys, spec.size)[0] > 0 for b in spec.bands
        )
        if spec.bands and not inside_any:
            raise InputError("lesion center must lie inside a band")


def generate_phantom(spec: PhantomSpec) -> Image2D:
    """Render the spec to a [0, 1] intensity image, deterministically per seed."""
    _validate_spec(spec)
    size = spec.size
    xs, ys = _unit_grids(size)
    img = np.full((size, size), float(spec.background))

    for band in spec.bands:
        m = _soft_mask_from_distance(_ellipse_distance_px(band, xs, ys, size), spec.edge_px)
        img = img * (1.0 - m) + band.intensity * m
    for wedge in spec.wedges:
        m = _soft_mask_from_distance(_triangle_distance_px(wedge, xs, ys, size), spec.edge_px)
        img = img * (1.0 - m) + wedge.intensity * m

    if spec.texture_amp > 0:
        img = img + spec.texture_amp * _smooth_field(size, spec.seed)

    if spec.lesion is not None:
        les = spec.lesion
        dist = (les.radius - np.hypot(xs - les.cx, ys - les.cy)) * size
        m = _soft_mask_from_distance(dist, spec.edge_px)
        img = img + les.delta * m

    return Image2D(np.clip(img, 0.0, 1.0), pixel_spacing=spec.pixel_spacing)


def _smooth_field(size, seed, n_modes=6):
    """Zero-mean smooth random field in [-1, 1], deterministic per seed."""
    rng = np.random.default_rng(seed)
    xs, ys = _unit_grids(size)
    out = np.zeros((size, size))
    for _ in range(n_modes):
        fx, fy = rng.uniform(0.5, 3.0, size=2)
        phx, phy = rng.uniform(0, 2 * np.pi, size=2)
        out += rng.uniform(-1, 1) * np.sin(2 * np.pi * fx * xs + phx) * np.sin(2 * np.pi * fy * ys + phy)
    peak = np.abs(out).max()
    return out / peak if peak > 0 else out


def kspace_truncate(hr: Image2D, cfg: DegradationConfig) -> Image2D:
    """Keep only the central block of the centered 2D DFT and invert.

    For extent H and factor f the retained integer frequencies are
    [-H/(2f), H/(2f)); the same convention applies to the width. With
    `keep_grid` the discarded coefficients are zero-filled and the output
    stays on the input grid; otherwise the central block is inverted on
    the reduced (H/f) x (W/f) grid, scaled so a constant image maps to
    the same constant. The magnitude is returned in the input's dtype.
    """
    cfg.validate()
    f = int(cfg.truncation_factor)
    h_in, w_in = hr.height, hr.width
    if h_in % f or w_in % f:
        raise InputError(f"truncation factor {f} does not divide extents {h_in}x{w_in}")

    data = hr.data.astype(np.float64)
    if f == 1:
        out = np.abs(data)
        return Image2D(out.astype(hr.data.dtype), pixel_spacing=hr.pixel_spacing)

    kspace = np.fft.fftshift(np.fft.fft2(data))
    h_keep, w_keep = h_in // f, w_in // f
    r0 = h_in // 2 - h_keep // 2
    c0 = w_in // 2 - w_keep // 2

    if cfg.keep_grid:
        filtered = np.zeros_like(kspace)
        filtered[r0:r0 + h_keep, c0:c0 + w_keep] = kspace[r0:r0 + h_keep, c0:c0 + w_keep]
        out = np.abs(np.fft.ifft2(np.fft.ifftshift(filtered)))
        spacing = hr.pixel_spacing
    else:
        block = kspace[r0:r0 + h_keep, c0:c0 + w_keep]
        out = np.abs(np.fft.ifft2(np.fft.ifftshift(block))) / (f * f)
        spacing = hr.pixel_spacing * f

    return Image2D(out.astype(hr.data.dtype), pixel_spacing=spacing)


def truncation_spectrum(img: Image2D) -> np.ndarray:
    """Centered k-space magnitudes of an image (diagnostic helper)."""
    return np.abs(np.fft.fftshift(np.fft.fft2(img.data.astype(np.float64))))


def add_rician_noise(img: Image2D, sigma: float, seed: int) -> Image2D:
    """Magnitude of (img + n1) + i*n2 with n1, n2 ~ N(0, sigma^2), seeded."""
    if sigma < 0:
        raise InputError(f"sigma must be >= 0, got {sigma}")
    data = img.data.astype(np.float64)
    if sigma == 0:
        out = np.abs(data)
    else:
        rng = np.random.default_rng(seed)
        real = data + rng.normal(0.0, sigma, size=data.shape)
        imag = rng.normal(0.0, sigma, size=data.shape)
        out = np.hypot(real, imag)
    return Image2D(out.astype(img.data.dtype), pixel_spacing=img.pixel_spacing)


def perturb_spec(base: PhantomSpec, rng: np.random.Generator, lesion_rate=0.5) -> PhantomSpec:
    """Randomized per-case variation of a base spec (geometry, intensity, lesion)."""
    bands = [
        replace(
            b,
            cx=float(np.clip(b.cx + rng.uniform(-0.02, 0.02), 0, 1)),
            cy=float(np.clip(b.cy + rng.uniform(-0.02, 0.02), 0, 1)),
            rx=b.rx * float(rng.uniform(0.93, 1.07)),
            ry=b.ry * float(rng.uniform(0.93, 1.07)),
            intensity=float(np.clip(b.intensity + rng.uniform(-0.03, 0.03), 0, 1)),
        )
        for b in base.bands
    ]
    wedges = [
        replace(
            w,
            vertices=tuple(
                (float(np.clip(x + rng.uniform(-0.01, 0.01), 0, 1)),
                 float(np.clip(y + rng.uniform(-0.01, 0.01), 0, 1)))
                for x, y in w.vertices
            ),
        )
        for w in base.wedges
    ]
    lesion = None
    cartilage = [b for b in bands if b.intensity > 0.6] or bands
    if cartilage and rng.random() < lesion_rate:
        host = cartilage[rng.integers(len(cartilage))]
        grade = GRADE_TOKENS[1 + int(rng.integers(4))]
        lesion = Lesion(
            cx=float(host.cx + rng.uniform(-0.5, 0.5) * host.rx),
            cy=float(host.cy),
            radius=float(rng.uniform(0.010, 0.025)),
            delta=float(rng.uniform(-0.5, -0.25)),
            grade=grade,
        )
    return replace(
        base,
        seed=int(rng.integers(2**31 - 1)),
        bands=bands,
        wedges=wedges,
        lesion=lesion,
        texture_amp=0.02,
    )


def make_paired_dataset(n: int, base_spec: PhantomSpec | None, cfg: DegradationConfig, seed: int,
                        surgical_count: int = 0, lesion_rate: float = 0.5):
    """Generate n (LR, HR) pairs from randomized variations of a base spec.

    HR phantoms are rendered at base_spec.size; the LR partner is the
    k-space truncation of the HR image plus Rician noise. Pairs carry
    synthetic subject ids, alternating knee sides, and (optionally) a
    surgical-reference flag on a seeded random subset.
    """
    from .data import ImagePair, PairedDataset

    if n < 1:
        raise InputError(f"need at least one pair, got n={n}")
    cfg.validate()
    if surgical_count > n:
        raise InputError("surgical_count cannot exceed n")
    base = base_spec if base_spec is not None else default_knee_spec()
    rng = np.random.default_rng(seed)
    surgical = np.zeros(n, dtype=bool)
    surgical[rng.choice(n, size=surgical_count, replace=False)] = True

    pairs = []
    for i in range(n):
        spec = perturb_spec(base, rng, lesion_rate=lesion_rate)
        hr = generate_phantom(spec)
        hr = Image2D(hr.data.astype(np.float32), pixel_spacing=hr.pixel_spacing)
        lr = kspace_truncate(hr, cfg)
        if cfg.noise_sigma > 0:
            lr = add_rician_noise(lr, cfg.noise_sigma, seed=int(rng.integers(2**31 - 1)))
        pairs.append(
            ImagePair(
                lr=lr,
                hr=hr,
                subject_id=f"subj{i:03d}",
                knee_side="L" if i % 2 == 0 else "R",
                surgical=bool(surgical[i]),
                case_id=f"case{i:03d}",
            )
        )
    upscale = 1 if cfg.keep_grid else int(cfg.truncation_factor)
    return PairedDataset(pairs=pairs, upscale=upscale)
