"""MSE training of the SR network on paired patches, evaluation, and gradient checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .data import PairedDataset, TRAIN
from .errors import ConfigError, InputError, TrainingDiverged
from .image import Image2D
from .metrics import bicubic_upscale, psnr, ssim
from .network.config import ModelConfig
from .network.model import SuperResolutionNet, build_model, parameter_manifest


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 8
    patch_size: int = 64          # LR pixels; clipped to the smallest LR frame
    base_lr: float = 2e-4
    lr_drops: tuple = (0.5, 0.75)  # fractions of the schedule where lr halves
    seed: int = 0
    augment: bool = False          # flips and 90-degree rotations
    log_every: int = 10

    def validate(self, window_size: int) -> "TrainConfig":
        if self.steps <= 0:
            raise ConfigError("steps must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.patch_size < window_size:
            raise ConfigError(
                f"patch_size ({self.patch_size}) must be >= window_size ({window_size})"
            )
        return self


@dataclass
class EvalRecord:
    case_id: str
    psnr_sr: float
    ssim_sr: float
    psnr_bicubic: float
    ssim_bicubic: float


@dataclass
class TrainReport:
    loss_curve: list = field(default_factory=list)   # (step, mse) tuples
    eval_records: list = field(default_factory=list)

    def mean_psnr_gain(self) -> float:
        """Mean PSNR advantage of the model over bicubic on the eval pairs."""
        if not self.eval_records:
            raise InputError("report has no evaluation records")
        return float(np.mean([r.psnr_sr - r.psnr_bicubic for r in self.eval_records]))

    def to_text(self) -> str:
        lines = ["# loss curve", "step\tmse"]
        lines += [f"{s}\t{v:.8e}" for s, v in self.loss_curve]
        lines += ["", "# evaluation", "case\tpsnr_sr\tssim_sr\tpsnr_bicubic\tssim_bicubic"]
        lines += [
            f"{r.case_id}\t{r.psnr_sr:.4f}\t{r.ssim_sr:.6f}\t{r.psnr_bicubic:.4f}\t{r.ssim_bicubic:.6f}"
            for r in self.eval_records
        ]
        return "\n".join(lines) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_text())
        return path


def _sample_patch(rng, pair, patch, upscale, augment):
    h, w = pair.lr.height, pair.lr.width
    y0 = int(rng.integers(0, h - patch + 1))
    x0 = int(rng.integers(0, w - patch + 1))
    lr = pair.lr.data[y0:y0 + patch, x0:x0 + patch]
    s = upscale
    hr = pair.hr.data[s * y0:s * (y0 + patch), s * x0:s * (x0 + patch)]
    if augment:
        k = int(rng.integers(4))
        lr, hr = np.rot90(lr, k), np.rot90(hr, k)
        if rng.random() < 0.5:
            lr, hr = np.fliplr(lr), np.fliplr(hr)
    return np.ascontiguousarray(lr), np.ascontiguousarray(hr)


def train(dataset: PairedDataset, model_cfg: ModelConfig, train_cfg: TrainConfig):
    """Minimize mean squared error on aligned LR/HR patches.

    Uses the train split when the dataset has one, otherwise every pair.
    Deterministic for a fixed (seed, config, data). Returns (model, report).
    """
    model_cfg.validate()
    pairs = dataset.train_pairs if dataset.split_labels is not None else dataset.pairs
    if not pairs:
        raise InputError("no training pairs available")
    patch = min(train_cfg.patch_size, min(p.lr.height for p in pairs), min(p.lr.width for p in pairs))
    train_cfg.validate(model_cfg.window_size)
    patch -= patch % model_cfg.window_size
    if patch < model_cfg.window_size:
        raise ConfigError("training frames are smaller than one attention window")

    torch.manual_seed(train_cfg.seed)
    model = SuperResolutionNet(model_cfg)
    model.train()
    rng = np.random.default_rng(train_cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=train_cfg.base_lr)
    milestones = sorted({max(1, int(f * train_cfg.steps)) for f in train_cfg.lr_drops})
    sched = torch.optim.lr_scheduler.MultiStepLR(opt, milestones=milestones, gamma=0.5)

    report = TrainReport()
    s = dataset.upscale
    for step in range(1, train_cfg.steps + 1):
        lrs, hrs = [], []
        for _ in range(train_cfg.batch_size):
            pair = pairs[int(rng.integers(len(pairs)))]
            lr_patch, hr_patch = _sample_patch(rng, pair, patch, s, train_cfg.augment)
            lrs.append(lr_patch)
            hrs.append(hr_patch)
        lr_batch = torch.from_numpy(np.stack(lrs)).to(torch.float32).unsqueeze(1)
        hr_batch = torch.from_numpy(np.stack(hrs)).to(torch.float32).unsqueeze(1)

        opt.zero_grad()
        loss = F.mse_loss(model.forward_tensor(lr_batch), hr_batch)
        value = float(loss.detach())
        if not np.isfinite(value):
            raise TrainingDiverged(f"non-finite loss {value} at step {step}")
        loss.backward()
        opt.step()
        sched.step()
        if step % train_cfg.log_every == 0 or step == 1 or step == train_cfg.steps:
            report.loss_curve.append((step, value))

    model.eval()
    return model, report


def evaluate_pairs(model: SuperResolutionNet, pairs) -> list[EvalRecord]:
    """Per-pair PSNR/SSIM of the model output and of bicubic interpolation vs HR."""
    records = []
    s = model.cfg.upscale
    for p in pairs:
        sr = model.super_resolve(p.lr)
        sr_clipped = Image2D(np.clip(sr.data, 0.0, 1.0), pixel_spacing=sr.pixel_spacing)
        bic = bicubic_upscale(p.lr, s)
        records.append(
            EvalRecord(
                case_id=p.case_id or p.subject_id,
                psnr_sr=psnr(sr_clipped, p.hr),
                ssim_sr=ssim(sr_clipped, p.hr),
                psnr_bicubic=psnr(bic, p.hr),
                ssim_bicubic=ssim(bic, p.hr),
            )
        )
    return records


@dataclass
class GradCheckEntry:
    name: str
    shape: tuple
    checked: int
    max_rel_err: float


@dataclass
class GradCheckReport:
    entries: list
    threshold: float = 1e-4

    @property
    def max_rel_err(self) -> float:
        return max(e.max_rel_err for e in self.entries)

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.threshold

    def to_text(self) -> str:
        lines = ["name\tshape\tchecked\tmax_rel_err"]
        lines += [f"{e.name}\t{e.shape}\t{e.checked}\t{e.max_rel_err:.3e}" for e in self.entries]
        lines.append(f"overall\t-\t-\t{self.max_rel_err:.3e}\t{'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _relative_error(analytic: float, numeric: float, floor: float = 1e-7) -> float:
    scale = max(abs(analytic), abs(numeric))
    if scale < floor:
        return 0.0
    return abs(analytic - numeric) / scale


def gradient_check(model_cfg: ModelConfig, input_size=(16, 16), seed: int = 0,
                   step: float = 1e-5, max_entries_per_param: int | None = None,
                   threshold: float = 1e-4) -> GradCheckReport:
    """Compare autograd gradients of an MSE loss against central differences.

    Runs in float64. Every tensor in the parameter manifest is covered; when
    `max_entries_per_param` is set, a deterministic subsample of entries per
    tensor is checked instead of all of them.
    """
    model_cfg.validate()
    torch.manual_seed(seed)
    model = build_model(model_cfg, dtype=torch.float64)
    model.eval()

    gen = torch.Generator().manual_seed(seed + 1)
    x = torch.rand((1, model_cfg.in_channels, *input_size), generator=gen, dtype=torch.float64)
    s = model_cfg.upscale
    target = torch.rand((1, model_cfg.in_channels, input_size[0] * s, input_size[1] * s),
                        generator=gen, dtype=torch.float64)

    def loss_value() -> float:
        return float(F.mse_loss(model.forward_tensor(x), target))

    model.zero_grad()
    loss = F.mse_loss(model.forward_tensor(x), target)
    loss.backward()

    rng = np.random.default_rng(seed)
    entries = []
    for name, p in model.named_parameters():
        grad = p.grad.detach().clone().view(-1)
        flat = p.data.view(-1)
        n = flat.numel()
        if max_entries_per_param is not None and n > max_entries_per_param:
            idx = np.sort(rng.choice(n, size=max_entries_per_param, replace=False))
        else:
            idx = np.arange(n)
        worst = 0.0
        with torch.no_grad():
            for i in idx:
                orig = float(flat[i])
                flat[i] = orig + step
                up = loss_value()
                flat[i] = orig - step
                down = loss_value()
                flat[i] = orig
                numeric = (up - down) / (2 * step)
                worst = max(worst, _relative_error(float(grad[i]), numeric))
        entries.append(GradCheckEntry(name, tuple(p.shape), len(idx), worst))

    names = [e.name for e in entries]
    manifest_names = [n for n, _ in parameter_manifest(model)]
    assert names == manifest_names, "gradient check must cover the manifest exactly"
    return GradCheckReport(entries=entries, threshold=threshold)
