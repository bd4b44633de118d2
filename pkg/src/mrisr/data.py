"""Paired LR/HR datasets: containers, split policy, and disk layout."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError
from .image import Image2D, load_image, save_image

TRAIN, TEST = "train", "test"


@dataclass
class ImagePair:
    lr: Image2D
    hr: Image2D
    subject_id: str
    knee_side: str = "L"
    surgical: bool = False
    case_id: str = ""


@dataclass
class PairedDataset:
    """A collection of LR/HR pairs with optional train/test labels."""

    pairs: list
    upscale: int = 2
    split_labels: list | None = None  # per-pair, TRAIN or TEST

    def __post_init__(self):
        for p in self.pairs:
            if p.hr.height != self.upscale * p.lr.height or p.hr.width != self.upscale * p.lr.width:
                raise InputError(
                    f"pair {p.case_id or p.subject_id}: HR {p.hr.height}x{p.hr.width} is not "
                    f"{self.upscale}x the LR {p.lr.height}x{p.lr.width}"
                )
        if self.split_labels is not None:
            self._check_split()

    def _check_split(self):
        if len(self.split_labels) != len(self.pairs):
            raise InputError("split_labels length does not match pairs")
        train_subjects = {p.subject_id for p, s in zip(self.pairs, self.split_labels) if s == TRAIN}
        test_subjects = {p.subject_id for p, s in zip(self.pairs, self.split_labels) if s == TEST}
        overlap = train_subjects & test_subjects
        if overlap:
            raise InputError(f"subjects appear in both splits: {sorted(overlap)}")
        for p, s in zip(self.pairs, self.split_labels):
            if p.surgical and s == TRAIN:
                raise InputError(f"surgical-reference pair {p.case_id} assigned to train")

    def subset(self, label: str) -> list:
        if self.split_labels is None:
            raise InputError("dataset has no split labels")
        return [p for p, s in zip(self.pairs, self.split_labels) if s == label]

    @property
    def train_pairs(self):
        return self.subset(TRAIN)

    @property
    def test_pairs(self):
        return self.subset(TEST)


@dataclass
class SplitPolicy:
    """Target split sizes; defaults follow the 24-train / 30-test pairing."""

    train_count: int = 24
    test_count: int | None = 30
    seed: int = 0


def split_dataset(dataset: PairedDataset, policy: SplitPolicy) -> PairedDataset:
    """Assign train/test labels: subject-disjoint, surgical pairs always in test.

    Subjects are atomic (all knees of a subject share a split), so the exact
    train count is found by a randomized subset-sum over subject knee counts.
    """
    n = len(dataset.pairs)
    if policy.test_count is not None and policy.train_count + policy.test_count != n:
        raise ConfigError(
            f"split {policy.train_count}+{policy.test_count} does not cover {n} pairs"
        )
    if not 0 <= policy.train_count <= n:
        raise ConfigError(f"train_count {policy.train_count} out of range for {n} pairs")

    by_subject: dict[str, list[int]] = {}
    for i, p in enumerate(dataset.pairs):
        by_subject.setdefault(p.subject_id, []).append(i)
    surgical_subjects = {p.subject_id for p in dataset.pairs if p.surgical}
    eligible = [s for s in by_subject if s not in surgical_subjects]

    rng = np.random.default_rng(policy.seed)
    order = list(rng.permutation(len(eligible)))
    eligible = [eligible[i] for i in order]
    sizes = [len(by_subject[s]) for s in eligible]

    chosen = _exact_subset(sizes, policy.train_count)
    if chosen is None:
        raise ConfigError(
            f"cannot reach a train split of exactly {policy.train_count} pairs from "
            f"{sum(sizes)} non-surgical pairs"
        )

    labels = [TEST] * n
    for idx in chosen:
        for i in by_subject[eligible[idx]]:
            labels[i] = TRAIN
    return PairedDataset(pairs=dataset.pairs, upscale=dataset.upscale, split_labels=labels)


def _exact_subset(sizes, target):
    """Indices of a subset of `sizes` summing to target, honoring list order; None if impossible."""
    reachable = {0: None}  # sum -> (last index, previous sum)
    sums = [0]
    for i, s in enumerate(sizes):
        new = {}
        for acc in sums:
            t = acc + s
            if t <= target and t not in reachable and t not in new:
                new[t] = (i, acc)
        reachable.update(new)
        sums.extend(new.keys())
        if target in reachable:
            break
    if target not in reachable:
        return None
    out = []
    acc = target
    while acc != 0:
        i, prev = reachable[acc]
        out.append(i)
        acc = prev
    return out[::-1]


def save_dataset(dataset: PairedDataset, out_dir) -> Path:
    """Write all pairs plus a manifest.json; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i, p in enumerate(dataset.pairs):
        case = p.case_id or f"case{i:03d}"
        save_image(p.lr, out_dir / f"{case}_lr")
        save_image(p.hr, out_dir / f"{case}_hr")
        rec = {
            "case_id": case,
            "subject_id": p.subject_id,
            "knee_side": p.knee_side,
            "surgical": p.surgical,
            "lr": f"{case}_lr.f32",
            "hr": f"{case}_hr.f32",
        }
        if dataset.split_labels is not None:
            rec["split"] = dataset.split_labels[i]
        records.append(rec)
    manifest = {"upscale": dataset.upscale, "pairs": records}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load_dataset(path) -> PairedDataset:
    """Load a dataset written by :func:`save_dataset` (dir or manifest path)."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.exists():
        raise InputError(f"dataset manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text())
        upscale = int(manifest["upscale"])
        records = manifest["pairs"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"corrupt dataset manifest {path}: {exc}") from exc
    root = path.parent
    pairs, labels = [], []
    has_split = records and all("split" in r for r in records)
    for rec in records:
        pairs.append(
            ImagePair(
                lr=load_image(root / rec["lr"]),
                hr=load_image(root / rec["hr"]),
                subject_id=rec["subject_id"],
                knee_side=rec.get("knee_side", "L"),
                surgical=bool(rec.get("surgical", False)),
                case_id=rec["case_id"],
            )
        )
        if has_split:
            labels.append(rec["split"])
    return PairedDataset(pairs=pairs, upscale=upscale, split_labels=labels if has_split else None)
