"""Command-line surface: phantom generation, degradation, training,
inference, fidelity evaluation, and reader statistics.

Exit codes: 0 on success, 2 for input/configuration problems, 3 when a
numerical failure (non-finite training loss) aborts a run.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .data import SplitPolicy, load_dataset, save_dataset, split_dataset
from .errors import ConfigError, InputError, TrainingDiverged
from .image import Image2D, load_image, save_image
from .metrics import psnr, ssim
from .network.config import ModelConfig
from .network.weights_io import load_weights, save_weights
from .phantom import DegradationConfig, add_rician_noise, default_knee_spec, kspace_truncate, make_paired_dataset
from .runconfig import build_section, load_run_config, write_resolved
from .stats.reports import agreement_report, compare_report, diagnostic_report, rows_to_csv
from .stats.tables import DiagnosticTable, RatingsTable
from .training import TrainConfig, evaluate_pairs, train


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrisr", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mrisr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a paired LR/HR phantom dataset")
    _common(p)
    p.add_argument("--n", type=int, default=None, help="number of pairs")
    p.add_argument("--size", type=int, default=None, help="HR image extent in pixels")
    p.add_argument("--factor", type=int, default=None, help="k-space truncation factor")
    p.add_argument("--sigma", type=float, default=None, help="Rician noise sigma")
    p.add_argument("--surgical", type=int, default=None, help="pairs flagged surgical-reference")
    p.add_argument("--train-count", type=int, default=None, help="apply a split with this many training pairs")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("degrade", help="apply k-space truncation plus noise to an image")
    _common(p)
    p.add_argument("--input", required=True, help="input .f32 image")
    p.add_argument("--factor", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--keep-grid", action="store_true", help="zero-fill instead of downsampling")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("train", help="train the SR network on a paired dataset")
    _common(p)
    p.add_argument("--data", required=True, help="dataset directory or manifest.json")
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="super-resolve one image with trained weights")
    _common(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="PSNR/SSIM of model vs bicubic on a dataset")
    _common(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="reader-study statistics")
    stats_sub = p.add_subparsers(dest="stats_command", required=True)
    for name, helptext in (
        ("agreement", "inter-reader agreement (AC2) per item"),
        ("compare", "Friedman + pairwise Wilcoxon-Holm across methods"),
        ("diagnostic", "sensitivity/specificity/AUC vs the reference standard"),
    ):
        q = stats_sub.add_parser(name, help=helptext)
        _common(q)
        if name == "diagnostic":
            q.add_argument("--grades", required=True, help="per-compartment grade table")
            q.add_argument("--bootstrap", type=int, default=None)
        else:
            q.add_argument("--ratings", required=True, help="long-form ratings table")
            if name == "agreement":
                q.add_argument("--weights", choices=("identity", "linear", "quadratic"), default=None)
        q.set_defaults(func=cmd_stats, stats_command=name)
    return parser


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out", required=True, help="output directory")


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise InputError(f"output directory not writable: {out} ({exc})") from exc
    return out


def cmd_phantom(args) -> int:
    doc = load_run_config(args.config)
    section = dict(doc.get("phantom") or {})
    n = args.n if args.n is not None else int(section.get("n", 4))
    size = args.size if args.size is not None else int(section.get("size", 384))
    seed = args.seed if args.seed is not None else int(section.get("seed", doc.get("seed", 0)))
    surgical = args.surgical if args.surgical is not None else int(section.get("surgical", 0))
    train_count = args.train_count if args.train_count is not None else section.get("train_count")
    if n < 1:
        raise InputError(f"--n must be at least 1, got {n}")
    if size < 32:
        raise InputError(f"--size must be at least 32, got {size}")
    cfg = build_section(DegradationConfig, doc, "degrade",
                        {"truncation_factor": args.factor, "noise_sigma": args.sigma})
    cfg.validate()

    out = _out_dir(args)
    dataset = make_paired_dataset(n, default_knee_spec(size=size), cfg, seed=seed,
                                  surgical_count=surgical,
                                  lesion_rate=float(section.get("lesion_rate", 0.5)))
    if train_count is not None:
        test_count = section.get("test_count")
        policy = SplitPolicy(train_count=int(train_count),
                             test_count=None if test_count is None else int(test_count),
                             seed=seed)
        dataset = split_dataset(dataset, policy)
    manifest = save_dataset(dataset, out)
    write_resolved(out, {
        "phantom": {"n": n, "size": size, "seed": seed, "surgical": surgical,
                    "train_count": train_count},
        "degrade": asdict(cfg),
    })
    print(f"wrote {n} pairs to {manifest.parent}")
    return 0


def cmd_degrade(args) -> int:
    doc = load_run_config(args.config)
    cfg = build_section(DegradationConfig, doc, "degrade", {
        "truncation_factor": args.factor,
        "noise_sigma": args.sigma,
        "keep_grid": True if args.keep_grid else None,
    })
    cfg.validate()
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    out = _out_dir(args)
    img = load_image(args.input)
    lr = kspace_truncate(img, cfg)
    if cfg.noise_sigma > 0:
        lr = add_rician_noise(lr, cfg.noise_sigma, seed=seed)
    stem = Path(args.input).stem
    path = save_image(lr, out / f"{stem}_degraded")
    write_resolved(out, {"degrade": asdict(cfg), "seed": seed})
    print(f"wrote {path}")
    return 0


def cmd_train(args) -> int:
    doc = load_run_config(args.config)
    model_cfg = build_section(ModelConfig, doc, "model", {}).validate()
    train_cfg = build_section(TrainConfig, doc, "train",
                              {"seed": args.seed, "steps": args.steps})
    dataset = load_dataset(args.data)
    out = _out_dir(args)

    model, report = train(dataset, model_cfg, train_cfg)
    weights_path = save_weights(model, out / "weights.zip")
    eval_pairs = dataset.test_pairs if dataset.split_labels is not None else dataset.pairs
    report.eval_records = evaluate_pairs(model, eval_pairs)
    report.save(out / "train_report.txt")
    write_resolved(out, {"model": asdict(model_cfg), "train": asdict(train_cfg),
                         "data": str(args.data)})
    first = report.loss_curve[0][1]
    last = report.loss_curve[-1][1]
    print(f"trained {train_cfg.steps} steps: mse {first:.3e} -> {last:.3e}; weights at {weights_path}")
    return 0


def cmd_infer(args) -> int:
    model = load_weights(args.weights)
    img = load_image(args.input)
    out = _out_dir(args)
    sr = model.super_resolve(img)
    sr = Image2D(np.clip(sr.data, 0.0, 1.0), pixel_spacing=sr.pixel_spacing)
    path = save_image(sr, out / f"{Path(args.input).stem}_sr")
    write_resolved(out, {"weights": str(args.weights), "input": str(args.input)})
    print(f"wrote {path} ({sr.height}x{sr.width})")
    return 0


def cmd_eval(args) -> int:
    model = load_weights(args.weights)
    dataset = load_dataset(args.data)
    pairs = dataset.test_pairs if dataset.split_labels is not None else dataset.pairs
    out = _out_dir(args)
    records = evaluate_pairs(model, pairs)
    lines = ["case\tpsnr_sr\tssim_sr\tpsnr_bicubic\tssim_bicubic"]
    lines += [
        f"{r.case_id}\t{r.psnr_sr:.4f}\t{r.ssim_sr:.6f}\t{r.psnr_bicubic:.4f}\t{r.ssim_bicubic:.6f}"
        for r in records
    ]
    gain = float(np.mean([r.psnr_sr - r.psnr_bicubic for r in records]))
    lines.append(f"mean_psnr_gain_vs_bicubic\t{gain:.4f}")
    (out / "eval_report.txt").write_text("\n".join(lines) + "\n")
    write_resolved(out, {"weights": str(args.weights), "data": str(args.data)})
    print(f"evaluated {len(records)} pairs; mean PSNR gain vs bicubic {gain:+.2f} dB")
    return 0


def cmd_stats(args) -> int:
    doc = load_run_config(args.config)
    section = dict(doc.get("stats") or {})
    out = _out_dir(args)
    name = args.stats_command
    if name == "agreement":
        table = RatingsTable.load(args.ratings)
        weights = args.weights or section.get("weights")
        text, rows = agreement_report(table, weights=weights)
        resolved = {"stats": {"command": name, "ratings": str(args.ratings), "weights": weights}}
    elif name == "compare":
        table = RatingsTable.load(args.ratings)
        text, rows = compare_report(table)
        resolved = {"stats": {"command": name, "ratings": str(args.ratings)}}
    else:
        table = DiagnosticTable.load(args.grades)
        bootstrap_n = args.bootstrap if args.bootstrap is not None else int(section.get("bootstrap_n", 2000))
        seed = args.seed if args.seed is not None else int(section.get("seed", doc.get("seed", 0)))
        text, rows = diagnostic_report(table, bootstrap_n=bootstrap_n, seed=seed)
        resolved = {"stats": {"command": name, "grades": str(args.grades),
                              "bootstrap_n": bootstrap_n, "seed": seed}}
    (out / f"{name}_report.txt").write_text(text)
    (out / f"{name}_report.csv").write_text(rows_to_csv(rows))
    write_resolved(out, resolved)
    print(text, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
