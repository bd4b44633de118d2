"""Report builders shaped like the three reader-study summary tables.

Each builder returns (text, rows): a human-readable block and a list of
flat dicts for the machine-readable CSV.
"""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from ..errors import InputError
from .agreement import cohen_kappa, gwet_ac2
from .diagnostic import diagnostic_performance, percent_display, roc_auc
from .significance import friedman_test, mcnemar_exact, pairwise_wilcoxon_holm
from .tables import DiagnosticTable, METHODS, RatingsTable, grade_rank


def _fmt_p(p: float) -> str:
    if math.isnan(p):
        return "NA"
    if p > 0.99:
        return "> 0.99"
    if p < 0.001:
        return "< 0.001"
    return f"{p:.3f}"


def _fmt_coef(value: float, ci) -> str:
    if math.isnan(value):
        return "NA"
    return f"{value:.3f} [{ci[0]:.3f}, {ci[1]:.3f}]"


def default_weights_for(kind: str) -> str:
    """Linear weights for binary data, quadratic for ordinal grades and scores."""
    return "linear" if kind == "binary" else "quadratic"


def agreement_report(table: RatingsTable, weights: str | None = None):
    """Inter-reader agreement (AC2) per item, pooled across methods and per method."""
    rows = []
    lines = ["item\tkind\tweights\tscope\tAC2 [95% CI]"]
    for item in table.items():
        kind = table.value_kind(item)
        w = weights or default_weights_for(kind)
        scopes = [("all", METHODS)] + [(m, (m,)) for m in METHODS]
        for scope_name, methods in scopes:
            matrix, categories = table.rating_matrix(item, methods=methods)
            res = gwet_ac2(matrix, categories=categories, weights=w)
            lines.append(f"{item}\t{kind}\t{w}\t{scope_name}\t{_fmt_coef(res.coefficient, res.ci)}")
            rows.append(
                {
                    "item": item,
                    "kind": kind,
                    "weights": w,
                    "scope": scope_name,
                    "ac2": f"{res.coefficient:.6f}",
                    "ci_lo": f"{res.ci[0]:.6f}",
                    "ci_hi": f"{res.ci[1]:.6f}",
                    "degenerate": str(res.degenerate).lower(),
                }
            )
    return "\n".join(lines) + "\n", rows


def compare_report(table: RatingsTable):
    """Method comparison per item: medians/IQR of reader-averaged scores,
    Friedman, pairwise Wilcoxon with Holm adjustment; plus intermethod
    kappa and McNemar for binary/grade items (LR vs HR and SR vs HR)."""
    rows = []
    lines = []
    for item in table.items():
        kind = table.value_kind(item)
        scores, names = table.reader_mean_scores(item)
        med = {
            name: (
                float(np.median(scores[:, j])),
                float(np.percentile(scores[:, j], 25)),
                float(np.percentile(scores[:, j], 75)),
            )
            for j, name in enumerate(names)
        }
        fried = friedman_test(scores)
        pairwise = pairwise_wilcoxon_holm(scores, names)

        lines.append(f"== {item} ({kind}) ==")
        for name in names:
            m, lo, hi = med[name]
            lines.append(f"  {name}: median {m:g} [IQR {lo:g}, {hi:g}]")
        lines.append(f"  Friedman: stat {fried.statistic:.4f}, p {_fmt_p(fried.p_value)} ({fried.method})")
        row = {
            "item": item,
            "kind": kind,
            "friedman_stat": f"{fried.statistic:.6f}",
            "friedman_p": f"{fried.p_value:.6g}",
        }
        for name in names:
            m, lo, hi = med[name]
            row[f"median_{name}"] = f"{m:g}"
            row[f"iqr_lo_{name}"] = f"{lo:g}"
            row[f"iqr_hi_{name}"] = f"{hi:g}"
        for (a, b), raw_p, adj_p in pairwise:
            lines.append(f"  {a} vs {b}: Wilcoxon p {_fmt_p(adj_p)} (raw {_fmt_p(raw_p)})")
            row[f"wilcoxon_{a}_vs_{b}_raw"] = f"{raw_p:.6g}"
            row[f"wilcoxon_{a}_vs_{b}_holm"] = f"{adj_p:.6g}"

        if kind in ("binary", "grade"):
            for method in ("LR", "SR"):
                cons_a = table.consensus_values(item, method)
                cons_b = table.consensus_values(item, "HR")
                kap = cohen_kappa(cons_a, cons_b)
                pos = lambda v: (grade_rank(v) if kind == "grade" else int(float(v))) >= 1
                b_disc = sum(1 for x, y in zip(cons_a, cons_b) if pos(x) and not pos(y))
                c_disc = sum(1 for x, y in zip(cons_a, cons_b) if not pos(x) and pos(y))
                mc_p = mcnemar_exact(b_disc, c_disc)
                lines.append(
                    f"  {method} vs HR: kappa {_fmt_coef(kap.kappa, kap.ci)}, McNemar p {_fmt_p(mc_p)}"
                )
                row[f"kappa_{method}_vs_HR"] = "NA" if kap.degenerate else f"{kap.kappa:.6f}"
                row[f"mcnemar_{method}_vs_HR_p"] = f"{mc_p:.6g}"
        rows.append(row)
        lines.append("")
    return "\n".join(lines) + "\n", rows


def diagnostic_report(table: DiagnosticTable, bootstrap_n: int = 2000, seed: int = 0):
    """Per-method diagnostic performance against the reference standard."""
    ref = table.reference_grades()
    if all(r is None for r in ref):
        raise InputError("diagnostic table has no reference grades")
    ref_binary = [None if r is None else grade_rank(r) >= 1 for r in ref]

    rows = []
    lines = [
        "method\tTP\tFN\tFP\tTN\tref+\tref-\t"
        "sensitivity % [95% CI]\tspecificity % [95% CI]\taccuracy % [95% CI]\tAUC [95% CI]"
    ]
    for method in METHODS:
        grades = table.method_grades(method)
        perf = diagnostic_performance(ref, grades)
        kept = [(g, rb) for g, rb in zip(grades, ref_binary) if rb is not None]
        auc = roc_auc(
            np.array([grade_rank(g) for g, _ in kept], dtype=float),
            np.array([rb for _, rb in kept], dtype=bool),
            bootstrap_n=bootstrap_n,
            seed=seed,
        )
        c = perf.counts
        pd = percent_display
        lines.append(
            f"{method}\t{c.tp}\t{c.fn}\t{c.fp}\t{c.tn}\t{c.ref_pos}\t{c.ref_neg}\t"
            f"{pd(perf.sensitivity)} [{pd(perf.sensitivity_ci[0])}, {pd(perf.sensitivity_ci[1])}]\t"
            f"{pd(perf.specificity)} [{pd(perf.specificity_ci[0])}, {pd(perf.specificity_ci[1])}]\t"
            f"{pd(perf.accuracy)} [{pd(perf.accuracy_ci[0])}, {pd(perf.accuracy_ci[1])}]\t"
            f"{auc.auc:.2f} [{auc.ci[0]:.2f}, {auc.ci[1]:.2f}]"
        )
        rows.append(
            {
                "method": method,
                "tp": c.tp,
                "fn": c.fn,
                "fp": c.fp,
                "tn": c.tn,
                "ref_pos": c.ref_pos,
                "ref_neg": c.ref_neg,
                "sensitivity_pct": str(pd(perf.sensitivity)),
                "sens_lo_pct": str(pd(perf.sensitivity_ci[0])),
                "sens_hi_pct": str(pd(perf.sensitivity_ci[1])),
                "specificity_pct": str(pd(perf.specificity)),
                "spec_lo_pct": str(pd(perf.specificity_ci[0])),
                "spec_hi_pct": str(pd(perf.specificity_ci[1])),
                "accuracy_pct": str(pd(perf.accuracy)),
                "auc": f"{auc.auc:.4f}",
                "auc_lo": f"{auc.ci[0]:.4f}",
                "auc_hi": f"{auc.ci[1]:.4f}",
                "count_discrepancy": str(perf.count_discrepancy).lower(),
                "excluded": perf.excluded,
            }
        )
        if perf.excluded:
            lines.append(f"  note: {perf.excluded} compartments without reference excluded")
    return "\n".join(lines) + "\n", rows


def rows_to_csv(rows) -> str:
    """Serialize report rows, union of keys in first-seen order."""
    if not rows:
        return ""
    fields = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, restval="")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
