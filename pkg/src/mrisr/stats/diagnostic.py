"""Diagnostic performance: counts, Wilson intervals, and rank-based AUC."""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
from scipy.stats import norm, rankdata

from ..errors import InputError
from .tables import GRADE_TOKENS, grade_rank


def percent_display(proportion: float) -> int:
    """Integer percent, half-up, with values strictly inside (0, 1) clamped
    to [1, 99] so an uncertain bound never prints as 0 or 100."""
    pct = math.floor(100.0 * proportion + 0.5)
    if proportion < 1.0:
        pct = min(pct, 99)
    if proportion > 0.0:
        pct = max(pct, 1)
    return int(pct)


def wilson_ci(successes: int, n: int, level: float = 0.95) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if not 0 <= successes <= n:
        raise InputError(f"successes {successes} outside [0, {n}]")
    if not 0 < level < 1:
        raise InputError(f"level must be in (0, 1), got {level}")
    z = norm.ppf(1.0 - (1.0 - level) / 2.0)
    phat = successes / n
    denom = 1.0 + z * z / n
    center = phat + z * z / (2.0 * n)
    margin = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n))
    lo = max(0.0, (center - margin) / denom)
    hi = min(1.0, (center + margin) / denom)
    return lo, hi


@dataclass
class DiagnosticCounts:
    """Finding counts plus the reference-standard totals used as denominators."""

    tp: int
    tn: int
    fp: int
    fn: int
    ref_pos: int
    ref_neg: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn", "ref_pos", "ref_neg"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be nonnegative")
        if self.tp > self.ref_pos:
            raise InputError(f"tp ({self.tp}) exceeds ref_pos ({self.ref_pos})")
        if self.tn > self.ref_neg:
            raise InputError(f"tn ({self.tn}) exceeds ref_neg ({self.ref_neg})")

    def consistent(self) -> bool:
        """Whether tp+fn and tn+fp add up to the reference totals."""
        return self.tp + self.fn == self.ref_pos and self.tn + self.fp == self.ref_neg


@dataclass
class PerformanceResult:
    counts: DiagnosticCounts
    sensitivity: float
    specificity: float
    accuracy: float
    sensitivity_ci: tuple
    specificity_ci: tuple
    accuracy_ci: tuple
    count_discrepancy: bool
    excluded: int = 0


def performance_from_counts(counts: DiagnosticCounts, level: float = 0.95) -> PerformanceResult:
    """Sensitivity/specificity/accuracy with Wilson CIs.

    Denominators are the reference-standard totals; when the stored FN/FP
    cells disagree with those totals the result is flagged rather than
    silently rebalanced.
    """
    if counts.ref_pos < 1 or counts.ref_neg < 1:
        raise InputError("need at least one reference-positive and one reference-negative")
    total = counts.ref_pos + counts.ref_neg
    sens = counts.tp / counts.ref_pos
    spec = counts.tn / counts.ref_neg
    acc = (counts.tp + counts.tn) / total
    return PerformanceResult(
        counts=counts,
        sensitivity=sens,
        specificity=spec,
        accuracy=acc,
        sensitivity_ci=wilson_ci(counts.tp, counts.ref_pos, level),
        specificity_ci=wilson_ci(counts.tn, counts.ref_neg, level),
        accuracy_ci=wilson_ci(counts.tp + counts.tn, total, level),
        count_discrepancy=not counts.consistent(),
    )


def grade_counts(ref_grades, mri_grades) -> tuple:
    """Tally diagnostic counts from aligned ordinal grade tokens.

    A compartment is reference-positive when the reference grade is 1 or
    higher, and called positive when the reading is 1 or higher. Two
    special recodings apply: a reference full-thickness defect read one
    step lower ("3" read as "2B") counts as a false positive, and a
    reference "2B" read as "3" counts as a false negative. Cases with a
    missing reference are excluded; returns (counts, n_excluded).
    """
    ref_grades = list(ref_grades)
    mri_grades = list(mri_grades)
    if len(ref_grades) != len(mri_grades):
        raise InputError("reference and reading lists differ in length")
    tp = tn = fp = fn = ref_pos = ref_neg = excluded = 0
    for ref, mri in zip(ref_grades, mri_grades):
        if ref is None or ref == "":
            excluded += 1
            continue
        if ref not in GRADE_TOKENS or mri not in GRADE_TOKENS:
            raise InputError(f"unknown grade token in pair ({ref!r}, {mri!r})")
        positive = grade_rank(ref) >= 1
        detected = grade_rank(mri) >= 1
        if positive:
            ref_pos += 1
        else:
            ref_neg += 1
        if ref == "3" and mri == "2B":
            fp += 1
        elif ref == "2B" and mri == "3":
            fn += 1
        elif positive and detected:
            tp += 1
        elif positive and not detected:
            fn += 1
        elif not positive and detected:
            fp += 1
        else:
            tn += 1
    return DiagnosticCounts(tp=tp, tn=tn, fp=fp, fn=fn, ref_pos=ref_pos, ref_neg=ref_neg), excluded


def diagnostic_performance(ref_grades, mri_grades, level: float = 0.95) -> PerformanceResult:
    """Grade-level diagnostic performance against a reference standard."""
    counts, excluded = grade_counts(ref_grades, mri_grades)
    result = performance_from_counts(counts, level)
    result.excluded = excluded
    return result


@dataclass
class AucResult:
    auc: float
    ci: tuple
    n_pos: int
    n_neg: int
    degenerate: bool = False
    bootstrap_skipped: int = 0


def roc_auc(scores, labels, bootstrap_n: int = 2000, seed: int = 0,
            level: float = 0.95) -> AucResult:
    """Area under the ROC curve via the midrank Mann-Whitney estimator.

    The CI comes from seeded case-resampling bootstrap percentiles;
    single-class resamples are skipped and counted. A single-class input
    gives a flagged NaN result.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise InputError("scores and labels must be equal-length 1D arrays")
    lab = labels.astype(bool)
    n_pos = int(lab.sum())
    n_neg = int((~lab).sum())
    if n_pos == 0 or n_neg == 0:
        return AucResult(float("nan"), (float("nan"), float("nan")), n_pos, n_neg, degenerate=True)

    def estimate(s, l):
        ranks = rankdata(s)
        npos = int(l.sum())
        return (ranks[l].sum() - npos * (npos + 1) / 2.0) / (npos * (s.size - npos))

    auc = float(estimate(scores, lab))
    if bootstrap_n <= 0:
        return AucResult(auc, (auc, auc), n_pos, n_neg)

    rng = np.random.default_rng(seed)
    reps = []
    skipped = 0
    n = scores.size
    for _ in range(bootstrap_n):
        idx = rng.integers(0, n, size=n)
        l = lab[idx]
        if l.all() or not l.any():
            skipped += 1
            continue
        reps.append(estimate(scores[idx], l))
    if not reps:
        return AucResult(auc, (float("nan"), float("nan")), n_pos, n_neg,
                         degenerate=True, bootstrap_skipped=skipped)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(reps, [100 * alpha, 100 * (1 - alpha)])
    return AucResult(auc, (float(lo), float(hi)), n_pos, n_neg, bootstrap_skipped=skipped)
