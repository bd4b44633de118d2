"""Rank-based paired tests: Friedman, Wilcoxon signed-rank with Holm
adjustment, and the exact McNemar test."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import chi2, norm, rankdata

from ..errors import InputError

# Exact Friedman p-values are computed from the full within-row permutation
# distribution up to this many cases (k <= 4); beyond that the chi-square
# reference with k-1 degrees of freedom applies.
FRIEDMAN_EXACT_MAX_N = 15
FRIEDMAN_EXACT_MAX_K = 4


@dataclass
class FriedmanResult:
    statistic: float
    p_value: float
    method: str  # "exact" or "chi-square"


def _friedman_statistic(ranks: np.ndarray) -> float:
    """Tie-corrected statistic from a (n, k) midrank matrix."""
    n, k = ranks.shape
    colsum = ranks.sum(axis=0)
    spread = float(((colsum - n * (k + 1) / 2.0) ** 2).sum())
    a = float((ranks ** 2).sum())
    c = n * k * (k + 1) ** 2 / 4.0
    if a == c:  # every row constant
        return 0.0
    return (k - 1) * spread / (a - c)


def _friedman_exact_p(ranks: np.ndarray, observed: float) -> float:
    """Tail probability over all (k!)^n within-row rank permutations.

    Rank vectors are permutation-invariant as multisets, so the statistic
    only depends on column rank sums; those are accumulated with a dynamic
    program over rows (midranks doubled to stay integral).
    """
    n, k = ranks.shape
    a = float((ranks ** 2).sum())
    c = n * k * (k + 1) ** 2 / 4.0
    perms = list(itertools.permutations(range(k)))
    scaled = (2.0 * ranks).round().astype(np.int64)

    states = {(0,) * (k - 1): 1}
    for row in scaled:
        contribs = [tuple(int(row[p[j]]) for j in range(k - 1)) for p in perms]
        new: dict = {}
        for key, cnt in states.items():
            for contrib in contribs:
                nk = tuple(key[j] + contrib[j] for j in range(k - 1))
                new[nk] = new.get(nk, 0) + cnt
        states = new

    total_rank = float(scaled.sum()) / 2.0
    tail = 0
    total = 0
    for key, cnt in states.items():
        cols = [x / 2.0 for x in key]
        cols.append(total_rank - sum(cols))
        spread = sum((cj - n * (k + 1) / 2.0) ** 2 for cj in cols)
        stat = 0.0 if a == c else (k - 1) * spread / (a - c)
        total += cnt
        if stat >= observed - 1e-9:
            tail += cnt
    return tail / total


def friedman_test(scores) -> FriedmanResult:
    """Repeated-measures rank test across k related columns.

    Rows are cases, columns are methods; ties take midranks. Small tables
    get an exact permutation p-value, larger ones the chi-square reference.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise InputError(f"expected a cases x methods matrix, got shape {scores.shape}")
    n, k = scores.shape
    if n < 2 or k < 2:
        raise InputError(f"need at least 2 cases and 2 methods, got {n}x{k}")
    if not np.isfinite(scores).all():
        raise InputError("scores contain non-finite values")

    ranks = np.apply_along_axis(rankdata, 1, scores)
    stat = _friedman_statistic(ranks)
    if stat == 0.0:
        return FriedmanResult(0.0, 1.0, "degenerate")
    if n <= FRIEDMAN_EXACT_MAX_N and k <= FRIEDMAN_EXACT_MAX_K:
        return FriedmanResult(stat, _friedman_exact_p(ranks, stat), "exact")
    return FriedmanResult(stat, float(chi2.sf(stat, k - 1)), "chi-square")


@dataclass
class WilcoxonResult:
    statistic: float  # W+, the positive-rank sum
    p_value: float
    method: str  # "exact", "normal", or "degenerate"


def wilcoxon_signed_rank(x, y) -> WilcoxonResult:
    """Two-sided paired signed-rank test.

    Zero differences are handled by the Pratt method (ranked, then dropped);
    the exact null distribution is used for n <= 15 when there are no zeros
    and no tied magnitudes, otherwise a tie-corrected normal approximation.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError(f"need equal-length 1D samples, got {x.shape} and {y.shape}")
    if x.size < 1:
        raise InputError("empty samples")
    d = x - y
    if np.all(d == 0):
        return WilcoxonResult(0.0, 1.0, "degenerate")

    absd = np.abs(d)
    ranks = rankdata(absd)
    w_plus = float(ranks[d > 0].sum())
    n = d.size
    n_zero = int((d == 0).sum())

    nonzero_abs = absd[d != 0]
    unique, tie_counts = np.unique(nonzero_abs, return_counts=True)
    has_ties = bool((tie_counts > 1).any())

    if n_zero == 0 and not has_ties and n <= 15:
        return WilcoxonResult(w_plus, _wilcoxon_exact_p(int(round(w_plus)), n), "exact")

    mean = (n * (n + 1) - n_zero * (n_zero + 1)) / 4.0
    var = (n * (n + 1) * (2 * n + 1) - n_zero * (n_zero + 1) * (2 * n_zero + 1)) / 24.0
    var -= float((tie_counts ** 3 - tie_counts).sum()) / 48.0
    if var <= 0:
        return WilcoxonResult(w_plus, 1.0, "degenerate")
    z = (w_plus - mean) / math.sqrt(var)
    return WilcoxonResult(w_plus, min(1.0, 2.0 * float(norm.sf(abs(z)))), "normal")


def _wilcoxon_exact_p(w: int, n: int) -> float:
    """Exact two-sided p for W+ given distinct ranks 1..n (dynamic program)."""
    max_sum = n * (n + 1) // 2
    counts = np.zeros(max_sum + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in range(1, n + 1):
        counts[r:] += counts[:-r].copy()
    total = counts.sum()
    lower = counts[: w + 1].sum() / total
    upper = counts[w:].sum() / total
    return min(1.0, 2.0 * min(lower, upper))


def holm_adjust(p_values) -> np.ndarray:
    """Step-down Holm adjustment; monotone and capped at 1, original order kept."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InputError("need a non-empty 1D array of p-values")
    if ((p < 0) | (p > 1)).any():
        raise InputError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (m - rank) * p[idx])
        adjusted[idx] = min(1.0, running)
    return adjusted


def pairwise_wilcoxon_holm(scores, method_names=None):
    """All pairwise signed-rank tests across columns, Holm-adjusted.

    Returns a list of (pair, raw_p, adjusted_p) with pair = (name_i, name_j).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] < 2:
        raise InputError("need a cases x methods matrix with at least 2 methods")
    k = scores.shape[1]
    names = list(method_names) if method_names is not None else list(range(k))
    if len(names) != k:
        raise InputError(f"got {len(names)} names for {k} methods")
    pairs = list(itertools.combinations(range(k), 2))
    raw = [wilcoxon_signed_rank(scores[:, i], scores[:, j]).p_value for i, j in pairs]
    adj = holm_adjust(raw)
    return [((names[i], names[j]), float(r), float(a))
            for (i, j), r, a in zip(pairs, raw, adj)]


def mcnemar_exact(b: int, c: int) -> float:
    """Two-sided McNemar p from discordant-pair counts.

    Exact binomial for b + c < 25, chi-square with continuity correction
    otherwise; b = c = 0 gives 1.
    """
    if b < 0 or c < 0 or int(b) != b or int(c) != c:
        raise InputError(f"discordant counts must be nonnegative integers, got ({b}, {c})")
    b, c = int(b), int(c)
    n = b + c
    if n == 0:
        return 1.0
    if n < 25:
        tail = sum(math.comb(n, k) for k in range(min(b, c) + 1))
        return float(min(Fraction(1), 2 * Fraction(tail, 2 ** n)))
    stat = (max(abs(b - c) - 1, 0)) ** 2 / n
    return float(chi2.sf(stat, 1))
