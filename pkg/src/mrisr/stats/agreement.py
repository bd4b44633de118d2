"""Chance-corrected agreement coefficients: multi-rater weighted AC2 and Cohen's kappa.

AC2 follows Gwet's weighted agreement coefficient with his variance
estimator (t-based confidence bounds, finite-population factor omitted).
Kappa confidence intervals use the large-sample variance of the weighted
statistic (Fleiss/Cohen/Everitt form), which reduces to the familiar
unweighted variance under identity weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, t

from ..errors import InputError


def category_weights(q: int, kind: str) -> np.ndarray:
    """q x q agreement weights: identity, linear, or quadratic on category order."""
    if q < 1:
        raise InputError("need at least one category")
    if kind == "identity":
        return np.eye(q)
    scores = np.arange(q, dtype=np.float64)
    diff = np.abs(scores[:, None] - scores[None, :])
    if q == 1:
        return np.ones((1, 1))
    if kind == "linear":
        return 1.0 - diff / (q - 1)
    if kind == "quadratic":
        return 1.0 - (diff / (q - 1)) ** 2
    raise InputError(f"unknown weight kind {kind!r}; use identity, linear, or quadratic")


def _resolve_weights(weights, q: int) -> np.ndarray:
    if isinstance(weights, str):
        return category_weights(q, weights)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (q, q):
        raise InputError(f"weight matrix must be {q}x{q}, got {w.shape}")
    return w


def _counts_matrix(ratings, categories):
    """(n_subjects, n_raters) labels -> (n x q counts, category list)."""
    rows = [list(r) for r in ratings]
    if not rows:
        raise InputError("ratings table is empty")
    observed = [v for row in rows for v in row if v is not None and v == v]
    if not observed:
        raise InputError("ratings table has no usable values")
    if categories is None:
        categories = sorted(set(observed))
    index = {c: i for i, c in enumerate(categories)}
    counts = np.zeros((len(rows), len(categories)))
    for i, row in enumerate(rows):
        for v in row:
            if v is None or v != v:
                continue
            if v not in index:
                raise InputError(f"value {v!r} not in declared categories {categories}")
            counts[i, index[v]] += 1
    return counts, list(categories)


@dataclass
class AgreementResult:
    coefficient: float
    ci: tuple
    std_err: float
    observed_agreement: float
    chance_agreement: float
    degenerate: bool = False


def gwet_ac2(ratings, categories=None, weights: str | np.ndarray = "quadratic",
             conf_level: float = 0.95) -> AgreementResult:
    """Weighted multi-rater agreement coefficient (p_a - p_e) / (1 - p_e).

    `ratings` is (n_subjects, n_raters) of category labels; missing entries
    may be None/NaN. Category order is taken from `categories` when given,
    otherwise from sorted unique values. Identity weights recover the
    unweighted coefficient.
    """
    counts, cats = _counts_matrix(ratings, categories)
    n, q = counts.shape
    if n < 2:
        raise InputError(f"need at least 2 subjects, got {n}")
    r_i = counts.sum(axis=1)
    if (r_i >= 2).sum() == 0:
        raise InputError("need at least one subject rated by 2+ raters")
    if r_i.max() < 2:
        raise InputError("need at least 2 raters")

    if q == 1:
        return AgreementResult(1.0, (1.0, 1.0), 0.0, 1.0, 0.0, degenerate=True)

    w = _resolve_weights(weights, q)

    weighted_counts = counts @ w.T          # r*_ik = sum_l w_kl r_il
    multi = r_i >= 2
    n_multi = int(multi.sum())
    denom = np.where(multi, r_i * (r_i - 1.0), 1.0)
    per_subject = (counts * (weighted_counts - 1.0)).sum(axis=1) / denom
    per_subject = np.where(multi, per_subject, 0.0)
    p_a = per_subject[multi].mean()

    prevalence = (counts / np.maximum(r_i, 1)[:, None]).mean(axis=0)  # pi_k
    p_e = w.sum() * (prevalence * (1.0 - prevalence)).sum() / (q * (q - 1.0))
    coef = (p_a - p_e) / (1.0 - p_e)

    # Gwet's variance estimator over subject-level components.
    pa_i = per_subject  # zero where r_i < 2
    coef_i = (n / n_multi) * (pa_i - p_e * multi) / (1.0 - p_e)
    pe_i = (w.sum() / (q * (q - 1.0))) * (counts @ (1.0 - prevalence)) / np.maximum(r_i, 1)
    coef_i_star = coef_i - 2.0 * (1.0 - coef) * (pe_i - p_e) / (1.0 - p_e)
    if n > 1:
        var = ((coef_i_star - coef) ** 2).sum() / (n * (n - 1.0))
    else:
        var = 0.0
    se = float(np.sqrt(max(var, 0.0)))

    degenerate = se == 0.0
    if degenerate:
        ci = (coef, coef)
    else:
        margin = t.ppf(1.0 - (1.0 - conf_level) / 2.0, n - 1) * se
        ci = (max(-1.0, coef - margin), min(1.0, coef + margin))
    return AgreementResult(float(coef), ci, se, float(p_a), float(p_e), degenerate)


@dataclass
class KappaResult:
    kappa: float
    ci: tuple
    std_err: float
    observed_agreement: float
    chance_agreement: float
    degenerate: bool = False


def cohen_kappa(a, b, categories=None, weighting: str = "identity",
                conf_level: float = 0.95) -> KappaResult:
    """Two-method chance-corrected agreement with optional linear/quadratic weights.

    Degenerate single-category marginals (chance agreement of 1) give a
    flagged result with NaN kappa.
    """
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        raise InputError(f"gradings differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise InputError("no gradings given")
    if categories is None:
        categories = sorted(set(a) | set(b))
    index = {c: i for i, c in enumerate(categories)}
    q = len(categories)
    n = len(a)
    table = np.zeros((q, q))
    for va, vb in zip(a, b):
        if va not in index or vb not in index:
            raise InputError(f"value pair ({va!r}, {vb!r}) outside categories {categories}")
        table[index[va], index[vb]] += 1
    p = table / n
    w = _resolve_weights(weighting, q)

    row = p.sum(axis=1)
    col = p.sum(axis=0)
    p_o = float((w * p).sum())
    p_e = float((w * np.outer(row, col)).sum())
    if abs(1.0 - p_e) < 1e-12:
        return KappaResult(float("nan"), (float("nan"), float("nan")), float("nan"),
                           p_o, p_e, degenerate=True)
    kappa = (p_o - p_e) / (1.0 - p_e)

    # Large-sample variance of the weighted statistic.
    wbar_row = w @ col          # sum_j col_j w_ij
    wbar_col = row @ w          # sum_i row_i w_ij
    mix = wbar_row[:, None] + wbar_col[None, :]
    term = (p * (w - mix * (1.0 - kappa)) ** 2).sum()
    var = (term - (kappa - p_e * (1.0 - kappa)) ** 2) / (n * (1.0 - p_e) ** 2)
    se = float(np.sqrt(max(var, 0.0)))
    z = norm.ppf(1.0 - (1.0 - conf_level) / 2.0)
    ci = (max(-1.0, kappa - z * se), min(1.0, kappa + z * se))
    return KappaResult(float(kappa), ci, se, p_o, p_e, degenerate=False)
