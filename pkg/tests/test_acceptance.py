"""Acceptance suite: eight exit criteria, one test each, one PASS line each.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion
lines. The training smoke test is the slow one (several minutes on a
desktop CPU); everything else finishes in seconds to a couple of minutes.
"""

import itertools
import math

import numpy as np
import pytest
import torch
from scipy.stats import rankdata

from mrisr import (
    DegradationConfig,
    Image2D,
    ImagePair,
    PairedDataset,
    SplitPolicy,
    TrainConfig,
    add_rician_noise,
    default_knee_spec,
    kspace_truncate,
    make_paired_dataset,
    split_dataset,
    train,
)
from mrisr.network.blocks import HAB, OCAB, RHAG, WindowAttention
from mrisr.network.config import toy_config
from mrisr.network.model import build_model
from mrisr.stats import (
    DiagnosticCounts,
    cohen_kappa,
    friedman_test,
    gwet_ac2,
    holm_adjust,
    mcnemar_exact,
    performance_from_counts,
    roc_auc,
    wilcoxon_signed_rank,
)
from mrisr.stats.diagnostic import percent_display
from mrisr.training import evaluate_pairs, gradient_check


def report(criterion: int, text: str):
    print(f"\nACCEPTANCE {criterion}: PASS - {text}")


# -----------------------------------------------------------------------
# 1. Published diagnostic-performance table reproduced at printed rounding
# -----------------------------------------------------------------------

def test_criterion_1_diagnostic_table_reproduction():
    published = {
        "LR": dict(tp=8, tn=46, sens=62, spec=98, sens_ci=(36, 82), spec_ci=(89, 99)),
        "SR": dict(tp=9, tn=46, sens=69, spec=98, sens_ci=(42, 87), spec_ci=(89, 99)),
        "HR": dict(tp=9, tn=45, sens=69, spec=96, sens_ci=(42, 87), spec_ci=(86, 99)),
    }
    for method, row in published.items():
        counts = DiagnosticCounts(
            tp=row["tp"], tn=row["tn"], fp=47 - row["tn"], fn=13 - row["tp"],
            ref_pos=13, ref_neg=47,
        )
        perf = performance_from_counts(counts)
        assert percent_display(perf.sensitivity) == row["sens"], method
        assert percent_display(perf.specificity) == row["spec"], method
        assert tuple(percent_display(v) for v in perf.sensitivity_ci) == row["sens_ci"], method
        assert tuple(percent_display(v) for v in perf.specificity_ci) == row["spec_ci"], method
    report(1, "count rows give sensitivity 62/69/69, specificity 98/98/96, "
              "CIs [36,82]/[42,87]/[42,87] and [89,99]/[89,99]/[86,99]")


# -----------------------------------------------------------------------
# 2. McNemar degenerate and exact-binomial hand values
# -----------------------------------------------------------------------

def test_criterion_2_mcnemar_exact_values():
    assert mcnemar_exact(0, 0) == 1.0
    assert abs(mcnemar_exact(1, 0) - 1.0) <= 1e-12
    assert abs(mcnemar_exact(8, 1) - 20 / 512) <= 1e-12
    report(2, "b=c=0 -> p=1; p(1,0)=1 and p(8,1)=20/512 exact to 1e-12")


# -----------------------------------------------------------------------
# 3. Statistics oracle suite on randomized small tables
# -----------------------------------------------------------------------

def _ac2_oracle(matrix, categories, kind):
    q = len(categories)
    idx = {c: i for i, c in enumerate(categories)}
    w = np.zeros((q, q))
    for i in range(q):
        for j in range(q):
            if kind == "identity":
                w[i, j] = 1.0 if i == j else 0.0
            elif kind == "linear":
                w[i, j] = 1.0 - abs(i - j) / (q - 1)
            else:
                w[i, j] = 1.0 - (i - j) ** 2 / (q - 1) ** 2
    pa_terms = []
    pi = np.zeros(q)
    for row in matrix:
        r = len(row)
        for v in row:
            pi[idx[v]] += 1.0 / r
        acc = 0.0
        for g in range(r):
            for h in range(r):
                if g != h:
                    acc += w[idx[row[g]], idx[row[h]]]
        pa_terms.append(acc / (r * (r - 1)))
    pi /= len(matrix)
    p_a = float(np.mean(pa_terms))
    p_e = w.sum() / (q * (q - 1)) * float((pi * (1 - pi)).sum())
    return (p_a - p_e) / (1 - p_e)


def _kappa_oracle(a, b, categories, kind):
    q = len(categories)
    idx = {c: i for i, c in enumerate(categories)}
    w = np.zeros((q, q))
    for i in range(q):
        for j in range(q):
            if kind == "identity":
                w[i, j] = 1.0 if i == j else 0.0
            elif kind == "linear":
                w[i, j] = 1.0 - abs(i - j) / (q - 1)
            else:
                w[i, j] = 1.0 - (i - j) ** 2 / (q - 1) ** 2
    n = len(a)
    p_o = sum(w[idx[x], idx[y]] for x, y in zip(a, b)) / n
    p_e = 0.0
    for i in range(q):
        for j in range(q):
            p_e += w[i, j] * (sum(x == categories[i] for x in a) / n) * (
                sum(y == categories[j] for y in b) / n)
    return (p_o - p_e) / (1 - p_e)


def _friedman_perm_oracle(table):
    table = np.asarray(table, float)
    n, k = table.shape
    ranks = np.array([rankdata(r) for r in table])
    colsum = ranks.sum(axis=0)
    a = (ranks ** 2).sum()
    c = n * k * (k + 1) ** 2 / 4.0
    spread = ((colsum - n * (k + 1) / 2.0) ** 2).sum()
    observed = 0.0 if a == c else (k - 1) * spread / (a - c)
    perms = list(itertools.permutations(range(k)))
    variants = [np.array([[rr[p[j]] for j in range(k)] for p in perms]) for rr in ranks]
    sums = np.zeros((1, k))
    for v in variants:
        sums = (sums[:, None, :] + v[None, :, :]).reshape(-1, k)
    spread_all = ((sums - n * (k + 1) / 2.0) ** 2).sum(axis=1)
    stats = np.zeros_like(spread_all) if a == c else (k - 1) * spread_all / (a - c)
    return observed, float((stats >= observed - 1e-9).mean())


def _wilcoxon_oracle(x, y):
    d = np.asarray(x, float) - np.asarray(y, float)
    ranks = rankdata(np.abs(d))
    w_obs = ranks[d > 0].sum()
    nz = np.flatnonzero(d != 0)
    ge = le = total = 0
    for signs in itertools.product((0, 1), repeat=len(nz)):
        w = sum(ranks[i] for i, s in zip(nz, signs) if s)
        total += 1
        ge += w >= w_obs - 1e-12
        le += w <= w_obs + 1e-12
    return min(1.0, 2.0 * min(ge / total, le / total))


def _auc_oracle(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    acc = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return acc / (len(pos) * len(neg))


def test_criterion_3_statistics_oracle_suite():
    rng = np.random.default_rng(2024)
    cats5 = ["1", "2", "3", "4", "5"]

    n_ac2 = n_kappa = n_auc = n_fried = n_wilc = 0
    while min(n_ac2, n_kappa, n_auc, n_fried, n_wilc) < 20:
        n = int(rng.integers(4, 9))

        matrix = [[cats5[i] for i in rng.integers(0, 5, size=3)] for _ in range(n)]
        kind = ("identity", "linear", "quadratic")[n_ac2 % 3]
        got = gwet_ac2(matrix, categories=cats5, weights=kind).coefficient
        assert abs(got - _ac2_oracle(matrix, cats5, kind)) <= 1e-10
        n_ac2 += 1

        a = [cats5[i] for i in rng.integers(0, 5, size=8)]
        b = [cats5[i] for i in rng.integers(0, 5, size=8)]
        res = cohen_kappa(a, b, categories=cats5, weighting=kind)
        if not res.degenerate:
            assert abs(res.kappa - _kappa_oracle(a, b, cats5, kind)) <= 1e-10
            n_kappa += 1

        scores = rng.integers(0, 5, size=8).astype(float)
        labels = rng.integers(0, 2, size=8).astype(bool)
        if labels.any() and not labels.all():
            got_auc = roc_auc(scores, labels, bootstrap_n=0).auc
            assert abs(got_auc - _auc_oracle(scores, labels)) <= 1e-10
            n_auc += 1

        table = rng.integers(1, 6, size=(n, 3)).astype(float)
        got_f = friedman_test(table)
        obs_stat, oracle_p = _friedman_perm_oracle(table)
        assert abs(got_f.statistic - obs_stat) <= 1e-9
        assert abs(got_f.p_value - oracle_p) <= 0.02
        n_fried += 1

        x = rng.normal(size=7)
        y = rng.normal(size=7)
        got_w = wilcoxon_signed_rank(x, y)
        assert abs(got_w.p_value - _wilcoxon_oracle(x, y)) <= 1e-12
        n_wilc += 1

    adj = holm_adjust([0.01, 0.04, 0.03])
    assert np.allclose(adj, [0.03, 0.06, 0.06], atol=1e-15)
    report(3, f"AC2/kappa/AUC within 1e-10, Friedman within 0.02 of exhaustive "
              f"permutation, Wilcoxon exact, Holm step-down exact "
              f"({n_ac2}/{n_kappa}/{n_auc}/{n_fried}/{n_wilc} tables)")


# -----------------------------------------------------------------------
# 4. Network structural invariants
# -----------------------------------------------------------------------

def test_criterion_4_network_invariants():
    def zero(module):
        with torch.no_grad():
            for p in module.parameters():
                p.zero_()

    hab = HAB(dim=8, window_size=4, num_heads=2, shifted=True, mlp_ratio=2.0,
              cbam_weight=0.01, cbam_reduction=4, cbam_spatial_kernel=7)
    zero(hab)
    x = torch.randn(1, 64, 8)
    assert torch.equal(hab(x, 8, 8), x)

    ocab = OCAB(dim=8, window_size=4, overlap=0.5, num_heads=2, mlp_ratio=2.0)
    zero(ocab)
    assert torch.equal(ocab(x, 8, 8), x)

    rhag = RHAG(dim=8, depth=2, window_size=4, num_heads=2, mlp_ratio=2.0,
                cbam_weight=0.01, cbam_reduction=4, cbam_spatial_kernel=7,
                ocab_overlap=0.5)
    zero(rhag)
    xs = torch.randn(1, 8, 8, 8)
    assert torch.equal(rhag(xs), xs)

    model = build_model(toy_config(), seed=0)
    zero(model)
    f0 = torch.randn(1, 8, 16, 16)
    f_df = model.deep_extract(f0)
    assert torch.equal(f_df, torch.zeros_like(f_df))
    assert torch.equal(f0 + f_df, f0)

    attn = WindowAttention(dim=16, window_size=4, num_heads=2)
    _, probs = attn(torch.randn(8, 16, 16), return_attn=True)
    assert (probs.sum(dim=-1) - 1.0).abs().max() < 1e-6

    model = build_model(toy_config(), seed=1)
    for h, w in [(48, 48), (96, 96), (192, 192), (48, 96), (192, 48)]:
        out = model.forward_tensor(torch.rand(1, 1, h, w))
        assert out.shape == (1, 1, 2 * h, 2 * w), (h, w)

    report(4, "zero-weight passthrough bit-exact (HAB/OCAB/RHAG/global residual), "
              "attention rows sum to 1, forward maps HxW -> 2Hx2W for 48/96/192")


# -----------------------------------------------------------------------
# 5. Gradient check on the toy configuration, full parameter coverage
# -----------------------------------------------------------------------

def test_criterion_5_gradient_check():
    rep = gradient_check(toy_config(), input_size=(16, 16), seed=0)
    assert rep.passed, rep.to_text()
    report(5, f"analytic vs central-difference max relative error "
              f"{rep.max_rel_err:.2e} <= 1e-4 over {len(rep.entries)} parameter tensors")


# -----------------------------------------------------------------------
# 6. Training smoke test: overfit 4 phantom pairs, beat bicubic held-out
# -----------------------------------------------------------------------

def test_criterion_6_training_smoke():
    degrade = DegradationConfig(truncation_factor=2, noise_sigma=0.01)
    train_ds = make_paired_dataset(4, default_knee_spec(size=96), degrade, seed=11)
    held_out = make_paired_dataset(4, default_knee_spec(size=96), degrade, seed=99)

    model_cfg = toy_config(feat_channels=16, num_rhag=1, habs_per_rhag=2,
                           window_size=8, num_heads=2, cbam_reduction=8)
    train_cfg = TrainConfig(steps=2000, batch_size=8, patch_size=32,
                            base_lr=1e-3, seed=0, log_every=10)
    model, rep = train(train_ds, model_cfg, train_cfg)

    curve = dict(rep.loss_curve)
    step10, final = curve[10], rep.loss_curve[-1][1]
    assert final <= step10 / 100.0, (step10, final)

    records = evaluate_pairs(model, held_out.pairs)
    gain = float(np.mean([r.psnr_sr - r.psnr_bicubic for r in records]))
    assert gain >= 1.0, [f"{r.case_id}: {r.psnr_sr:.2f} vs {r.psnr_bicubic:.2f}" for r in records]
    report(6, f"overfit MSE {step10:.2e} -> {final:.2e} ({step10 / final:.0f}x); "
              f"held-out PSNR gain over bicubic {gain:+.2f} dB")


# -----------------------------------------------------------------------
# 7. Degradation physics
# -----------------------------------------------------------------------

def _dirichlet_oracle(signal, m):
    n = len(signal)
    kernel = np.array([
        sum(np.exp(2j * np.pi * f * j / n) for f in range(-m // 2, m // 2)) / n
        for j in range(n)
    ])
    out = np.array([sum(signal[j] * kernel[(x - j) % n] for j in range(n)) for x in range(n)])
    return np.abs(out)


def test_criterion_7_degradation_physics():
    const = Image2D(np.full((64, 64), 0.42))
    for factor in (2, 4):
        for keep in (False, True):
            out = kspace_truncate(const, DegradationConfig(factor, 0.0, keep))
            assert np.abs(out.data - 0.42).max() < 1e-12

    n = 96
    ys, xs = np.mgrid[0:n, 0:n]
    sine = 0.5 + 0.3 * np.cos(2 * np.pi * 7 * xs / n) * np.cos(2 * np.pi * 2 * ys / n)
    out = kspace_truncate(Image2D(sine), DegradationConfig(2, 0.0, keep_grid=True))
    assert np.abs(out.data - sine).max() < 1e-10

    n = 128
    col = np.where((np.arange(n) >= n // 4) & (np.arange(n) < 3 * n // 4), 0.75, 0.25)
    img = Image2D(np.tile(col, (n, 1)).astype(np.float64))
    out = kspace_truncate(img, DegradationConfig(2, 0.0, keep_grid=True))
    oracle = _dirichlet_oracle(col.astype(float), n // 2)
    assert out.data.max() - 0.75 > 0
    assert np.abs(out.data[0] - oracle).max() < 1e-8

    sigma = 0.1
    noisy = add_rician_noise(Image2D(np.zeros((400, 256))), sigma, seed=13)
    expected = sigma * math.sqrt(math.pi / 2.0)
    se = sigma * math.sqrt((4.0 - math.pi) / 2.0) / math.sqrt(noisy.data.size)
    assert abs(noisy.data.mean() - expected) < 3 * se

    report(7, "constant fixed point, in-band sinusoid to 1e-10, Gibbs overshoot "
              "matches the Dirichlet-kernel oracle to 1e-8, Rician mean within 3 SE")


# -----------------------------------------------------------------------
# 8. Split policy over 100 seeds
# -----------------------------------------------------------------------

def _split_roster():
    rng = np.random.default_rng(0)
    pairs = []
    case = 0
    for s in range(12):
        for side in ("L", "R"):
            pairs.append(ImagePair(
                lr=Image2D(rng.uniform(0, 1, (8, 8)).astype(np.float32)),
                hr=Image2D(rng.uniform(0, 1, (16, 16)).astype(np.float32)),
                subject_id=f"dual{s:02d}", knee_side=side, case_id=f"case{case:03d}"))
            case += 1
    for s in range(30):
        pairs.append(ImagePair(
            lr=Image2D(rng.uniform(0, 1, (8, 8)).astype(np.float32)),
            hr=Image2D(rng.uniform(0, 1, (16, 16)).astype(np.float32)),
            subject_id=f"solo{s:02d}", surgical=s >= 20, case_id=f"case{case:03d}"))
        case += 1
    return PairedDataset(pairs=pairs, upscale=2)


def test_criterion_8_split_policy():
    roster = _split_roster()
    assert len(roster.pairs) == 54
    assert sum(p.surgical for p in roster.pairs) == 10
    for seed in range(100):
        split = split_dataset(roster, SplitPolicy(train_count=24, test_count=30, seed=seed))
        labels = split.split_labels
        assert labels.count("train") == 24 and labels.count("test") == 30
        train_subj = {p.subject_id for p, s in zip(split.pairs, labels) if s == "train"}
        test_subj = {p.subject_id for p, s in zip(split.pairs, labels) if s == "test"}
        assert not train_subj & test_subj
        assert all(s == "test" for p, s in zip(split.pairs, labels) if p.surgical)
    report(8, "100 seeds: 24/30 split, surgical pairs always in test, subject-disjoint")
