"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected in ``conftest.ACCEPTANCE_LINES`` and echoed in
the pytest terminal summary.
"""

import json
import math
import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as sps
from scipy.stats import norm

from multirater_gp.cli import main as cli_main
from multirater_gp.data import SyntheticSpec, generate_synthetic
from multirater_gp.dataset import Dataset, summarize_ratings
from multirater_gp.linalg import Hyperparameters
from multirater_gp.metrics import (
    discretize_predictive,
    evaluate,
    kl_divergence,
    reference_distribution,
)
from multirater_gp.models import VARIANTS, fit, log_g, log_marginal, predict
from multirater_gp.optimize import OptimizerConfig
from multirater_gp.pipeline import train_model
from multirater_gp.stats import paired_t_test, steiger_z1

from .conftest import ACCEPTANCE_LINES, random_instance
from .test_stats import STEIGER_CONFIGS, mc_steiger_p


@contextmanager
def criterion(number, title):
    notes = []
    ok = False
    try:
        yield notes
        ok = True
    finally:
        detail = f" ({'; '.join(notes)})" if notes else ""
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}{detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)


def rel_err(a, b):
    return abs(a - b) / max(1.0, abs(b))


def test_joint_repeat_equivalence():
    with criterion(1, "joint and repeat likelihoods and predictions coincide") as notes:
        rng = np.random.default_rng(1)
        t0 = time.perf_counter()
        worst_ll = worst_pred = 0.0
        for _ in range(200):
            ds, hp = random_instance(rng, n_max=12, r_choices=(1, 2, 3, 5), d_max=3)
            lj = log_marginal(ds, "joint", hp)[0]
            lr = log_marginal(ds, "repeat", hp)[0]
            worst_ll = max(worst_ll, rel_err(lj, lr))
            Xt = rng.normal(size=(5, ds.dim))
            pj = predict(fit(ds, "joint", hp), Xt, raw=False)
            pr = predict(fit(ds, "repeat", hp), Xt, raw=False)
            worst_pred = max(worst_pred, np.max(np.abs(pj.mean - pr.mean)),
                             np.max(np.abs(pj.var - pr.var)))
        elapsed = time.perf_counter() - t0
        notes += [f"max rel loglik diff {worst_ll:.2e}", f"max pred diff {worst_pred:.2e}",
                  f"{elapsed:.1f}s"]
        assert worst_ll <= 1e-8
        assert worst_pred <= 1e-8
        assert elapsed < 60


def test_single_rater_reduction():
    with criterion(2, "single-rater joint model equals the base model") as notes:
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(50):
            ds, hp = random_instance(rng, r_choices=(1,))
            fj, gj = log_marginal(ds, "joint", hp, with_grad=True)
            fb, gb = log_marginal(ds, "base", hp, with_grad=True)
            Xt = rng.normal(size=(4, ds.dim))
            pj = predict(fit(ds, "joint", hp), Xt, raw=False)
            pb = predict(fit(ds, "base", hp), Xt, raw=False)
            worst = max(worst, abs(fj - fb), np.max(np.abs(gj - gb)),
                        np.max(np.abs(pj.mean - pb.mean)), np.max(np.abs(pj.var - pb.var)))
        notes.append(f"max abs diff {worst:.2e}")
        assert worst <= 1e-10


def test_gaussian_product_identity():
    with criterion(3, "product of rating likelihoods factorizes through the row mean") as notes:
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(100):
            N, R = int(rng.integers(1, 6)), int(rng.integers(1, 7))
            f = rng.normal(scale=2.0, size=N)
            sigma = float(np.exp(rng.uniform(-1.5, 1.5)))
            Y = f[:, None] + sigma * rng.normal(size=(N, R))
            lhs = float(np.sum(norm.logpdf(Y, loc=f[:, None], scale=sigma)))
            summary = summarize_ratings(Dataset(np.zeros((N, 1)), Y, -1e3, 1e3))
            hp = Hyperparameters.from_natural(1.0, 1.0, sigma)
            rhs = float(np.sum(norm.logpdf(summary.mu_bar, f, sigma / math.sqrt(R))))
            rhs += log_g(summary, hp)
            worst = max(worst, abs(lhs - rhs))
        notes.append(f"max abs diff {worst:.2e}")
        assert worst <= 1e-10


def test_gradients_match_finite_differences():
    with criterion(4, "analytic gradients match central differences") as notes:
        rng = np.random.default_rng(4)
        h = 1e-5
        for variant in VARIANTS:
            worst = 0.0
            for _ in range(50):
                ds, hp = random_instance(rng)
                _, g = log_marginal(ds, variant, hp, with_grad=True)
                theta = hp.as_array()
                fd = np.empty(3)
                for k in range(3):
                    e = np.zeros(3)
                    e[k] = h
                    up = log_marginal(ds, variant, Hyperparameters.from_array(theta + e))[0]
                    dn = log_marginal(ds, variant, Hyperparameters.from_array(theta - e))[0]
                    fd[k] = (up - dn) / (2 * h)
                worst = max(worst, np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(fd))))
            notes.append(f"{variant} {worst:.1e}")
            assert worst <= 1e-5


@pytest.mark.slow
def test_noise_recovery():
    with criterion(5, "training recovers the rater noise") as notes:
        t0 = time.perf_counter()
        joint_ratio, base_ratio = [], []
        for seed in range(10):
            spec = SyntheticSpec(n_train=300, n_test=1, raters=5, sigma=0.8, rounded=False, seed=seed)
            train, _, _ = generate_synthetic(spec)
            _, rj, _ = train_model(train, "joint", OptimizerConfig(seed=seed))
            _, rb, _ = train_model(train, "base", OptimizerConfig(seed=seed))
            joint_ratio.append(rj.final_hp.sigma / 0.8)
            base_ratio.append(rb.final_hp.sigma / (0.8 / math.sqrt(5)))
        mj, mb = float(np.median(joint_ratio)), float(np.median(base_ratio))
        elapsed = time.perf_counter() - t0
        notes += [f"median joint sigma/true {mj:.3f}", f"median base sigma/(true/sqrt5) {mb:.3f}",
                  f"{elapsed:.0f}s"]
        assert abs(mj - 1) <= 0.15
        assert abs(mb - 1) <= 0.15
        assert elapsed < 600


@pytest.mark.slow
def test_joint_lowers_kl():
    with criterion(6, "joint training lowers test KL relative to the base model") as notes:
        kl_j, kl_b, wins = [], [], 0
        for seed in range(10):
            train, test, _ = generate_synthetic(SyntheticSpec(raters=5, seed=100 + seed))
            rng = (test.score_min, test.score_max)
            reports = {}
            for variant in ("joint", "base"):
                model, _, _ = train_model(train, variant, OptimizerConfig(seed=seed))
                reports[variant] = evaluate(predict(model, test.features), test.ratings, rng)
            wins += reports["joint"].kl <= reports["base"].kl
            kl_j.append(reports["joint"].per_item_kl)
            kl_b.append(reports["base"].per_item_kl)
        kl_j, kl_b = np.concatenate(kl_j), np.concatenate(kl_b)
        res = paired_t_test(kl_j, kl_b)
        notes += [f"joint wins {wins}/10", f"mean KL {kl_j.mean():.3f} vs {kl_b.mean():.3f}",
                  f"p {res.p_value:.1e}"]
        assert wins >= 8
        assert kl_j.mean() < kl_b.mean()
        assert res.p_value < 0.05


def test_cost_gap(tmp_path):
    with criterion(7, "repeat inference costs far more than joint inference") as notes:
        out = tmp_path / "bench.json"
        code = cli_main(["bench", "--grid-n", "200", "--grid-r", "1,5", "--repeats", "10",
                         "--threads", "1", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        cells = {c["r"]: c for c in doc["cells"]}
        ratio = cells[5]["ratio_repeat_joint"]
        tj = [cells[r]["variants"]["joint"]["wall_time_s"]["mean"] for r in (1, 5)]
        spread = max(tj) / min(tj)
        notes += [f"repeat/joint at R=5 {ratio:.1f}x", f"joint R=1 vs R=5 {spread:.2f}x",
                  f"threads {doc['threads']}"]
        assert doc["threads"] == 1
        assert ratio > 5
        assert spread < 2


def test_metrics_suite():
    with criterion(8, "discretization, KL and reference distributions behave") as notes:
        rng = np.random.default_rng(8)
        score_range = (0, 10)
        worst_norm, min_kl = 0.0, np.inf
        for _ in range(2000):
            mean = rng.uniform(-10, 20)
            var = float(np.exp(rng.uniform(-12, 5)))
            hyp = discretize_predictive(mean, var, score_range)
            worst_norm = max(worst_norm, abs(hyp.probs.sum() - 1.0))
            assert np.all(hyp.probs >= 0)
            ratings = rng.integers(0, 11, size=int(rng.integers(1, 9)))
            ref = reference_distribution(ratings, score_range)
            worst_norm = max(worst_norm, abs(ref.probs.sum() - 1.0))
            min_kl = min(min_kl, kl_divergence(ref, hyp), kl_divergence(hyp, hyp))
        centre = discretize_predictive(5.0, 1.0, score_range)[5]
        expected = norm.cdf(0.5) - norm.cdf(-0.5)
        ref = reference_distribution([8, 8, 9, 9, 10], score_range)
        target = np.zeros(11)
        target[8:] = [0.4, 0.4, 0.2]
        notes += [f"max norm err {worst_norm:.1e}", f"min KL {min_kl:.1e}",
                  f"centre bin err {abs(centre - expected):.1e}"]
        assert worst_norm <= 1e-10
        assert min_kl >= 0.0
        assert abs(centre - expected) <= 1e-6
        assert np.array_equal(ref.probs, target)


def _null_rejection_rates(reps=10_000, alpha=0.05, seed=9):
    """Share of null simulations rejected at ``alpha`` by each test."""
    rng = np.random.default_rng(seed)
    t_hits = 0
    for _ in range(reps):
        m = int(rng.integers(5, 40))
        shared = rng.normal(size=m)
        a, b = shared + rng.normal(size=(2, m))  # correlated pairs, equal means
        t_hits += paired_t_test(a, b).p_value < alpha

    # both systems correlate 0.5 with the reference and 0.6 with each other
    n, rbar, r12 = 80, 0.5, 0.6
    C = np.array([[1.0, r12, rbar], [r12, 1.0, rbar], [rbar, rbar, 1.0]])
    Z = rng.standard_normal((reps, n, 3)) @ np.linalg.cholesky(C).T
    Z -= Z.mean(axis=1, keepdims=True)
    S = np.einsum("kni,knj->kij", Z, Z)
    d = np.sqrt(np.einsum("kii->ki", S))
    R = S / (d[:, :, None] * d[:, None, :])
    z_hits = sum(
        steiger_z1(R[k, 0, 2], R[k, 1, 2], R[k, 0, 1], n).p_value < alpha for k in range(reps)
    )
    return t_hits / reps, z_hits / reps


@pytest.mark.slow
def test_statistics_suite():
    with criterion(9, "paired t and dependent-correlation tests are calibrated") as notes:
        rng = np.random.default_rng(9)
        worst_t = 0.0
        for _ in range(20):
            m = int(rng.integers(3, 120))
            a = rng.normal(size=m)
            b = a + rng.normal(loc=rng.uniform(-0.6, 0.6), scale=rng.uniform(0.3, 2.0), size=m)
            oracle = sps.ttest_rel(a, b).pvalue
            worst_t = max(worst_t, abs(paired_t_test(a, b).p_value - oracle) / oracle)
        notes.append(f"t-test max rel p err {worst_t:.1e}")
        assert worst_t <= 0.10

        worst_z = 0.0
        for i, cfg in enumerate(STEIGER_CONFIGS):
            p_mc = mc_steiger_p(*cfg, reps=100_000, seed=i)
            worst_z = max(worst_z, abs(steiger_z1(*cfg).p_value - p_mc) / p_mc)
        notes.append(f"Z1* vs simulation max rel p err {worst_z:.3f}")
        assert worst_z <= 0.15

        a, b = rng.normal(size=(2, 30))
        assert paired_t_test(a, b).statistic == -paired_t_test(b, a).statistic
        assert paired_t_test(a, b).p_value == paired_t_test(b, a).p_value
        za, zb = steiger_z1(0.7, 0.5, 0.6, 90), steiger_z1(0.5, 0.7, 0.6, 90)
        assert za.statistic == pytest.approx(-zb.statistic, rel=1e-14)
        assert za.p_value == pytest.approx(zb.p_value, rel=1e-14)

        rate_t, rate_z = _null_rejection_rates()
        notes.append(f"null rejection at 5%: t {rate_t:.3f}, Z1* {rate_z:.3f}")
        assert abs(rate_t - 0.05) <= 0.015
        assert abs(rate_z - 0.05) <= 0.015


def _cli_pipeline(root: Path):
    steps = [
        ["synth", "--n-train", "60", "--n-test", "40", "--raters", "4", "--seed", "5", "--out", "data"],
        ["synth", "--n-train", "60", "--n-test", "40", "--format", "csv", "--seed", "5", "--out", "data_csv"],
        ["train", "--data", "data/train.json", "--variant", "joint", "--seed", "5", "--out", "joint.json"],
        ["train", "--data", "data/train.json", "--variant", "base", "--seed", "5", "--out", "base.json"],
        ["predict", "--model", "joint.json", "--data", "data/test.json", "--out", "joint.jsonl"],
        ["predict", "--model", "base.json", "--data", "data/test.json", "--out", "base.jsonl"],
        ["evaluate", "--predictions", "joint.jsonl", "--data", "data/test.json", "--out", "eval.json",
         "--csv", "eval.csv"],
        ["compare", "--pred-a", "joint.jsonl", "--pred-b", "base.jsonl", "--data", "data/test.json",
         "--out", "compare.json"],
    ]
    cwd = os.getcwd()
    os.chdir(root)
    try:
        for argv in steps:
            assert cli_main(argv) == 0, argv
    finally:
        os.chdir(cwd)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_reproducibility(tmp_path):
    with criterion(10, "identical seeds give byte-identical artifacts") as notes:
        first, second = tmp_path / "run1", tmp_path / "run2"
        first.mkdir()
        second.mkdir()
        a, b = _cli_pipeline(first), _cli_pipeline(second)
        differing = sorted(k for k in a if a[k] != b.get(k))
        notes.append(f"{len(a)} files compared, {len(differing)} differ")
        assert set(a) == set(b)
        assert not differing, differing
