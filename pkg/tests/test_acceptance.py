"""Acceptance suite: one verdict line per criterion, at the stated tolerances.

Each test prints ``ACCEPTANCE <id>: PASS|FAIL <detail>`` and the lines are
repeated in the terminal summary.
"""

import os
import time
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

import test_models
from _joints import disjoint_ci_joint
from conftest import VERDICTS
from infoviews.estim import (
    EstimatorConfig, InformationProfile, estimate_profile, estimate_total_correlation,
)
from infoviews.oracle import (
    AlphaModel, conditionally_independent_joint, exact_D, exact_interaction, exact_profile,
    exact_total_correlation, random_joint,
)
from infoviews.pipeline import ExperimentConfig, run_experiment, validate_estimator
from infoviews.separator import verify_theorem1


def verdict(cid: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {cid}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    VERDICTS.append(line)
    assert ok, line


def test_criterion_1_alpha_estimator_accuracy():
    t0 = time.perf_counter()
    cfg = EstimatorConfig(gamma_size=32, subset_samples=100)
    _, summary = validate_estimator([0.57, 0.58, 0.6], m=64, config=cfg, seeds=range(5),
                                    n_max=40)
    elapsed = time.perf_counter() - t0
    worst_mean = max(s["mean_abs_error"] for s in summary.values())
    worst_max = max(s["max_abs_error"] for s in summary.values())
    parts = ", ".join(f"a={a}: mean {s['mean_abs_error']:.2e} max {s['max_abs_error']:.2e}"
                      for a, s in summary.items())
    verdict("1", worst_mean <= 0.01 and worst_max <= 0.03 and elapsed <= 600,
            f"{parts}; {elapsed:.0f}s (limits 0.01 / 0.03 bits, 600s)")


def test_criterion_2_enumeration_matches_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    cfg = EstimatorConfig(mode="enumerate", stop_threshold=None, n_max=7)
    rng = np.random.default_rng(2024)
    for k in range(50):
        j = random_joint(8, 2 + k % 2, rng)
        ds = j.to_dataset()
        prof = estimate_profile(ds, None, cfg)
        ex = exact_profile(j)
        worst = max(worst, np.abs(prof.f_hat - ex.f).max(), np.abs(prof.F_hat - ex.F).max(),
                    np.abs(prof.C_hat - ex.C).max())
        for n in range(1, 8):
            worst = max(worst, abs(prof.D_norm[n] - exact_D(j, n)[0]))
        subset = np.sort(rng.choice(8, 1 + k % 8, replace=False))
        d_hat = estimate_total_correlation(ds, None, subset, cfg)
        worst = max(worst, abs(d_hat - exact_total_correlation(j, subset)))
    elapsed = time.perf_counter() - t0
    verdict("2", worst <= 1e-9 and elapsed <= 60,
            f"max |estimate - oracle| over f, F, C, d, D = {worst:.2e}; {elapsed:.1f}s "
            "(limits 1e-9, 60s)")


def test_criterion_3_identities():
    ds = AlphaModel(0.6, 64).dataset()
    prof = estimate_profile(ds, None, EstimatorConfig(subset_samples=20, n_max=30,
                                                      stop_threshold=None))
    stored = InformationProfile.from_csv(prof.to_csv())
    import csv
    import io
    rows = list(csv.DictReader(io.StringIO(prof.to_csv())))
    f = [float(r["f_hat"]) for r in rows]
    exact_sums = True
    for n, r in enumerate(rows):
        acc_F = 0.0
        for j in range(n):
            acc_F += f[j]
        acc_C = 0.0
        for j in range(1, n + 1):
            acc_C += f[j] - f[0]
        exact_sums &= float(r["F_hat"]) == acc_F and float(r["C_hat"]) == acc_C
    exact_sums &= np.array_equal(stored.F_hat[:-1], [float(r["F_hat"]) for r in rows])
    worst = 0.0
    for seed in range(20):
        j = random_joint(2 + seed % 4, 2 + seed % 2, seed)
        ex = exact_profile(j)
        worst = max(worst, np.abs(ex.C - np.cumsum(ex.f - ex.f[0])).max())
    verdict("3", exact_sums and worst <= 1e-12,
            f"stored F/C equal the sums exactly: {exact_sums}; "
            f"max |C_interaction - C_profile| = {worst:.2e} (limit 1e-12)")


def test_criterion_4_conditional_independence_null():
    ds = AlphaModel(0.6, 64).dataset()
    prof = estimate_profile(ds, None, EstimatorConfig(n_max=10, stop_threshold=None))
    d_range = float(np.abs(prof.D_hat[:11]).max())
    rng = np.random.default_rng(4)
    worst = -np.inf
    for _ in range(30):
        m, k = int(rng.integers(2, 6)), int(rng.integers(2, 4))
        j = conditionally_independent_joint(rng.random((k, m)), rng.dirichlet(np.ones(k)))
        for i in range(m):
            others = [x for x in range(m) if x != i]
            for n in range(1, m):
                for s in combinations(others, n):
                    worst = max(worst, exact_interaction(j, i, s))
    verdict("4", d_range <= 0.01 and worst <= 1e-12,
            f"max |D_hat(n)|, n<=10 = {d_range:.4f} (limit 0.01); "
            f"max interaction on CI joints = {worst:.2e} (limit 1e-12)")


def test_criterion_5_separator_certification():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    failures, points = 0, 0
    for _ in range(200):
        joint = disjoint_ci_joint(rng, m_max=12, k_max=4)
        rep = verify_theorem1(joint)
        points += rep.n_points
        ok = (rep.certified and rep.in_class_dot_min == 1.0 and rep.in_class_dot_max == 1.0
              and rep.out_class_dot_max <= -1.0)
        failures += not ok
    elapsed = time.perf_counter() - t0
    verdict("5", failures == 0 and elapsed <= 60,
            f"{200 - failures}/200 joints certified over {points} supported points; "
            f"{elapsed:.1f}s (limit 60s)")


def test_criterion_6_gradient_checks():
    problems = []
    try:
        test_models.test_cd1_matches_hand_computation()
    except AssertionError as exc:
        problems.append(f"CD-1: {exc}")
    try:
        test_models.test_ssbe_score_function_matches_finite_differences()
    except AssertionError as exc:
        problems.append(f"SSBE: {exc}")
    verdict("6", not problems,
            "CD-1 update within 1e-10, SSBE score-function gradient within 10% of FD"
            if not problems else "; ".join(problems))


# -- criterion 7: MNIST-parity trends through the full pipeline --------------

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs" / "mnist"
MNIST_MODELS = ("raw", "rbm", "stack3", "rbm112", "drbm", "ssbe", "sparse-ssbe")
SEEDS = (0, 1, 2)


@pytest.fixture(scope="module")
def mnist(tmp_path_factory):
    """Train-split profiles of every model for every seed, keyed (model, seed)."""
    root = Path(os.environ.get("INFOVIEWS_ACCEPTANCE_RUNS")
                or tmp_path_factory.mktemp("mnist-runs"))
    t0 = time.perf_counter()
    profiles = {}
    for seed in SEEDS:
        for name in MNIST_MODELS:
            out = root / f"seed{seed}" / name
            cfg = ExperimentConfig.from_yaml(
                CONFIGS / f"{name}.yaml",
                {"seed": str(seed), "output_dir": str(out), "profile_sets": "[train]",
                 "certify": "false"})
            man = run_experiment(cfg)
            dirs = [out / r for r in man.runs] if man.runs else [out]
            key = name
            for d in dirs:
                if man.runs:
                    key = f"{name}/{d.name}"
                profiles[key, seed] = InformationProfile.from_json(d / "profile_train.json")
    return profiles, time.perf_counter() - t0


def _mean_curve(profiles, name, column="f_hat"):
    return np.mean([getattr(profiles[name, s], column) for s in SEEDS], axis=0)


def _at_F(profiles, name, target, column):
    return np.array([profiles[name, s].at_F(target, column) for s in SEEDS])


def _common_level(profiles, a, b):
    # 90% of the highest F-hat that both seed-averaged curves reach
    top = min(_mean_curve(profiles, a, "F_hat")[:-1].max(),
              _mean_curve(profiles, b, "F_hat")[:-1].max())
    return 0.9 * top


def test_criterion_7a_raw_profile_peak(mnist):
    profiles, _ = mnist
    f = _mean_curve(profiles, "raw")
    per_seed = [int(np.argmax(profiles["raw", s].f_hat)) for s in SEEDS]
    n_star = int(np.argmax(f))
    verdict("7a", 20 <= n_star <= 80,
            f"RAW argmax of seed-averaged f_hat at n*={n_star} (per seed {per_seed}); "
            "required 20 <= n* <= 80")


def test_criterion_7b_depth_lowers_correlation(mnist):
    profiles, _ = mnist
    d1 = _at_F(profiles, "rbm", 0.9, "D_hat")
    d3 = _at_F(profiles, "stack3", 0.9, "D_hat")
    ok = bool(np.isfinite(d1).all() and np.isfinite(d3).all() and d3.mean() < d1.mean())
    verdict("7b", ok,
            f"D_hat at F_hat=0.9: depth 1 {np.round(d1, 3).tolist()} (mean {d1.mean():.3f}), "
            f"depth 3 {np.round(d3, 3).tolist()} (mean {d3.mean():.3f}); need depth 3 lower")


def test_criterion_7c_sparsity_lowers_correlation(mnist):
    profiles, _ = mnist
    sparse = sorted({k for k, _ in profiles if k.startswith("sparse-ssbe")})
    parts, ok = [], False
    for name in sparse:
        level = _common_level(profiles, "ssbe", name)
        dense = _at_F(profiles, "ssbe", level, "D_hat").mean()
        thin = _at_F(profiles, name, level, "D_hat").mean()
        ok |= bool(thin < dense)
        parts.append(f"{name}: at F_hat={level:.3f} D_hat {thin:.3f} vs lambda=0 {dense:.3f}")
    verdict("7c", ok, "; ".join(parts) + "; need a sparse point lower")


def test_criterion_7d_duplication(mnist):
    profiles, _ = mnist
    level = _common_level(profiles, "rbm", "rbm112")
    c_base = _at_F(profiles, "rbm", level, "C_hat").mean()
    c_dup = _at_F(profiles, "rbm112", level, "C_hat").mean()
    d_base = _at_F(profiles, "rbm", level, "D_hat").mean()
    d_dup = _at_F(profiles, "rbm112", level, "D_hat").mean()
    verdict("7d", bool(c_dup < c_base and d_dup > d_base),
            f"at F_hat={level:.3f}: C_hat duplicated {c_dup:.3f} vs base {c_base:.3f}, "
            f"D_hat duplicated {d_dup:.3f} vs base {d_base:.3f}; "
            "need C lower and D higher")


def test_criterion_7e_drbm_saturates_early(mnist):
    profiles, elapsed = mnist
    n_raw = [profiles["raw", s].first_n_reaching(0.95) for s in SEEDS]
    n_drbm = [profiles["drbm", s].first_n_reaching(0.95) for s in SEEDS]
    ok = None not in n_drbm and None not in n_raw and np.mean(n_drbm) < np.mean(n_raw)
    verdict("7e", bool(ok),
            f"first n with F_hat >= 0.95: DRBM {n_drbm}, RAW {n_raw}; need DRBM smaller")


def test_criterion_7_runtime(mnist):
    _, elapsed = mnist
    verdict("7-runtime", elapsed <= 7200,
            f"MNIST pipeline ({len(MNIST_MODELS)} configs x {len(SEEDS)} seeds) took "
            f"{elapsed / 60:.1f} min (limit 120 min)")
