import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from infoviews.bitdata import LabeledBitDataset, LabelSpace
from infoviews.estim import (
    CSV_COLUMNS, EstimatorConfig, InformationProfile, ProfileEstimator, config_from_dict,
    estimate_conditional, estimate_D, estimate_profile, estimate_total_correlation,
    sample_gamma, sample_subset,
)
from infoviews.exceptions import DegenerateConditioningError, DomainError
from infoviews.oracle import (
    AlphaModel, ExactJoint, alpha_profile, exact_D, exact_profile, exact_total_correlation,
    random_joint,
)


def _nan_equal(a, b):
    return np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True)


@pytest.fixture(scope="module")
def alpha_ds():
    return AlphaModel(0.6, 64).dataset()


# -- subsets


def test_forced_subset():
    for seed in range(20):
        assert sample_subset(0, 2, seed, m=3).tolist() == [1, 2]


def test_subset_uniform_and_excludes_i():
    rng = np.random.default_rng(0)
    counts = np.zeros(784)
    for _ in range(10_000):
        s = sample_subset(5, 40, rng, m=784)
        assert s.size == 40 and np.unique(s).size == 40
        counts[s] += 1
    assert counts[5] == 0
    p = 40 / 783
    sigma = math.sqrt(10_000 * p * (1 - p))
    others = np.delete(counts, 5)
    # per-index 3-sigma bound, loosened by a Bonferroni-style quantile across 783 indices
    lo, hi = binom.ppf([1e-6, 1 - 1e-6], 10_000, p)
    assert others.min() >= lo and others.max() <= hi
    assert abs(others.mean() - 10_000 * p) < 3 * sigma / math.sqrt(783)


def test_subset_size_error():
    with pytest.raises(ValueError):
        sample_subset(0, 3, 0, m=3)


# -- Gamma


def test_gamma_deterministic_encoder():
    X = np.array([[1, 0, 1], [0, 1, 1]], dtype=float)
    ds = LabeledBitDataset.from_arrays(X, [0, 1])
    bits, labels = sample_gamma(ds, None, [0, 1, 2], 200, 0)
    assert np.array_equal(bits, X[labels].astype(np.uint8))


def test_gamma_label_marginal_and_determinism():
    rng = np.random.default_rng(1)
    labels = rng.choice(3, 500, p=[0.2, 0.5, 0.3])
    ds = LabeledBitDataset(rng.random((500, 4)), labels, LabelSpace(3))
    _, lab = sample_gamma(ds, None, [0, 2], 10_000, 7)
    freq = np.bincount(lab, minlength=3) / 10_000
    np.testing.assert_allclose(freq, np.bincount(labels, minlength=3) / 500, atol=0.02)
    a = sample_gamma(ds, None, [0, 2], 50, 7)
    b = sample_gamma(ds, None, [0, 2], 50, 7)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_gamma_respects_weights():
    j = random_joint(3, 2, 3)
    ds = j.to_dataset()
    bits, lab = sample_gamma(ds, None, [0, 1, 2], 20_000, 0)
    rows = bits[:, 0] + 2 * bits[:, 1] + 4 * bits[:, 2]
    emp = np.zeros((8, 2))
    np.add.at(emp, (rows, lab), 1 / 20_000)
    np.testing.assert_allclose(emp, j.flat(), atol=0.015)


# -- conditionals


def test_conditional_empty_subset_is_class_mean():
    rng = np.random.default_rng(2)
    X = rng.random((40, 3))
    y = np.arange(40) % 2
    ds = LabeledBitDataset.from_arrays(X, y)
    got = estimate_conditional(ds, None, 1, [], [], y=1)
    assert got == pytest.approx(X[y == 1, 1].astype(np.float32).mean(), abs=1e-6)


@pytest.mark.parametrize("b", [[0, 0, 0], [1, 1, 1], [1, 0, 1]])
def test_conditional_alpha_family(b):
    ds = AlphaModel(0.6, 8).dataset()
    assert estimate_conditional(ds, None, 0, [2, 4, 6], b, y=1) == pytest.approx(0.6, abs=0.02)
    assert estimate_conditional(ds, None, 0, [2, 4, 6], b, y=0) == pytest.approx(0.4, abs=0.02)


def test_conditional_duplicate_feature():
    rng = np.random.default_rng(3)
    x = (rng.random(200) < 0.5).astype(float)
    X = np.stack([x, x, rng.random(200)], axis=1)
    ds = LabeledBitDataset.from_arrays(X, rng.integers(0, 2, 200))
    assert estimate_conditional(ds, None, 0, [1], [1]) == 1.0
    assert estimate_conditional(ds, None, 0, [1], [0]) == 0.0


def test_conditional_degenerate():
    ds = LabeledBitDataset.from_arrays(np.array([[1.0, 0.3], [1.0, 0.7]]), [0, 1])
    with pytest.raises(DegenerateConditioningError):
        estimate_conditional(ds, None, 1, [0], [0])
    with pytest.raises(ValueError):
        estimate_conditional(ds, None, 1, [1], [0])


def test_conditional_matches_joint():
    j = random_joint(4, 2, 11)
    ds = j.to_dataset()
    # P(B_3 = 1 | B_0 = 1, B_2 = 0, Y = 1) from the table directly
    t = j.table
    num = t[1, :, 0, 1, 1].sum()
    den = t[1, :, 0, :, 1].sum()
    assert estimate_conditional(ds, None, 3, [0, 2], [1, 0], y=1) == pytest.approx(num / den,
                                                                                   abs=1e-12)


# -- profiles


def test_profile_independent_representation():
    rng = np.random.default_rng(4)
    ds = LabeledBitDataset.from_arrays(rng.random((300, 12)), rng.integers(0, 2, 300))
    cfg = EstimatorConfig(gamma_size=32, subset_samples=20, n_max=6, stop_threshold=None,
                          conditional_subsample=None)
    prof = estimate_profile(ds, None, cfg)
    assert np.all(np.abs(prof.f_hat) <= 0.01)


def test_profile_deterministic(alpha_ds):
    cfg = EstimatorConfig(subset_samples=10, n_max=5, rng_seed=9)
    a = estimate_profile(alpha_ds, None, cfg)
    b = estimate_profile(alpha_ds, None, cfg)
    assert a.to_csv() == b.to_csv()


def test_profile_tracks_alpha_closed_form(alpha_ds):
    cfg = EstimatorConfig(subset_samples=30, n_max=15, stop_threshold=None)
    prof = estimate_profile(alpha_ds, None, cfg)
    exact = [alpha_profile(AlphaModel(0.6, 64), n) for n in range(16)]
    assert np.abs(prof.f_hat - exact).mean() < 0.01


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-0.05, 1.0, allow_nan=False), min_size=1, max_size=30),
       st.integers(1, 100))
def test_stored_curve_identities_exact(f, m):
    d = np.linspace(0, 0.1, len(f))
    prof = InformationProfile(m=m, f_hat=f, stderr=np.zeros(len(f)), d_term=d,
                              samples=np.ones(len(f)), degenerate=np.zeros(len(f)),
                              termination="n_max")
    F, C = prof.F_hat, prof.C_hat
    assert F[0] == 0.0
    for n in range(1, len(f) + 1):
        assert F[n] - F[n - 1] == pytest.approx(f[n - 1], abs=1e-15)
        assert abs(F[n] - math.fsum(f[:n])) < 1e-12
    for n in range(1, len(f)):
        assert C[n] - C[n - 1] == pytest.approx(f[n] - f[0], abs=1e-15)
    # stored values are the sequential sums themselves
    acc = 0.0
    for n in range(len(f)):
        assert F[n] == acc
        acc += f[n]


def test_stop_rule_honored():
    ds = AlphaModel(0.6, 40).dataset()
    cfg = EstimatorConfig(subset_samples=5, stop_threshold=0.02, n_max=39)
    prof = estimate_profile(ds, None, cfg)
    assert prof.termination == "threshold"
    below = np.flatnonzero(prof.f_hat < 0.02)
    assert below.size == 1 and below[0] == prof.f_hat.size - 1


def test_termination_reasons():
    ds = AlphaModel(0.6, 5).dataset()
    assert estimate_profile(ds, None, EstimatorConfig(subset_samples=2, n_max=2,
                                                      stop_threshold=None)).termination == "n_max"
    assert estimate_profile(ds, None, EstimatorConfig(subset_samples=2, n_max=50,
                                                      stop_threshold=None)).termination == "exhausted"


def test_csv_and_json_round_trip(alpha_ds, tmp_path):
    prof = estimate_profile(alpha_ds, None, EstimatorConfig(subset_samples=4, n_max=6))
    text = prof.to_csv(tmp_path / "p.csv")
    assert text.splitlines()[0].split(",") == list(CSV_COLUMNS)
    back = InformationProfile.from_csv(tmp_path / "p.csv")
    assert back.m == 64
    for col in ("f_hat", "stderr", "F_hat", "C_hat", "D_hat", "d_term", "samples", "degenerate"):
        assert _nan_equal(getattr(back, col), getattr(prof, col)), col
    assert back.to_csv() == text
    js = InformationProfile.from_json(prof.to_json())
    assert js.to_csv() == text and js.termination == prof.termination


def test_single_subset_sample_has_nan_stderr(alpha_ds, tmp_path):
    prof = estimate_profile(alpha_ds, None, EstimatorConfig(subset_samples=1, n_max=2))
    assert np.isnan(prof.stderr).all()
    assert InformationProfile.from_csv(prof.to_csv()).to_csv() == prof.to_csv()


def test_stderr_definition():
    ds = AlphaModel(0.58, 6).dataset()
    prof = estimate_profile(ds, None, EstimatorConfig(subset_samples=7, n_max=3))
    assert np.all(prof.stderr[1:] > 0) and np.all(np.isfinite(prof.stderr))


def test_alpha_null_D(alpha_ds):
    prof = estimate_profile(alpha_ds, None, EstimatorConfig(subset_samples=10, n_max=10,
                                                            stop_threshold=None))
    assert np.all(np.abs(prof.D_hat) <= 0.01)
    assert estimate_D(alpha_ds, None, 10, EstimatorConfig(subset_samples=10)) == prof.D_hat[10]
    with pytest.raises(ValueError):
        estimate_D(alpha_ds, None, 0)


def test_D_duplicate_pair_against_oracle():
    # B_0 = B_1 given each y, fair within class: d_B({0,1}) = 0.5 bits
    t = np.zeros((2, 2, 2))
    for b in (0, 1):
        for y in (0, 1):
            t[b, b, y] = 0.25
    j = ExactJoint(t)
    rng = np.random.default_rng(0)
    rows = rng.choice(8, 4000, p=j.flat().ravel())
    bits = np.stack([(rows // 2) & 1, (rows // 2 >> 1) & 1], axis=1).astype(float)
    ds = LabeledBitDataset.from_arrays(bits, rows % 2)
    cfg = EstimatorConfig(subset_samples=50, n_max=1, stop_threshold=None)
    prof = estimate_profile(ds, None, cfg)
    assert prof.D_hat[1] > 0
    assert prof.D_hat[1] / 2 == pytest.approx(exact_total_correlation(j, [0, 1]), abs=0.02)
    assert estimate_total_correlation(ds, None, [0, 1], cfg) == pytest.approx(0.5, abs=0.02)


def test_duplicated_representation_has_larger_D():
    rng = np.random.default_rng(5)
    y = rng.integers(0, 2, 600)
    base = np.clip(0.5 + 0.2 * (y[:, None] - 0.5) + 0.25 * rng.standard_normal((600, 8)),
                   0.02, 0.98)
    dup = np.repeat(base[:, :4], 2, axis=1)
    cfg = EstimatorConfig(subset_samples=40, n_max=4, stop_threshold=None,
                          conditional_subsample=None)
    d_base = estimate_profile(LabeledBitDataset.from_arrays(base, y), None, cfg).D_hat
    d_dup = estimate_profile(LabeledBitDataset.from_arrays(dup, y), None, cfg).D_hat
    assert np.all(d_dup[1:] > d_base[1:])


@pytest.mark.parametrize("seed", range(4))
def test_enumeration_matches_oracle(seed):
    j = random_joint(5, 2 + seed % 2, seed)
    ds = j.to_dataset()
    cfg = EstimatorConfig(mode="enumerate", stop_threshold=None, n_max=4)
    prof = estimate_profile(ds, None, cfg)
    ex = exact_profile(j)
    np.testing.assert_allclose(prof.f_hat, ex.f, atol=1e-9)
    np.testing.assert_allclose(prof.F_hat, ex.F, atol=1e-9)
    np.testing.assert_allclose(prof.C_hat, ex.C, atol=1e-9)
    np.testing.assert_allclose(prof.D_hat, ex.D_hat, atol=1e-9)
    for n in range(1, 5):
        assert prof.D_norm[n] == pytest.approx(exact_D(j, n)[0], abs=1e-9)


def test_monte_carlo_error_shrinks_with_gamma():
    model = AlphaModel(0.6, 32)
    ds = model.dataset()
    exact = np.array([alpha_profile(model, n) for n in range(13)])

    def err(g):
        out = []
        for seed in range(10):
            cfg = EstimatorConfig(gamma_size=g, subset_samples=10, n_max=12,
                                  stop_threshold=None, rng_seed=seed)
            out.append(np.abs(estimate_profile(ds, None, cfg).f_hat - exact).mean())
        return np.mean(out)

    errs = [err(g) for g in (32, 64, 128, 256)]
    assert all(b <= a for a, b in zip(errs, errs[1:])), errs


def test_representation_transform_is_used():
    class Tail:
        def transform(self, X):
            return np.asarray(X, dtype=float)[:, 2:]

    ds = AlphaModel(0.8, 6).dataset()
    cfg = EstimatorConfig(subset_samples=5, n_max=2)
    a = estimate_profile(AlphaModel(0.8, 4).dataset(), None, cfg)
    b = estimate_profile(ds, Tail(), cfg)
    assert b.m == 4
    assert a.to_csv() == b.to_csv()

    class Bad:
        def transform(self, X):
            return np.full((len(X), 2), 2.0)

    with pytest.raises(DomainError):
        estimate_profile(ds, Bad(), cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(gamma_size=0)
    with pytest.raises(ValueError):
        EstimatorConfig(stop_threshold=-1)
    with pytest.raises(ValueError):
        config_from_dict({"gamma": 3})
    assert config_from_dict({"gamma_size": 3}).gamma_size == 3


def test_profile_estimator_api():
    ds = AlphaModel(0.7, 6).dataset(20)
    est = ProfileEstimator(subset_samples=5, n_max=3, stop_threshold=None)
    assert est.get_params()["gamma_size"] == 32
    est.fit(ds.features, ds.labels)
    assert est.profile_.f_hat.size == 4
    assert est.score() == est.profile_.F_hat.max()
