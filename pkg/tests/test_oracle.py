from collections import defaultdict
from itertools import combinations, product
from math import log2

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoviews.exceptions import DomainError, FormatError, SizeError
from infoviews.oracle import (
    AlphaModel, ExactJoint, alpha_profile, binary_entropy, conditionally_independent_joint,
    exact_cmi, exact_D, exact_interaction, exact_profile, exact_total_correlation,
    materialize_alpha, random_joint, read_joint, write_joint,
)


# -- independent reference: entropies from an explicit dict over support points


def _points(joint):
    out = []
    for bits in product((0, 1), repeat=joint.m):
        for y in range(joint.n_labels):
            p = joint.table[bits + (y,)]
            if p > 0:
                out.append((bits, y, p))
    return out


def _H(points, key):
    acc = defaultdict(float)
    for bits, y, p in points:
        acc[key(bits, y)] += p
    return -sum(p * log2(p) for p in acc.values() if p > 0)


def _ref_cmi(joint, i, subset):
    pts = _points(joint)
    s = tuple(subset)
    h_s = _H(pts, lambda b, y: tuple(b[j] for j in s))
    h_is = _H(pts, lambda b, y: (b[i],) + tuple(b[j] for j in s))
    h_sy = _H(pts, lambda b, y: tuple(b[j] for j in s) + (y,))
    h_isy = _H(pts, lambda b, y: (b[i],) + tuple(b[j] for j in s) + (y,))
    return (h_is - h_s) - (h_isy - h_sy)


def _copy_joint():
    # B_0 = Y, B_1 independent fair coin
    t = np.zeros((2, 2, 2))
    for y in (0, 1):
        for b1 in (0, 1):
            t[y, b1, y] = 0.25
    return ExactJoint(t)


joints = st.builds(lambda m, k, seed: random_joint(m, k, seed),
                   st.integers(1, 4), st.integers(2, 3), st.integers(0, 10_000))
ci_joints = st.builds(
    lambda m, k, seed: conditionally_independent_joint(
        np.random.default_rng(seed).random((k, m)),
        np.random.default_rng(seed + 1).dirichlet(np.ones(k))),
    st.integers(2, 5), st.integers(2, 3), st.integers(0, 10_000))


def test_copy_channel():
    j = _copy_joint()
    assert exact_cmi(j, 0, []) == pytest.approx(1.0, abs=1e-12)
    assert exact_cmi(j, 1, []) == pytest.approx(0.0, abs=1e-12)
    assert exact_cmi(j, 0, [1]) == pytest.approx(1.0, abs=1e-12)


def test_independent_of_label():
    cc = np.array([[0.3, 0.8, 0.5], [0.3, 0.8, 0.5]])
    j = conditionally_independent_joint(cc, [0.4, 0.6])
    for i in range(3):
        for n in range(3):
            for s in combinations([x for x in range(3) if x != i], n):
                assert abs(exact_cmi(j, i, s)) < 1e-12


def test_cmi_rejects_overlap():
    with pytest.raises(ValueError):
        exact_cmi(random_joint(3, 2, 0), 1, [1, 2])


@pytest.mark.parametrize("seed", range(5))
def test_cmi_matches_reference_entropy_sums(seed):
    j = random_joint(3, 2, seed)
    for i in range(3):
        others = [x for x in range(3) if x != i]
        for n in range(3):
            for s in combinations(others, n):
                assert exact_cmi(j, i, s) == pytest.approx(_ref_cmi(j, i, s), abs=1e-12)


def test_flat_round_trip():
    j = random_joint(4, 3, 1)
    assert np.array_equal(ExactJoint.from_flat(j.flat(), 4).table, j.table)
    # row index bit i is component i
    assert j.flat()[0b0010, 2] == j.table[0, 1, 0, 0, 2]


def test_table_validation():
    with pytest.raises(DomainError):
        ExactJoint(np.full((2, 2), 0.3))
    with pytest.raises(DomainError):
        ExactJoint(np.array([[1.2, -0.2], [0.0, 0.0]]))
    with pytest.raises(SizeError):
        conditionally_independent_joint(np.full((2, 17), 0.5), [0.5, 0.5])


def test_alpha_one_profile():
    prof = exact_profile(materialize_alpha(AlphaModel(1.0, 4)))
    assert prof.f[0] == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(prof.f[1:], 0.0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(joints)
def test_F_base_case_and_telescoping(j):
    prof = exact_profile(j)
    assert prof.F[0] == 0.0
    assert prof.F[1] == prof.f[0]
    np.testing.assert_allclose(prof.F, prof.F_direct, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(joints)
def test_C_identity(j):
    prof = exact_profile(j)
    expect = np.cumsum(prof.f - prof.f[0])
    np.testing.assert_allclose(prof.C, expect, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(joints)
def test_nonnegativity_and_chain_rule(j):
    m = j.m
    hy = j.entropy((), True)
    for n in range(m + 1):
        for s in combinations(range(m), n):
            assert j.entropy(s) >= -1e-12
            assert j.entropy(s, True) == pytest.approx(hy + j.conditional_entropy(s, (), True),
                                                       abs=1e-12)
            if n:
                assert exact_total_correlation(j, s) >= -1e-12
            for i in set(range(m)) - set(s):
                assert exact_cmi(j, i, s) >= -1e-12


@settings(max_examples=25, deadline=None)
@given(ci_joints)
def test_interaction_sign_law(j):
    m = j.m
    for i in range(m):
        others = [x for x in range(m) if x != i]
        for n in range(1, m):
            for s in combinations(others, n):
                assert exact_interaction(j, i, s) <= 1e-12


@settings(max_examples=15, deadline=None)
@given(ci_joints)
def test_total_correlation_zero_under_ci(j):
    for n in range(1, j.m + 1):
        assert exact_D(j, n)[0] == pytest.approx(0.0, abs=1e-12)


def test_total_correlation_duplicate_pair():
    # B_0 = B_1, each a fair coin independent of Y: H(B_i|Y) = 1, H(B_0,B_1|Y) = 1
    t = np.zeros((2, 2, 2))
    for b in (0, 1):
        for y in (0, 1):
            t[b, b, y] = 0.25
    j = ExactJoint(t)
    assert exact_total_correlation(j, [0, 1]) == pytest.approx(0.5, abs=1e-12)
    assert exact_total_correlation(j, [1, 0]) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        exact_total_correlation(j, [])


def test_total_correlation_permutation_invariant():
    j = random_joint(4, 2, 9)
    a = exact_total_correlation(j, [0, 2, 3])
    assert exact_total_correlation(j, [3, 0, 2]) == pytest.approx(a, abs=1e-15)


def test_exact_D_sampled_flag(monkeypatch):
    import infoviews.oracle as oracle
    j = random_joint(6, 2, 5)
    exact, approx = exact_D(j, 3)           # C(6, 3) = 20 subsets
    assert not approx
    monkeypatch.setattr(oracle, "MAX_EXACT_SUBSETS", 10)
    sampled, approx = exact_D(j, 3, rng=1)
    assert approx
    assert sampled == pytest.approx(exact, abs=0.1)
    assert exact_D(j, 3, rng=1) == (sampled, True)


def test_alpha_closed_form_values():
    # 1 - H_b(0.6) computed by hand
    hb = -(0.6 * log2(0.6) + 0.4 * log2(0.4))
    assert alpha_profile(AlphaModel(0.6, 64), 0) == pytest.approx(1 - hb, abs=1e-12)
    assert alpha_profile(AlphaModel(0.6, 64), 0) == pytest.approx(0.02905, abs=1e-5)
    assert alpha_profile(AlphaModel(0.6, 64), 1) == pytest.approx(0.0279, abs=1e-4)
    assert all(alpha_profile(AlphaModel(0.5, 10), n) == 0.0 for n in range(10))


def test_alpha_n1_matches_materialized_m2():
    prof = exact_profile(materialize_alpha(AlphaModel(0.6, 2)))
    assert prof.f[1] == pytest.approx(alpha_profile(AlphaModel(0.6, 2), 1), abs=1e-12)
    assert prof.f[1] < prof.f[0]


def test_alpha_closed_form_vs_enumeration_m10():
    model = AlphaModel(0.58, 10)
    prof = exact_profile(materialize_alpha(model))
    closed = [alpha_profile(model, n) for n in range(10)]
    np.testing.assert_allclose(prof.f, closed, atol=1e-12)


def test_materialize_m1():
    j = materialize_alpha(AlphaModel(0.6, 1))
    assert j.table[1, 1] == pytest.approx(0.3)
    assert j.table[0, 1] == pytest.approx(0.2)
    assert j.table[0, 0] == pytest.approx(0.3)
    assert j.table[1, 0] == pytest.approx(0.2)
    assert j.table.sum() == 1.0
    with pytest.raises(SizeError):
        materialize_alpha(AlphaModel(0.6, 17))


def test_alpha_domain():
    with pytest.raises(DomainError):
        AlphaModel(0.4, 3)
    with pytest.raises(DomainError):
        AlphaModel(1.01, 3)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.5, 1.0), m=st.integers(2, 60))
def test_alpha_profile_non_increasing(a, m):
    model = AlphaModel(a, m)
    vals = [alpha_profile(model, n) for n in range(m)]
    assert all(v2 <= v1 + 1e-12 for v1, v2 in zip(vals, vals[1:]))


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.5, 1.0), b=st.floats(0.5, 1.0))
def test_alpha_f0_monotone_in_alpha(a, b):
    lo, hi = sorted((a, b))
    assert alpha_profile(AlphaModel(lo, 3), 0) <= alpha_profile(AlphaModel(hi, 3), 0) + 1e-12


def test_binary_entropy_endpoints():
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0)


def test_joint_text_round_trip(tmp_path):
    j = random_joint(3, 3, 4)
    p = tmp_path / "j.txt"
    write_joint(j, p)
    back = read_joint(p)
    np.testing.assert_array_equal(back.table, j.table)


def test_joint_text_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("01 0 0.5\n012 1 0.5\n")
    with pytest.raises(FormatError):
        read_joint(p)
    p.write_text("# nothing\n")
    with pytest.raises(FormatError):
        read_joint(p)
