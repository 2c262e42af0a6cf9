from __future__ import annotations

import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lvekit.errors import DomainError, SingularityError, SizeLimitError
from lvekit.mlve_toy import (
    SliceModel,
    TwoLevelJungle,
    check_unit_gram,
    enumerate_two_level_trees,
    fermionic_covariance,
    fermionic_factor,
    harmonic_counterterm,
    log2_fn,
    mlve_order_term,
    mlve_truncated_sum,
    oracle_logZ,
    slice_vertex_derivatives,
    vertex_series_coefficients,
)


def test_log2_examples():
    assert log2_fn(0) == 0
    assert abs(log2_fn(0.5) - (-0.1931471806)) < 1e-10
    with mpmath.workdps(40):
        oracle = complex(mpmath.mpf("1e-6") + mpmath.log(1 - mpmath.mpf("1e-6")))
    assert abs(log2_fn(1e-6) - oracle) < 1e-25
    assert abs(log2_fn(1e-6) + 5.000003e-13) < 1e-19
    with pytest.raises(SingularityError):
        log2_fn(1)
    with pytest.raises(SingularityError):
        log2_fn(np.array([0.1, 1.0]))


def test_log2_array_matches_scalar():
    xs = np.array([1e-5, 5e-4 + 1e-4j, 0.3, 0.2 - 0.4j])
    np.testing.assert_allclose(log2_fn(xs), [log2_fn(x) for x in xs], rtol=1e-15)


def test_log2_quadratic_smallness():
    rng = np.random.default_rng(1)
    r = 0.5 * np.sqrt(rng.uniform(size=10_000))
    x = r * np.exp(2j * np.pi * rng.uniform(size=10_000))
    assert np.all(np.abs(log2_fn(x)) <= np.abs(x) ** 2)


def test_harmonic_counterterm():
    assert harmonic_counterterm(1) == 1
    assert harmonic_counterterm(3) == 11 / 6
    assert abs(harmonic_counterterm(1000) - (math.log(1000) + np.euler_gamma)) < 1e-3
    vals = [harmonic_counterterm(n) for n in range(1, 50)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    with pytest.raises(DomainError):
        harmonic_counterterm(0)


@pytest.mark.parametrize("M", [2, 3, 4])
def test_slices_partition_index_range(M):
    for j_min in range(1, 4):
        for j_max in range(j_min, 13 if M == 2 else 8):
            m = SliceModel(M, j_max, 0.1, j_min)
            seen: list[int] = []
            for j in m.slices:
                seen.extend(m.slice_range(j))
            assert seen == list(range(M ** (j_min - 1), m.N + 1))
            assert len(set(seen)) == len(seen)


def test_slice_model_rejects_bad_input():
    with pytest.raises(DomainError):
        SliceModel(1, 3, 0.1)
    with pytest.raises(DomainError):
        SliceModel(2, 3, 0.1, j_min=4)
    with pytest.raises(DomainError):
        SliceModel(2, 3, 0.1).slice_range(5)


def test_vertex_vanishes_at_origin():
    m = SliceModel(3, 3, 0.4)
    for j in m.slices:
        v = m.vertex(j)
        assert v.V(0.0) == 0 and v.W(0.0) == 0
        assert slice_vertex_derivatives(v, 0.0, 0) == 0
        assert slice_vertex_derivatives(v, 0.0, 1) == 0


def test_second_derivative_at_origin_single_index():
    # slice {p}: W''(0) = -V''(0) = -(lam/p)^2
    m = SliceModel(2, 1, 0.3)
    assert abs(slice_vertex_derivatives(m.vertex(1), 0.0, 2) - (-(0.3**2))) < 1e-15


def _mp_W(lam: complex, ps, sigma):
    x = [1j * mpmath.mpc(lam) * sigma / p for p in ps]
    return mpmath.exp(-mpmath.fsum(xi + mpmath.log(1 - xi) for xi in x)) - 1


def test_derivatives_against_high_precision_differences():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        M = int(rng.integers(2, 4))
        j = int(rng.integers(1, 4))
        lam = float(rng.uniform(-1, 1))
        sigma = float(rng.uniform(-3, 3))
        k = int(rng.integers(0, 5))
        m = SliceModel(M, 3, lam)
        got = complex(slice_vertex_derivatives(m.vertex(j), sigma, k))
        with mpmath.workdps(40):
            ps = list(m.slice_range(j))
            ref = complex(mpmath.diff(lambda s: _mp_W(lam, ps, s), mpmath.mpf(sigma), k))
        worst = max(worst, abs(got - ref) / max(abs(ref), 1e-12))
    assert worst < 1e-6


def test_derivative_order_limit():
    v = SliceModel(2, 2, 0.1).vertex(1)
    with pytest.raises(DomainError):
        slice_vertex_derivatives(v, 0.0, 5)


@pytest.mark.parametrize("n", range(1, 7))
def test_two_level_tree_count(n):
    expected = 2 ** (n - 1) * n ** (n - 2) if n > 1 else 1
    assert len(enumerate_two_level_trees(n)) == expected


def test_two_level_tree_size_guard():
    with pytest.raises(SizeLimitError):
        enumerate_two_level_trees(7)


def test_jungle_rejects_fermionic_edge_inside_block():
    with pytest.raises(DomainError):
        TwoLevelJungle(3, ((0, 1), (1, 2)), ((0, 2),))


def test_fermionic_factor_examples():
    bos = TwoLevelJungle(2, ((0, 1),), ())
    f = fermionic_factor(bos, np.ones((2, 2)), slices=(1, 2))
    assert f.value == 1 and f.prefactor == 1
    f = fermionic_factor(bos, np.ones((2, 2)), slices=(2, 2))
    assert f.value == 0 and f.prefactor == 0
    fer = TwoLevelJungle(2, (), ((0, 1),))
    rng = np.random.default_rng(3)
    for y in rng.uniform(size=100):
        Y = np.array([[1.0, y], [y, 1.0]])
        f = fermionic_factor(fer, Y)
        assert all(abs(d) <= 1 for d in f.determinants)
        assert sorted(abs(d) for d in f.determinants) == pytest.approx([y, y])
        assert f.value == pytest.approx(-2 * y)
        assert fermionic_factor(fer, Y, slices=(1, 2)).value == 0


def test_fermionic_factor_rejects_bad_gram():
    fer = TwoLevelJungle(2, (), ((0, 1),))
    with pytest.raises(DomainError):
        fermionic_factor(fer, np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(DomainError):
        check_unit_gram(np.array([[2.0, 0.0], [0.0, 1.0]]))


def test_hadamard_bound_random_gram():
    rng = np.random.default_rng(4)
    jungles = [j for n in range(2, 6) for j in enumerate_two_level_trees(n) if j.fermionic]
    count = 0
    for _ in range(1000):
        jungle = jungles[int(rng.integers(len(jungles)))]
        if rng.uniform() < 0.5:
            Y = fermionic_covariance(jungle, rng.uniform(size=len(jungle.fermionic)))
        else:
            # Gram matrix of non-negative unit vectors, constant on bosonic blocks
            blocks = jungle.blocks()
            vecs = np.abs(rng.normal(size=(len(blocks), 4)))
            vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
            label = {v: b for b, blk in enumerate(blocks) for v in blk}
            idx = [label[v] for v in range(jungle.n)]
            Y = np.clip((vecs @ vecs.T)[np.ix_(idx, idx)], 0, 1)
            np.fill_diagonal(Y, 1.0)
        f = fermionic_factor(jungle, Y)
        assert all(abs(d) <= 1 + 1e-12 for d in f.determinants)
        count += len(f.determinants)
    assert count > 1000


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_fermionic_covariance_is_unit_gram(w):
    jungle = TwoLevelJungle(5, ((0, 1),), ((1, 2), (2, 3), (3, 4)))
    Y = fermionic_covariance(jungle, w)
    check_unit_gram(Y)
    assert Y[0, 1] == 1


def test_oracle_zero_coupling():
    assert oracle_logZ(SliceModel(2, 3, 0.0)) == 0


def test_oracle_split_invariance():
    m = SliceModel(2, 3, 0.5)
    a = oracle_logZ(m)
    b = oracle_logZ(m, splits=(-3.0, -0.7, 1.1, 4.0))
    assert abs(a - b) < 1e-11


def test_oracle_rejects_outside_domain():
    with pytest.raises(DomainError):
        oracle_logZ(SliceModel(2, 3, 1.2))
    with pytest.raises(DomainError):
        oracle_logZ(SliceModel(2, 3, 0.9 * cmath.exp(1j * math.pi / 8)))


@pytest.mark.parametrize("lam", [1.0, 0.6 * cmath.exp(1j * math.pi / 8)])
def test_oracle_uniform_in_cutoff(lam):
    vals = [oracle_logZ(SliceModel(2, j, lam)) for j in range(2, 13)]
    assert max(abs(v) for v in vals) < 1.0
    diffs = [abs(b - a) for a, b in zip(vals, vals[1:])]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))


def test_vertex_series_matches_oracle_at_small_coupling():
    m = SliceModel(2, 3, 0.1)
    c = vertex_series_coefficients(m, 4)
    assert abs(sum(c) - oracle_logZ(m)) < 1e-10


def test_truncated_sum_first_order_against_coupling_expansion():
    m = SliceModel(2, 4, 0.1)
    r = mlve_truncated_sum(m, 1)
    assert r.residual < 1e-4
    # the lam^2 coefficient of log Z is -sum 1/(2 p^2)
    c2 = -sum(1 / (2 * p * p) for p in range(1, m.N + 1))
    small = [mlve_truncated_sum(SliceModel(2, 4, lam), 1, with_oracle=False).value / lam**2 for lam in (0.004, 0.002)]
    extrapolated = (4 * small[1] - small[0]) / 3
    assert abs(extrapolated - c2) < 1e-8


def test_truncated_sum_zero_coupling_and_domain():
    r = mlve_truncated_sum(SliceModel(2, 3, 0.0), 2)
    assert r.value == 0 and r.residual == 0
    with pytest.raises(DomainError):
        mlve_truncated_sum(SliceModel(2, 3, 0.7), 1)
    with pytest.raises(DomainError):
        mlve_truncated_sum(SliceModel(2, 3, 0.2), 4)


def test_truncated_sum_improves_with_order():
    m = SliceModel(2, 4, 0.2)
    r1 = mlve_truncated_sum(m, 1)
    r2 = mlve_truncated_sum(m, 2)
    assert r2.residual < r1.residual
    assert r2.per_order[0] == r1.per_order[0]


@pytest.mark.parametrize("n", [1, 2])
def test_order_terms_match_vertex_series(n):
    m = SliceModel(2, 4, 0.3)
    ref = vertex_series_coefficients(m, n)[n - 1]
    assert abs(mlve_order_term(m, n) - ref) < 1e-10


def test_third_order_term_matches_vertex_series():
    m = SliceModel(2, 4, 0.2)
    ref = vertex_series_coefficients(m, 3)[2]
    assert abs(mlve_order_term(m, 3, gh_order=10) - ref) < 1e-10
