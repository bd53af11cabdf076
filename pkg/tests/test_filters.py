import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from fougmm.covmodel import FouModel
from fougmm.errors import DomainError, RankDeficient
from fougmm.filters import (Filter, FilterBank, FilterKind, b_coeffs, build_bank,
                            cross_covariance_coeffs, daubechies_filter, finite_difference_filter,
                            order_condition_violations)


def white_noise_lag(m: int) -> float:
    return 1.0 if m == 0 else 0.0


@pytest.mark.parametrize("order, length, expected", [
    (1, 2, [1, -1]),
    (2, 3, [1, -2, 1]),
    (3, 4, [1, -3, 3, -1]),
    (1, 4, [1, -1, 0, 0]),
])
def test_finite_difference_examples(order, length, expected):
    f = finite_difference_filter(order, length)
    assert_array_equal(f.coeffs, expected)
    assert f.order == order and f.kind is FilterKind.FINITE_DIFFERENCE


def test_finite_difference_rejects_short_padding():
    with pytest.raises(DomainError):
        finite_difference_filter(3, 3)


def test_order_zero_filter():
    f = finite_difference_filter(0, 3)
    assert_array_equal(f.coeffs, [1, 0, 0])
    assert_array_equal(b_coeffs(f), [1, 0, 0])


def test_filter_validates_moments():
    with pytest.raises(DomainError):
        Filter(np.array([1.0, -0.9]), 1)
    with pytest.raises(DomainError):
        Filter(np.array([1.0, -2.0, 1.0]), 1)  # really order 2
    with pytest.raises(DomainError):
        Filter(np.array([]), 0)
    with pytest.raises(DomainError):
        finite_difference_filter(2).padded(2)


def test_haar():
    f = daubechies_filter(1)
    assert_allclose(f.coeffs, np.array([1.0, -1.0]) / math.sqrt(2.0) * np.sign(f.coeffs[0]), rtol=1e-15)


def test_db2_against_closed_form():
    # db2 scaling filter: (1+sqrt3, 3+sqrt3, 3-sqrt3, 1-sqrt3) / (4 sqrt2)
    r3 = math.sqrt(3.0)
    h = np.array([1 + r3, 3 + r3, 3 - r3, 1 - r3]) / (4 * math.sqrt(2.0))
    g = (-1.0) ** np.arange(4) * h[::-1]
    f = daubechies_filter(2)
    assert_allclose(f.coeffs, g, atol=1e-14)
    q = np.arange(4)
    assert abs(f.coeffs.sum()) <= 1e-10 and abs((f.coeffs * q).sum()) <= 1e-10


@pytest.mark.parametrize("p", range(1, 11))
def test_daubechies_properties(p):
    f = daubechies_filter(p)
    assert f.order == p and len(f) == 2 * p
    assert_allclose(np.sum(f.coeffs ** 2), 1.0, rtol=1e-12)
    assert np.all(np.abs(f.moment_residuals()) <= 1e-10)
    # orthogonal to its own even shifts
    for s in range(1, p):
        assert abs(np.dot(f.coeffs[2 * s:], f.coeffs[:-2 * s])) <= 1e-12


@pytest.mark.parametrize("p", [0, 11])
def test_daubechies_unsupported(p):
    with pytest.raises(DomainError):
        daubechies_filter(p)


@given(st.integers(1, 12), st.integers(0, 4))
def test_finite_difference_moments(order, extra):
    f = finite_difference_filter(order, order + 1 + extra)
    q = np.arange(len(f), dtype=float)
    scale = np.abs(f.coeffs) @ q ** order
    for r in range(order):
        assert abs(f.coeffs @ q ** r) <= 1e-10 * max(1.0, np.abs(f.coeffs) @ q ** r)
    assert abs(f.coeffs @ q ** order) > 1e-10 * scale


@pytest.mark.parametrize("coeffs, expected", [
    ([1, -1], [2, -2]),
    ([1, -2, 1], [6, -8, 2]),
])
def test_b_coeffs_examples(coeffs, expected):
    order = len(coeffs) - 1
    assert_array_equal(b_coeffs(finite_difference_filter(order)), expected)


def test_gamma_white_noise_stub():
    f = finite_difference_filter(1)
    gamma = cross_covariance_coeffs(f, f)
    assert [gamma(k, white_noise_lag) for k in (-3, -2, -1, 0, 1, 2, 3)] == [0, 0, -1, 2, -1, 0, 0]


def test_gamma_vanishes_beyond_support():
    fi, fj = finite_difference_filter(2, 4), finite_difference_filter(3, 4)
    gamma = cross_covariance_coeffs(fi, fj)
    assert gamma(4, white_noise_lag) == 0.0 and gamma(-4, white_noise_lag) == 0.0
    assert gamma(-3, white_noise_lag) == -1.0


def _brute_gamma(ai, aj, k, rho_lag):
    return sum(ai[q] * aj[r] * rho_lag(abs(k - q + r)) for q in range(len(ai)) for r in range(len(aj)))


@pytest.mark.parametrize("orders", [(1, 2), (2, 3), (1, 3), (0, 2)])
def test_gamma_matches_brute_force_and_is_antisymmetric_in_lag(orders):
    model, theta, alpha = FouModel(), [0.7, 1.0, 1.0], 0.5
    r = model.rho_grid(theta, alpha, 40)
    rho_lag = lambda m: r[m]
    bank = FilterBank((finite_difference_filter(orders[0]), finite_difference_filter(orders[1])))
    fi, fj = bank.filters
    gij = cross_covariance_coeffs(fi, fj)
    gji = cross_covariance_coeffs(fj, fi)
    for k in range(-6, 7):
        assert_allclose(gij(k, rho_lag), _brute_gamma(fi.coeffs, fj.coeffs, k, rho_lag), rtol=1e-12, atol=1e-15)
        assert_allclose(gij(k, rho_lag), gji(-k, rho_lag), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("f", [finite_difference_filter(1), finite_difference_filter(3),
                               finite_difference_filter(0), daubechies_filter(3)])
@pytest.mark.parametrize("theta, alpha", [([0.55, 1.0, 1.0], 0.1), ([0.85, 1.1, 0.9], 0.5)])
def test_variance_identity(f, theta, alpha):
    r = FouModel().rho_grid(theta, alpha, len(f))
    a = f.coeffs
    direct = sum(a[q] * a[s] * r[abs(q - s)] for q in range(len(a)) for s in range(len(a)))
    assert_allclose(b_coeffs(f) @ r, direct, rtol=1e-12)
    assert_allclose(cross_covariance_coeffs(f, f)(0, lambda m: r[m]), direct, rtol=1e-12)


@given(st.lists(st.integers(1, 8), min_size=1, max_size=4), st.integers(-10 ** 6, 10 ** 6))
def test_constant_sequence_is_annihilated(orders, level):
    bank = build_bank(orders)
    x = np.full(30, float(level))
    for f in bank.filters:
        assert np.all(np.convolve(x, f.coeffs, "valid") == 0.0)


@given(st.integers(1, 8), st.floats(-50, 50))
def test_constant_sequence_non_integer_level(order, level):
    # exact up to rounding of the products a_q * level
    f = finite_difference_filter(order)
    out = np.convolve(np.full(30, level), f.coeffs, "valid")
    assert np.all(np.abs(out) <= 1e-14 * abs(level) * np.abs(f.coeffs).sum())


def test_bank_examples():
    bank = build_bank((1, 2, 3))
    assert bank.rank() == 3 and bank.span == 3 and bank.n_filters == 3
    assert bank.B_matrix.shape == (3, 4)
    assert_array_equal(bank.B_matrix[0], [2, -2, 0, 0])
    assert all(len(f) == 4 for f in bank.filters)
    with pytest.raises(RankDeficient) as exc:
        build_bank((1, 1, 1), p=3)
    assert exc.value.rank == 1
    single = build_bank((0,), p=1)
    assert single.rank() == 1


@given(st.sets(st.integers(1, 9), min_size=1, max_size=6))
def test_distinct_orders_have_full_rank(orders):
    bank = build_bank(sorted(orders), p=len(orders))
    assert bank.rank() == len(orders)


@given(st.sets(st.integers(1, 6), min_size=1, max_size=4))
def test_daubechies_bank_rank(orders):
    bank = build_bank(sorted(orders), kind="daubechies")
    assert bank.rank() == len(orders)
    assert bank.orders == tuple(sorted(orders))


def test_order_condition():
    assert order_condition_violations((1, 2, 3), 0.99) == []
    assert order_condition_violations((0, 1), 0.7) == []
    assert (0, 0) in order_condition_violations((0, 1), 0.8)
