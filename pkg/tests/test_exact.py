from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poolsearch.core import InvalidArgumentError, ResourceLimitError, SchemeParams
from poolsearch.exact import (
    MAX_N_POLY,
    SparseQPoly,
    mean_explicit,
    mean_explicit_sequence,
    mean_poly,
    mean_pow2_closed,
    mean_recursive,
    moments,
    variance_delta_explicit,
    variance_pow2_closed,
    variance_recursive,
)

from reference_values import MEAN_POLYS

# fitted once over N <= 10**4 at q = 0.9 (observed maximum 2.572 at N = 15), then frozen
HALF_SIZE_C = 2.6


def P(n, q):
    return SchemeParams(n, q)


class TestSparseQPoly:
    def test_arithmetic(self):
        a = SparseQPoly({0: 1, 2: -1})
        b = SparseQPoly({1: 2})
        assert a + b == SparseQPoly({0: 1, 1: 2, 2: -1})
        assert a - a == 0
        assert (a * b).terms == {1: 2, 3: -2}
        assert 3 * b == SparseQPoly({1: 6})
        assert -a == SparseQPoly({0: -1, 2: 1})
        assert 1 - a == SparseQPoly({2: 1})

    def test_zero_terms_dropped(self):
        p = SparseQPoly({0: 0, 3: 5, 4: 0})
        assert p.terms == {3: 5} and len(p) == 1
        assert SparseQPoly().degree == -1 and SparseQPoly().leading_coeff() == 0

    def test_eval_and_str(self):
        p = mean_poly(5)
        assert str(p) == "9 - 3q - 3q^2 - q^3 - q^5"
        assert p(Fraction(1, 2)) == 9 - Fraction(3, 2) - Fraction(3, 4) - Fraction(1, 8) - Fraction(1, 32)
        assert str(SparseQPoly()) == "0"
        assert str(SparseQPoly({1: -1})) == "-q"

    def test_hash_and_iter(self):
        assert hash(mean_poly(6)) == hash(mean_poly(6))
        assert list(SparseQPoly({3: 1, 0: 2})) == [(0, 2), (3, 1)]

    def test_negative_exponent(self):
        with pytest.raises(InvalidArgumentError):
            SparseQPoly({-1: 1})


@pytest.mark.parametrize("n", sorted(MEAN_POLYS))
def test_mean_poly_reference(n):
    assert mean_poly(n).terms == MEAN_POLYS[n]


@settings(max_examples=60)
@given(st.integers(min_value=2, max_value=3000))
def test_mean_poly_shape(n):
    p = mean_poly(n)
    assert p.coeff(0) == 2 * n - 1
    assert all(c < 0 for e, c in p if e > 0)
    assert p.degree == n and p.leading_coeff() == -1
    # mu(N; 1) = 1 and mu(N; 0) = 2N - 1
    assert p.coefficient_sum() == 1


def test_mean_poly_cap():
    with pytest.raises(ResourceLimitError):
        mean_poly(MAX_N_POLY + 1)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 12, 48, 389, 1000, 1024])
@pytest.mark.parametrize("q", [0.0, 0.2, 0.5, 0.9, 1.0])
def test_mean_routes_agree(n, q):
    mu = mean_recursive(P(n, q))
    assert mu == pytest.approx(mean_poly(n)(q), rel=1e-12, abs=1e-12)
    assert mu == pytest.approx(mean_explicit(n, q), rel=1e-12, abs=1e-12)
    assert mu == pytest.approx(mean_explicit_sequence(n, q)[-1], rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("n", range(0, 12))
@pytest.mark.parametrize("q", [0.1, 0.5, 0.95])
def test_pow2_closed_forms(n, q):
    m = moments(P(2**n, q))
    assert mean_pow2_closed(n, q) == pytest.approx(m.mean, rel=1e-12)
    assert variance_pow2_closed(n, q) == pytest.approx(m.variance, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("n", [0, 1, 5, 20])
def test_pow2_extremes(n):
    assert mean_pow2_closed(n, 0.0) == 2 ** (n + 1) - 1
    assert mean_pow2_closed(n, 1.0) == 1
    assert variance_pow2_closed(n, 0.0) == 0
    assert variance_pow2_closed(n, 1.0) == 0


def test_exact_fraction_routes():
    q = Fraction(7, 10)
    for n in (2, 3, 12, 17):
        v = variance_recursive(P(n, q))
        assert isinstance(v, Fraction)
        assert variance_delta_explicit(n, q) == v
        assert mean_explicit(n, q) == mean_recursive(P(n, q)) == mean_poly(n)(q)
    assert variance_pow2_closed(4, q) == variance_recursive(P(16, q))


@pytest.mark.parametrize("n", [1, 2, 3, 7, 64, 100, 777])
@pytest.mark.parametrize("q", [0.3, 0.8])
def test_variance_delta_matches_recursion(n, q):
    assert variance_delta_explicit(n, q) == pytest.approx(variance_recursive(P(n, q)), rel=1e-10, abs=1e-13)


def test_small_cases():
    q = 0.37
    assert moments(P(1, q)).mean == 1 and moments(P(1, q)).variance == 0
    assert mean_recursive(P(2, q)) == pytest.approx(3 - q - q * q)
    assert variance_recursive(P(2, q)) == pytest.approx(q * (1 - q) * (q * q + 3 * q + 1))


def test_variance_non_negative_and_degenerate_ends():
    for n in (2, 5, 33, 256):
        for q in np.linspace(0, 1, 21):
            assert variance_recursive(P(n, q)) >= -1e-9
        assert variance_recursive(P(n, 0.0)) == 0
        assert variance_recursive(P(n, 1.0)) == 0


def test_half_size_variance_ratio():
    q = 0.9
    mu, var = [0.0, 1.0], [0.0, 0.0]
    for s in range(2, 10**4 + 1):
        lo, hi = s // 2, s - s // 2
        mu.append(mu[lo] + mu[hi] - q**s - q**lo + 1)
        qs, ql = q**s, q**lo
        var.append(var[lo] + var[hi] + 2 * mu[s] * qs + 2 * mu[lo] * ql + qs * qs - ql * ql - 3 * qs - ql)
    for n in (2, 3, 15, 100, 1001, 10**4):
        assert var[n] == pytest.approx(variance_recursive(P(n, q)), rel=1e-12)
    worst = max(abs(var[s // 2] / var[s] - 0.5) * s for s in range(2, 10**4 + 1))
    assert worst <= HALF_SIZE_C


def test_huge_n_runs():
    # the lattice keeps this at a few hundred entries
    m = moments(P(3 * 2**40 + 17, 0.999))
    assert m.mean > 0 and m.variance > 0
    assert m.std == pytest.approx(m.variance**0.5)


def test_argument_validation():
    with pytest.raises(InvalidArgumentError):
        mean_recursive((4, 0.5))
    with pytest.raises(InvalidArgumentError):
        mean_pow2_closed(-1, 0.5)
    with pytest.raises(InvalidArgumentError):
        mean_explicit(3, 1.2)
