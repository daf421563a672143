import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poolsearch.core import InvalidArgumentError, NumericIntegrityError, ResourceLimitError, SchemeParams
from poolsearch.dist import (
    MAX_N_BRUTE,
    MAX_N_PGF,
    PgfPoly,
    TestCountPmf,
    brute_force_counts,
    brute_force_pmf,
    cdf_dominates,
    cf_eval,
    pgf,
    pgf_pow2,
    pmf,
    sf_dominates,
)
from poolsearch.exact import moments


def P(n, q):
    return SchemeParams(n, q)


def test_pmf_two():
    d = pmf(P(2, 0.5))
    assert d.as_dict() == {1: 0.25, 2: 0.25, 3: 0.5}


def test_pmf_four_skips_two():
    for q in (0.1, 0.5, 0.9):
        d = pmf(P(4, q))
        assert d.probs[2] == 0
        assert set(d.support) == {1, 3, 4, 5, 6, 7}


@pytest.mark.parametrize("n", range(1, 11))
@pytest.mark.parametrize("q", [0.2, 0.5, 0.8])
def test_matches_enumeration(n, q):
    assert np.max(np.abs(pmf(P(n, q)).probs - brute_force_pmf(P(n, q)).probs)) <= 1e-12


def test_brute_force_counts_total():
    counts = brute_force_counts(6)
    assert sum(counts.values()) == 2**6
    assert counts[(1, 0)] == 1  # only the all-clean pattern is settled by one test
    with pytest.raises(ResourceLimitError):
        brute_force_counts(MAX_N_BRUTE + 1)


@pytest.mark.parametrize("n", [1, 3, 12, 100, 389, 4096, 5000])
@pytest.mark.parametrize("q", [0.3, 0.9])
def test_pmf_moments_match_exact(n, q):
    d = pmf(P(n, q))
    m = moments(P(n, q))
    assert d.probs.sum() == pytest.approx(1.0, abs=1e-9)
    assert d.mean() == pytest.approx(m.mean, rel=1e-8)
    assert d.variance() == pytest.approx(m.variance, rel=1e-8, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=300), st.floats(min_value=0, max_value=1))
def test_pmf_support_and_mass(n, q):
    d = pmf(P(n, q))
    assert len(d.probs) == 2 * n
    assert d.probs[0] == 0
    assert np.all(d.probs >= 0)
    assert d.probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_degenerate_ends():
    assert pmf(P(9, 1.0)).as_dict() == {1: 1.0}
    assert pmf(P(9, 0.0)).as_dict() == {17: 1.0}


@pytest.mark.parametrize("n", range(0, 9))
def test_pgf_pow2_matches_general(n):
    a = pgf_pow2(n, 0.7).coeffs
    b = pgf(P(2**n, 0.7)).coeffs
    assert np.max(np.abs(a - b)) < 1e-15


def test_pgf_evaluation():
    g = pgf(P(5, 0.6))
    assert g(1.0) == pytest.approx(1.0)
    h = 1e-6
    assert (g(1 + h) - g(1 - h)) / (2 * h) == pytest.approx(moments(P(5, 0.6)).mean, rel=1e-6)
    assert g.degree == 9


def test_caps():
    with pytest.raises(ResourceLimitError):
        pmf(P(MAX_N_PGF + 1, 0.5))
    with pytest.raises(ResourceLimitError):
        pgf_pow2(21, 0.5)


def test_checked_rejects_negative_mass():
    with pytest.raises(NumericIntegrityError):
        PgfPoly.checked(np.array([0.0, 1.1, -0.1]))
    with pytest.raises(NumericIntegrityError):
        PgfPoly.checked(np.array([0.0, 0.5, 0.4]))
    g = PgfPoly.checked(np.array([0.0, 1.0, -1e-15]))
    assert g.n_clamped == 1 and g.coeffs[2] == 0


@pytest.mark.parametrize("n", [1, 2, 7, 64])
def test_cf(n):
    params = P(n, 0.55)
    assert cf_eval(params, 0.0) == pytest.approx(1.0)
    d = pmf(params)
    for t in (0.3, 1.7, -2.2):
        direct = sum(p * cmath.exp(1j * t * k) for k, p in enumerate(d.probs))
        assert abs(cf_eval(params, t) - direct) < 1e-12
    assert abs(cf_eval(params, 0.9)) <= 1 + 1e-12


def test_cdf_sf_and_serialization(tmp_path):
    d = pmf(P(6, 0.4))
    assert d.cdf()[-1] == pytest.approx(1.0)
    assert np.allclose(d.cdf() + d.sf(), 1.0)
    back = TestCountPmf.from_json(d.to_json())
    assert back == d
    obj = json.loads(d.to_json(precision=3))
    assert obj["n"] == 6 and len(obj["pmf"]) == 12
    lines = d.to_csv().splitlines()
    assert lines[0] == "t,probability" and len(lines) == 13
    assert d.standardized_moment(2) == pytest.approx(1.0)
    assert math.isnan(pmf(P(6, 1.0)).standardized_moment(3))


def test_pmf_shape_validation():
    with pytest.raises(InvalidArgumentError):
        TestCountPmf(3, 0.5, np.zeros(5))


@pytest.mark.parametrize("q", [0.3, 0.7, 0.9])
def test_stochastically_increasing_in_n(q):
    prev = pmf(P(1, q))
    for n in range(2, 40):
        cur = pmf(P(n, q))
        assert cdf_dominates(prev, cur)
        prev = cur


def test_dominance_is_strict_somewhere():
    assert not cdf_dominates(pmf(P(8, 0.5)), pmf(P(3, 0.5)))


def test_cdf_dominates_requires_same_q():
    with pytest.raises(InvalidArgumentError):
        cdf_dominates(pmf(P(4, 0.5)), pmf(P(4, 0.6)))


@pytest.mark.parametrize("n", [2, 5, 12, 48])
def test_monotone_in_q(n):
    grid = np.linspace(0.05, 0.95, 10)
    for q_small, q_big in zip(grid[:-1], grid[1:]):
        # more likely clean means fewer tests
        assert sf_dominates(pmf(P(n, q_big)), pmf(P(n, q_small)))
