import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poolsearch.core import DegenerateDistributionError, InvalidArgumentError, SchemeParams
from poolsearch.exact import moments
from poolsearch.sim import (
    WORKERS_ENV,
    ContaminationPattern,
    SimConfig,
    count_tests,
    count_tests_batch,
    default_workers,
    lln_convergence,
    normality_diagnostic,
    run_batch,
    run_scheme,
    sample_patterns,
)

from reference_values import EXAMPLE_PATTERNS


@pytest.mark.parametrize("text, tests", EXAMPLE_PATTERNS)
def test_reference_patterns(text, tests):
    assert count_tests(ContaminationPattern.from_string(text)) == tests


def test_run_scheme_finds_contaminated():
    pattern = ContaminationPattern.from_string("0100110")
    trace = run_scheme(pattern)
    assert trace.contaminated == (1, 4, 5)
    assert pattern.n_contaminated == 3


@pytest.mark.parametrize("n", range(1, 9))
def test_count_extremes(n):
    assert count_tests([False] * n) == 1
    assert count_tests([True] * n) == 2 * n - 1


@pytest.mark.parametrize("n", range(1, 11))
def test_batch_counter_matches_procedure(n):
    bits = np.array(list(itertools.product((False, True), repeat=n)), dtype=bool)
    expected = np.array([count_tests(row) for row in bits])
    assert np.array_equal(count_tests_batch(bits), expected)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=200))
def test_batch_counter_random_patterns(flags):
    assert count_tests_batch(np.array([flags]))[0] == count_tests(flags)


def test_empty_pattern_rejected():
    with pytest.raises(InvalidArgumentError):
        ContaminationPattern([])
    with pytest.raises(InvalidArgumentError):
        count_tests_batch(np.zeros(5, dtype=bool))


def test_sample_patterns_slices_are_consistent():
    params = SchemeParams(7, 0.6)
    whole = sample_patterns(params, 11, 0, 40)
    for a, b in [(0, 3), (5, 17), (13, 40), (39, 40)]:
        assert np.array_equal(sample_patterns(params, 11, a, b), whole[a:b])
    assert not np.array_equal(whole, sample_patterns(params, 12, 0, 40))


def test_sample_patterns_extremes():
    assert not sample_patterns(SchemeParams(5, 1.0), 3, 0, 10).any()
    assert sample_patterns(SchemeParams(5, 0.0), 3, 0, 10).all()


def test_sample_patterns_rate():
    bits = sample_patterns(SchemeParams(100, 0.8), 5, 0, 2000)
    rate = bits.mean()
    assert abs(rate - 0.2) < 5 * math.sqrt(0.16 / bits.size)


def test_run_batch_deterministic_and_worker_free():
    params = SchemeParams(37, 0.85)
    a = run_batch(SimConfig(params, 120_000, 99, worker_hint=1))
    b = run_batch(SimConfig(params, 120_000, 99, worker_hint=4))
    assert a == b
    assert sum(a.histogram.values()) == 120_000
    m = moments(params)
    assert abs(a.empirical_mean - m.mean) < 4 * a.standard_error
    assert a.empirical_variance == pytest.approx(m.variance, rel=0.03)


def test_run_batch_serialization():
    res = run_batch(SimConfig(SchemeParams(4, 0.5), 500, 1))
    d = res.to_dict()
    json.dumps(d)
    assert d["trials"] == 500 and sum(d["histogram"].values()) == 500
    assert res.histogram_rows() == sorted(res.histogram.items())


def test_deterministic_batch_has_no_shape():
    res = run_batch(SimConfig(SchemeParams(6, 1.0), 50, 1))
    assert res.histogram == {1: 50}
    assert math.isnan(res.standardized_m3)
    assert res.to_dict()["m3"] is None


@pytest.mark.parametrize("kwargs", [dict(trials=0), dict(seed=-1), dict(seed=2**64), dict(worker_hint=0)])
def test_config_validation(kwargs):
    base = dict(params=SchemeParams(4, 0.5), trials=10, seed=1, worker_hint=1)
    base.update(kwargs)
    with pytest.raises(InvalidArgumentError):
        SimConfig(**base)


def test_default_workers(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert default_workers() == 1
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert default_workers() == 3
    assert SimConfig(SchemeParams(4, 0.5), 10, 1).worker_hint == 3
    monkeypatch.setenv(WORKERS_ENV, "zero")
    with pytest.raises(InvalidArgumentError):
        default_workers()


def test_normality_report():
    cfg = SimConfig(SchemeParams(256, 0.9), 20_000, 3)
    rep = normality_diagnostic(cfg)
    assert rep.moments[0] == pytest.approx(0, abs=5 * rep.std_errors[0])
    assert rep.moments[1] == pytest.approx(1, abs=5 * rep.std_errors[1])
    assert len(rep.rows()) == 4 and all(z >= 0 for z in rep.z_scores)
    assert rep.beta_value is not None and rep.beta_ratio > 0
    json.dumps(rep.to_dict())
    assert normality_diagnostic(SimConfig(SchemeParams(12, 0.9), 100, 3)).beta_value is None


def test_normality_degenerate():
    with pytest.raises(DegenerateDistributionError):
        normality_diagnostic(SimConfig(SchemeParams(8, 0.0), 10, 1))


def test_lln_deterministic_case():
    rows = lln_convergence(0.0, [0, 1, 3, 6], trials=5, seed=1)
    for r in rows:
        assert r.mean_ratio == (2 ** (r.n + 1) - 1) / 2**r.n
        assert r.gap == pytest.approx(2.0**-r.n)
        assert r.std_error == 0


def test_lln_approaches_alpha1():
    rows = lln_convergence(0.9, [4, 10], trials=4000, seed=2)
    assert rows[1].gap < rows[0].gap + 3 * rows[1].std_error
