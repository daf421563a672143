"""Exact mean and variance of the number of tests T(N; q).

Several independent routes are provided so they can check each other:

* halving recursions for arbitrary N (``mean_recursive``, ``variance_recursive``),
* closed sums valid for N = 2**n (``mean_pow2_closed``, ``variance_pow2_closed``),
* telescoped explicit sums for arbitrary N (``mean_explicit``,
  ``variance_delta_explicit``),
* the mean as an integer polynomial in q (``mean_poly``).

Numeric routes work with floats, and also with :class:`fractions.Fraction`
inputs, in which case the result is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .core import (
    MAX_N_RECURSIVE,
    InvalidArgumentError,
    ResourceLimitError,
    SchemeParams,
    _check_probability,
    _check_size,
    size_lattice,
)

__all__ = [
    "SparseQPoly",
    "MomentPair",
    "MAX_N_POLY",
    "mean_recursive",
    "mean_poly",
    "mean_pow2_closed",
    "mean_explicit",
    "mean_explicit_sequence",
    "variance_recursive",
    "variance_pow2_closed",
    "variance_delta_explicit",
    "moments",
    "mean_table",
]

MAX_N_POLY = 2**20


class SparseQPoly:
    """Polynomial in q with integer coefficients, stored as ``{exponent: coeff}``.

    Zero coefficients are never stored, so two polynomials are equal exactly
    when their term maps are equal.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[int, int] = {}
        for e, c in items:
            if e < 0:
                raise InvalidArgumentError(f"negative exponent {e}")
            acc[e] = acc.get(e, 0) + int(c)
        self._terms = {e: c for e, c in acc.items() if c != 0}

    @classmethod
    def constant(cls, c: int) -> "SparseQPoly":
        return cls({0: c})

    @classmethod
    def monomial(cls, e: int, c: int = 1) -> "SparseQPoly":
        return cls({e: c})

    @property
    def terms(self) -> dict[int, int]:
        return dict(self._terms)

    @property
    def degree(self) -> int:
        """Degree of the polynomial; -1 for the zero polynomial."""
        return max(self._terms, default=-1)

    def coeff(self, e: int) -> int:
        return self._terms.get(e, 0)

    def leading_coeff(self) -> int:
        return self._terms[self.degree] if self._terms else 0

    def coefficient_sum(self) -> int:
        return sum(self._terms.values())

    def _combine(self, other, sign):
        if isinstance(other, int):
            other = SparseQPoly.constant(other)
        if not isinstance(other, SparseQPoly):
            return NotImplemented
        acc = dict(self._terms)
        for e, c in other._terms.items():
            acc[e] = acc.get(e, 0) + sign * c
        return SparseQPoly(acc)

    def __add__(self, other):
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return SparseQPoly({e: -c for e, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, int):
            return SparseQPoly({e: c * other for e, c in self._terms.items()})
        if not isinstance(other, SparseQPoly):
            return NotImplemented
        acc: dict[int, int] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                acc[e1 + e2] = acc.get(e1 + e2, 0) + c1 * c2
        return SparseQPoly(acc)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, int):
            other = SparseQPoly.constant(other)
        if not isinstance(other, SparseQPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __call__(self, q):
        return sum((c * q**e for e, c in self._terms.items()), 0)

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        """Yield ``(exponent, coefficient)`` pairs in increasing exponent order."""
        return iter(sorted(self._terms.items()))

    def __repr__(self):
        return f"SparseQPoly({dict(sorted(self._terms.items()))!r})"

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in sorted(self._terms.items()):
            mag = abs(c)
            if e == 0:
                body = str(mag)
            else:
                var = "q" if e == 1 else f"q^{e}"
                body = var if mag == 1 else f"{mag}{var}"
            if not parts:
                parts.append(body if c > 0 else f"-{body}")
            else:
                parts.append(f"{'+' if c > 0 else '-'} {body}")
        return " ".join(parts)


@dataclass(frozen=True)
class MomentPair:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return float(self.variance) ** 0.5


def _unpack(params: SchemeParams, cap: int = MAX_N_RECURSIVE):
    if not isinstance(params, SchemeParams):
        raise InvalidArgumentError(f"expected SchemeParams, got {type(params).__name__}")
    if params.n_samples > cap:
        raise ResourceLimitError(f"N = {params.n_samples} exceeds the cap {cap}")
    return params.n_samples, params.q_clean


def mean_table(n: int, q) -> dict[int, object]:
    """Map every size reachable from ``n`` to its expected test count."""
    mu = {}
    for s in size_lattice(n):
        if s == 1:
            mu[s] = 1 if isinstance(q, Fraction) else 1.0
            continue
        lo, hi = s // 2, s - s // 2
        mu[s] = mu[lo] + mu[hi] - q**s - q**lo + 1
    return mu


def _variance_table(n: int, q, mu: dict[int, object]) -> dict[int, object]:
    var = {}
    for s in size_lattice(n):
        if s == 1:
            var[s] = 0 if isinstance(q, Fraction) else 0.0
            continue
        lo, hi = s // 2, s - s // 2
        qs, qlo = q**s, q**lo
        var[s] = (
            var[lo] + var[hi]
            + 2 * mu[s] * qs + 2 * mu[lo] * qlo
            + qs * qs - qlo * qlo - 3 * qs - qlo
        )
    return var


def mean_recursive(params: SchemeParams):
    """Expected number of tests via mu(N) = mu(lo) + mu(hi) - q^N - q^lo + 1, mu(1) = 1."""
    n, q = _unpack(params)
    return mean_table(n, q)[n]


def variance_recursive(params: SchemeParams):
    """Variance of the test count via the halving recursion, with sigma^2(1) = 0."""
    n, q = _unpack(params)
    mu = mean_table(n, q)
    return _variance_table(n, q, mu)[n]


def moments(params: SchemeParams) -> MomentPair:
    n, q = _unpack(params)
    mu = mean_table(n, q)
    return MomentPair(mu[n], _variance_table(n, q, mu)[n])


def mean_poly(n: int) -> SparseQPoly:
    """The expected test count as an exact integer polynomial in q.

    >>> str(mean_poly(5))
    '9 - 3q - 3q^2 - q^3 - q^5'
    """
    _check_size(n, "N")
    if n > MAX_N_POLY:
        raise ResourceLimitError(f"N = {n} exceeds the polynomial cap {MAX_N_POLY}")
    polys: dict[int, SparseQPoly] = {}
    for s in size_lattice(n):
        if s == 1:
            polys[s] = SparseQPoly.constant(1)
            continue
        lo, hi = s // 2, s - s // 2
        step = SparseQPoly({0: 1, s: -1}) - SparseQPoly.monomial(lo)
        polys[s] = polys[lo] + polys[hi] + step
    return polys[n]


def _pow2_partial_sums(n: int, q):
    """Yield ``(k, q^(2^(k-1)), q^(2^k))`` for k = 1..n by repeated squaring."""
    prev = q
    for k in range(1, n + 1):
        cur = prev * prev
        yield k, prev, cur
        prev = cur


def mean_pow2_closed(n: int, q):
    """E[W_n] for N = 2**n from the closed sum over squared powers of q."""
    _check_size(n, "n", minimum=0)
    _check_probability(q)
    total = 0
    for k, half, full in _pow2_partial_sums(n, q):
        total += (full + half) / 2**k
    return 2 ** (n + 1) - 1 - 2**n * total


def _eps_mu(m: int, q):
    return q ** (m // 2) - q ** (m - m // 2) + q**m - q ** (m + 1)


def mean_explicit_sequence(n_max: int, q) -> list:
    """``[mu(1), ..., mu(n_max)]`` from the telescoped explicit formula.

    Each increment mu(n+1) - mu(n) equals 2 - q - q^2 plus a sum of eps terms
    along the floor-halving orbit of n; no value of mu itself is reused.
    """
    _check_size(n_max, "N")
    _check_probability(q)
    base = 2 - q - q * q
    eps_cache: dict[int, object] = {}
    out = [1 if isinstance(q, Fraction) else 1.0]
    mu = out[0]
    for n in range(1, n_max):
        inner = 0
        m = n
        while m >= 2:
            e = eps_cache.get(m)
            if e is None:
                e = eps_cache[m] = _eps_mu(m, q)
            inner += e
            m >>= 1
        mu = mu + base + inner
        out.append(mu)
    return out


def mean_explicit(n: int, q):
    """mu(N) = 2N - 1 - (N-1)q - (N-1)q^2 + double sum of eps terms."""
    _check_size(n, "N")
    _check_probability(q)
    double_sum = 0
    eps_cache: dict[int, object] = {}
    for j in range(2, n):
        m = j
        while m >= 2:
            e = eps_cache.get(m)
            if e is None:
                e = eps_cache[m] = _eps_mu(m, q)
            double_sum += e
            m >>= 1
    return 2 * n - 1 - (n - 1) * q - (n - 1) * q * q + double_sum


def variance_pow2_closed(n: int, q):
    """Var[W_n] for N = 2**n from the closed double sum."""
    _check_size(n, "n", minimum=0)
    _check_probability(q)
    if q == 0 or q == 1:
        # the closed sums cancel to 0 here, but only up to roundoff of order n*2^n
        return q * 0
    s_a = s_b = s_ac = 0
    c = 0
    for k, half, full in _pow2_partial_sums(n, q):
        a = 2 * full + half
        b = full * full + full * half - 5 * full - 3 * half
        c += (full + half) / 2**k
        s_a += a
        s_b += b / 2**k
        s_ac += a * c
    return 2 ** (n + 1) * s_a + 2**n * s_b - 2**n * s_ac


def _eps_sigma(m: int, q, mu) -> object:
    lo, hi = m // 2, m - m // 2
    qm, qlo, qhi = q**m, q**lo, q**hi
    return (
        2 * (mu[m + 1] * q - mu[m]) * qm
        + 2 * mu[hi] * qhi
        - 2 * mu[lo] * qlo
        + qlo - qhi + qlo * qlo - qhi * qhi
        + (3 - qm - qm * q) * qm * (1 - q)
    )


def variance_delta_explicit(n: int, q):
    """sigma^2(N) by summing the first differences Delta_sigma(1..N-1).

    Each difference is Delta_sigma(1) plus eps terms along the floor-halving
    orbit; the eps terms consume means only, never variances.
    """
    _check_size(n, "N")
    _check_probability(q)
    exact = isinstance(q, Fraction)
    if n == 1:
        return Fraction(0) if exact else 0.0
    mu = [None, Fraction(1) if exact else 1.0]
    for s in range(2, n + 1):
        lo, hi = s // 2, s - s // 2
        mu.append(mu[lo] + mu[hi] - q**s - q**lo + 1)
    delta1 = q * (1 - q) * (q * q + 3 * q + 1)
    eps = {}
    total = 0
    for j in range(1, n):
        d = delta1
        m = j
        while m >= 2:
            e = eps.get(m)
            if e is None:
                e = eps[m] = _eps_sigma(m, q, mu)
            d += e
            m >>= 1
        total += d
    return total
