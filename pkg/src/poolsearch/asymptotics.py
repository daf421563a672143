"""Limit constants of the scheme and the break-even thresholds against one-by-one testing.

Every series here runs over powers q^(2^k), so after K terms the neglected
part is bounded by a multiple of y = q^(2^K). Using y^(2^j) <= y^(j+1),

    sum_{k >= K} q^(2^k) <= y / (1 - y),

and terms carrying an extra 1/2^k factor are bounded by y * 2^-K. Each
:class:`SeriesValue` stores the bound it actually certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .core import DomainError, InvalidArgumentError, _check_probability, _check_size
from . import exact
from .core import SchemeParams

__all__ = [
    "SeriesValue",
    "ThresholdResult",
    "BreakevenRow",
    "alpha1",
    "alpha1_functional_residual",
    "alphaM",
    "beta",
    "threshold_qn",
    "threshold_sequence",
    "threshold_q_infinity",
    "breakeven_report",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-15
_MAX_TERMS = 200


@dataclass(frozen=True)
class SeriesValue:
    value: float
    tail_bound: float
    terms_used: int

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class ThresholdResult:
    """Break-even clean probability; ``index`` is n, or ``math.inf`` for the limit."""

    index: float
    q_star: float
    bracket_width: float


@dataclass(frozen=True)
class BreakevenRow:
    n: int
    ratio: float
    beats_one_by_one: bool


def _check_series_q(q) -> float:
    _check_probability(q)
    if q == 1:
        raise DomainError("the series diverge or degenerate at q = 1; its limit values are not computed")
    return float(q)


def _check_tol(tol: float) -> None:
    if not tol > 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol!r}")


def _geometric_tail(y: float) -> float:
    return y / (1.0 - y) if y < 1.0 else math.inf


def alpha1(q: float, tol: float = DEFAULT_TOL) -> SeriesValue:
    """Limit of E[W_n] / 2**n: 2 - q/2 - (3/2) sum_{k>=1} q^(2^k) / 2^k."""
    q = _check_series_q(q)
    _check_tol(tol)
    s = 0.0
    x = q
    k = 0
    while True:
        # after k terms, remaining terms are <= (3/2) q^(2^(k+1)) 2^-k in total
        tail = 1.5 * (x * x) * 2.0**-k
        if tail <= tol or k >= _MAX_TERMS:
            break
        k += 1
        x = x * x
        s += x / 2.0**k
    return SeriesValue(2.0 - q / 2.0 - 1.5 * s, tail, max(k, 1))


def alpha1_functional_residual(q: float, tol: float = DEFAULT_TOL) -> float:
    """alpha1(q^2) - 2 alpha1(q) - q^2 - q + 2, which vanishes identically."""
    q = _check_series_q(q)
    return alpha1(q * q, tol).value - 2.0 * alpha1(q, tol).value - q * q - q + 2.0


def alphaM(m: int, q: float, tol: float = DEFAULT_TOL) -> SeriesValue:
    """Limit of E[T(2**n M)] / (2**n M) for odd M."""
    _check_size(m, "M")
    if m % 2 == 0:
        raise InvalidArgumentError(f"M must be odd, got {m}")
    q = _check_series_q(q)
    _check_tol(tol)
    mu_m = float(exact.mean_recursive(SchemeParams(m, q)))
    s = 0.0
    half = q**m
    k = 0
    while True:
        # remaining terms (q^(2^j M) + q^(2^(j-1) M)) / (2^j M), j > k, total <= 2 q^(2^k M) 2^-k / M
        tail = 2.0 * half * 2.0**-k / m
        if tail <= tol or k >= _MAX_TERMS:
            break
        k += 1
        full = half * half
        s += (full + half) / (2.0**k * m)
        half = full
    return SeriesValue((mu_m + 1.0) / m - s, tail, max(k, 1))


def beta(q: float, tol: float = DEFAULT_TOL, form: str = "c") -> SeriesValue:
    """Limit of Var[W_n] / 2**n.

    ``form="c"`` sums
        q(q+1)/2 + (6 - 3q/2) S1 - (17/2) S2 - (3/2) S3,
    ``form="b"`` sums the algebraically equal grouping
        (2 - q/2) sum a_k - sum (q^(2^(k+1)) + 5 q^(2^k) + 3 q^(2^(k-1))) / 2^k - (3/2) S3,
    with S1 = sum q^(2^k), S2 = sum q^(2^k)/2^k, a_k = 2 q^(2^k) + q^(2^(k-1)) and
    S3 = sum_k a_k sum_{j<k} q^(2^j)/2^j (all k, j >= 1).
    """
    if form not in ("b", "c"):
        raise InvalidArgumentError(f"form must be 'b' or 'c', got {form!r}")
    q = _check_series_q(q)
    _check_tol(tol)
    s1 = s2 = s3 = 0.0
    sa = sb = 0.0
    inner = 0.0  # sum_{j<k} q^(2^j) / 2^j
    half = q  # q^(2^(k-1))
    k = 0
    while True:
        y = half * half  # q^(2^(k+1)) bounds every neglected power
        geo = _geometric_tail(y)
        inner_bound = inner + y * 2.0**-k + half * 2.0**-k
        s3_tail = 3.0 * inner_bound * _geometric_tail(half)
        if form == "c":
            tail = (6.0 - 1.5 * q) * geo + 8.5 * y * 2.0**-k + 1.5 * s3_tail
        else:
            tail = (2.0 - q / 2.0) * 3.0 * _geometric_tail(half) + 9.0 * _geometric_tail(half) * 2.0**-k + 1.5 * s3_tail
        if (tail <= tol and k >= 1) or k >= _MAX_TERMS:
            break
        k += 1
        full = half * half
        a = 2.0 * full + half
        s3 += a * inner
        inner += full / 2.0**k
        s1 += full
        s2 += full / 2.0**k
        sa += a
        sb += (full * full + 5.0 * full + 3.0 * half) / 2.0**k
        half = full
    if form == "c":
        value = q * (q + 1.0) / 2.0 + (6.0 - 1.5 * q) * s1 - 8.5 * s2 - 1.5 * s3
    else:
        value = (2.0 - q / 2.0) * sa - sb - 1.5 * s3
    return SeriesValue(value, tail, k)


def _bisect(f: Callable[[float], float], lo: float, hi: float, width: float) -> tuple[float, float]:
    """Root of an increasing f with f(lo) < 0 < f(hi); returns (midpoint, final width)."""
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), hi - lo


def threshold_qn(n: int, width: float = 1e-12) -> ThresholdResult:
    """Unique q in (0, 1) where E[W_n] = 2**n, i.e. expected tests equal N = 2**n.

    Solved in the normalized form sum_{k=1}^n (q^(2^k) + q^(2^(k-1))) / 2^k = 1 - 2^-n,
    whose left side is increasing in q.
    """
    _check_size(n, "n")
    target = 1.0 - 2.0**-n

    def f(q: float) -> float:
        s = 0.0
        half = q
        for k in range(1, n + 1):
            full = half * half
            s += (full + half) / 2.0**k
            half = full
        return s - target

    q_star, w = _bisect(f, 0.0, 1.0, width)
    return ThresholdResult(n, q_star, w)


def threshold_sequence(n_max: int, width: float = 1e-12) -> list[ThresholdResult]:
    return [threshold_qn(n, width) for n in range(1, n_max + 1)]


def threshold_q_infinity(tol: float = 1e-12) -> ThresholdResult:
    """Root of alpha1(q) = 1, the limit of the break-even thresholds.

    A bisection step is only taken when |alpha1(mid) - 1| exceeds the
    certified tail bound, so each sign decision is rigorous with respect to
    truncation.
    """
    _check_tol(tol)
    lo, hi = 0.0, 1.0 - 1e-9
    series_tol = min(tol, 1e-15) * 1e-2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        a = alpha1(mid, series_tol)
        gap = a.value - 1.0
        if abs(gap) <= a.tail_bound:
            # truncation cannot decide the sign: the root is within float resolution of mid
            lo = hi = mid
            break
        if gap > 0:  # alpha1 is decreasing, so the root lies above mid
            lo = mid
        else:
            hi = mid
    return ThresholdResult(math.inf, 0.5 * (lo + hi), hi - lo)


def breakeven_report(q: float, n_max: int) -> list[BreakevenRow]:
    """E[W_n] / 2**n for n = 0..n_max, flagging where it beats testing one by one."""
    _check_probability(q)
    _check_size(n_max, "n_max", minimum=0)
    rows = []
    for n in range(n_max + 1):
        mu = exact.mean_pow2_closed(n, q)
        rows.append(BreakevenRow(n, mu / 2**n, bool(mu < 2**n)))
    return rows
