"""Exact distribution of the test count T(N; q) at a fixed numeric q."""

from __future__ import annotations

import cmath
import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    InvalidArgumentError,
    NumericIntegrityError,
    ResourceLimitError,
    SchemeParams,
    _check_size,
    _check_probability,
    size_lattice,
)
from .sim import count_tests

__all__ = [
    "TestCountPmf",
    "PgfPoly",
    "MAX_N_PGF",
    "MAX_N_BRUTE",
    "pgf",
    "pgf_pow2",
    "pmf",
    "brute_force_counts",
    "brute_force_pmf",
    "cf_eval",
    "cdf_dominates",
    "sf_dominates",
]

MAX_N_PGF = 2**20
MAX_N_BRUTE = 20
NEGATIVE_SLACK = 1e-12
NORMALIZATION_TOL = 1e-9
DOMINANCE_SLACK = 1e-9
# below this length direct convolution is both faster and exact to the last bit in the tails
_FFT_MIN_LEN = 1024


def _convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if min(len(a), len(b)) < _FFT_MIN_LEN:
        return np.convolve(a, b)
    m = len(a) + len(b) - 1
    size = 1 << (m - 1).bit_length()
    return np.fft.irfft(np.fft.rfft(a, size) * np.fft.rfft(b, size), size)[:m]


@dataclass(frozen=True)
class PgfPoly:
    """Coefficients ``c[t]`` of E[z^T] = sum_t c[t] z^t."""

    coeffs: np.ndarray
    n_clamped: int = 0

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if len(nz) else -1

    @classmethod
    def checked(cls, raw: np.ndarray) -> "PgfPoly":
        """Clamp roundoff negatives to zero; refuse anything more negative than 1e-12."""
        raw = np.array(raw, dtype=float)
        worst = raw.min(initial=0.0)
        if worst < -NEGATIVE_SLACK:
            raise NumericIntegrityError(f"generating function has coefficient {worst:.3e} < 0")
        neg = raw < 0
        raw[neg] = 0.0
        total = raw.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise NumericIntegrityError(f"generating function sums to {total!r} at z = 1")
        return cls(raw, int(neg.sum()))


@dataclass(frozen=True, eq=False)
class TestCountPmf:
    """``probs[t] = P{T(N) = t}`` for t = 0..2N-1 (index 0 is always 0)."""

    __test__ = False  # keep pytest from collecting this as a test class

    n_samples: int
    q_clean: float
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (2 * self.n_samples,):
            raise InvalidArgumentError(
                f"expected {2 * self.n_samples} probabilities, got shape {probs.shape}"
            )
        object.__setattr__(self, "probs", probs)

    def __eq__(self, other):
        if not isinstance(other, TestCountPmf):
            return NotImplemented
        return (
            self.n_samples == other.n_samples
            and self.q_clean == other.q_clean
            and np.array_equal(self.probs, other.probs)
        )

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    def _moment(self, k: int, center: float = 0.0) -> float:
        t = np.arange(len(self.probs), dtype=float) - center
        return float(np.dot(self.probs, t**k))

    def mean(self) -> float:
        return self._moment(1)

    def variance(self) -> float:
        return self._moment(2, self.mean())

    def standardized_moment(self, k: int) -> float:
        var = self.variance()
        if var <= 0:
            return math.nan
        return self._moment(k, self.mean()) / var ** (k / 2)

    def cdf(self) -> np.ndarray:
        """``cdf[x] = P{T <= x}`` for x = 0..2N-1."""
        return np.cumsum(self.probs)

    def sf(self) -> np.ndarray:
        """``sf[x] = P{T > x}``, summed from the tail to keep small values accurate."""
        tail = np.cumsum(self.probs[::-1])[::-1]
        return np.append(tail[1:], 0.0)

    def as_dict(self) -> dict[int, float]:
        return {int(t): float(self.probs[t]) for t in self.support}

    def to_json(self, precision: int | None = None) -> str:
        vals = self.probs.tolist() if precision is None else [round(p, precision) for p in self.probs]
        return json.dumps({"n": self.n_samples, "q": self.q_clean, "pmf": vals})

    def to_csv(self, precision: int | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "probability"])
        for t, p in enumerate(self.probs):
            w.writerow([t, repr(float(p)) if precision is None else f"{p:.{precision}f}"])
        return buf.getvalue()

    @classmethod
    def from_json(cls, text: str) -> "TestCountPmf":
        obj = json.loads(text)
        return cls(int(obj["n"]), obj["q"], np.array(obj["pmf"], dtype=float))


def _params(params: SchemeParams, cap: int):
    if not isinstance(params, SchemeParams):
        raise InvalidArgumentError(f"expected SchemeParams, got {type(params).__name__}")
    if params.n_samples > cap:
        raise ResourceLimitError(f"N = {params.n_samples} exceeds the cap {cap}")
    return params.n_samples, float(params.q_clean)


def _step(g_lo: np.ndarray, g_hi: np.ndarray, q_lo: float, q_s: float, size: int) -> np.ndarray:
    """One halving step: z g_lo g_hi + (z - z^2)(q^lo g_hi + q^s)."""
    out = np.zeros(2 * size)
    prod = _convolve(g_lo, g_hi)
    out[1 : 1 + len(prod)] += prod
    tail = q_lo * g_hi
    tail[0] += q_s
    out[1 : 1 + len(tail)] += tail
    out[2 : 2 + len(tail)] -= tail
    return out


def _pgf_raw(n: int, q: float) -> np.ndarray:
    table: dict[int, np.ndarray] = {}
    # q^s built as q^lo * q^hi, so P{T = 2} = q^lo q^hi - q^s cancels exactly
    power: dict[int, float] = {}
    for s in size_lattice(n):
        if s == 1:
            table[s] = np.array([0.0, 1.0])
            power[s] = q
            continue
        lo, hi = s // 2, s - s // 2
        power[s] = power[lo] * power[hi]
        table[s] = _step(table[lo], table[hi], power[lo], power[s], s)
    return table[n]


def pgf(params: SchemeParams) -> PgfPoly:
    """Probability generating function of T(N) by the halving recursion.

    g(z; 1) = z and, for N >= 2,
    g(z; N) = z g(z; lo) g(z; hi) + (z - z^2) q^lo g(z; hi) + (z - z^2) q^N.
    """
    n, q = _params(params, MAX_N_PGF)
    return PgfPoly.checked(_pgf_raw(n, q))


def pgf_pow2(n: int, q: float) -> PgfPoly:
    """Generating function of W_n = T(2**n) from its own squaring recursion.

    g_n = z g_{n-1}^2 + (z - z^2) q^(2^(n-1)) g_{n-1} + (z - z^2) q^(2^n).
    """
    _check_size(n, "n", minimum=0)
    _check_probability(q)
    if 2**n > MAX_N_PGF:
        raise ResourceLimitError(f"2**{n} exceeds the cap {MAX_N_PGF}")
    q = float(q)
    g = np.array([0.0, 1.0])
    half = q
    for k in range(1, n + 1):
        full = half * half
        z_g2 = np.zeros(2 ** (k + 1))
        z_g2[1 : 2 * len(g)] = _convolve(g, g)
        tail = half * g
        tail[0] += full
        z_g2[1 : 1 + len(tail)] += tail
        z_g2[2 : 2 + len(tail)] -= tail
        g = z_g2
        half = full
    return PgfPoly.checked(g)


def pmf(params: SchemeParams) -> TestCountPmf:
    """Exact PMF of T(N; q), read off the generating function coefficients."""
    g = pgf(params)
    return TestCountPmf(params.n_samples, params.q_clean, g.coeffs)


def brute_force_counts(n: int) -> dict[tuple[int, int], int]:
    """Count patterns by (tests needed, number contaminated), over all 2**n patterns."""
    _check_size(n, "N")
    if n > MAX_N_BRUTE:
        raise ResourceLimitError(f"N = {n} exceeds the enumeration cap {MAX_N_BRUTE}")
    counts: dict[tuple[int, int], int] = {}
    for pattern in itertools.product((False, True), repeat=n):
        key = (count_tests(pattern), sum(pattern))
        counts[key] = counts.get(key, 0) + 1
    return counts


def brute_force_pmf(params: SchemeParams) -> TestCountPmf:
    """PMF by running the scheme on every pattern and weighting by q^clean p^contaminated."""
    n, q = params.n_samples, params.q_clean
    if n > MAX_N_BRUTE:
        raise ResourceLimitError(f"N = {n} exceeds the enumeration cap {MAX_N_BRUTE}")
    p = 1 - q
    probs = [0.0] * (2 * n)
    for (t, k), c in sorted(brute_force_counts(n).items()):
        probs[t] += c * q ** (n - k) * p**k
    return TestCountPmf(n, q, np.array(probs, dtype=float))


def cf_eval(params: SchemeParams, t: float) -> complex:
    """Characteristic function E[exp(i t T)] from the halving recursion, without the PMF."""
    n, q = _params(params, MAX_N_PGF)
    z = cmath.exp(1j * t)
    zz = z - z * z
    phi: dict[int, complex] = {}
    for s in size_lattice(n):
        if s == 1:
            phi[s] = z
            continue
        lo, hi = s // 2, s - s // 2
        phi[s] = z * phi[lo] * phi[hi] + zz * q**lo * phi[hi] + zz * q**s
    return phi[n]


def cdf_dominates(a: TestCountPmf, b: TestCountPmf, slack: float = DOMINANCE_SLACK) -> bool:
    """True iff A <=_st B, i.e. P{A > x} <= P{B > x} + slack for every x."""
    if abs(float(a.q_clean) - float(b.q_clean)) > 1e-12:
        raise InvalidArgumentError(f"PMFs at different q: {a.q_clean} vs {b.q_clean}")
    return sf_dominates(a, b, slack)


def sf_dominates(a: TestCountPmf, b: TestCountPmf, slack: float = DOMINANCE_SLACK) -> bool:
    """Survival-function comparison with no requirement that q match."""
    sa, sb = a.sf(), b.sf()
    width = max(len(sa), len(sb))
    sa = np.pad(sa, (0, width - len(sa)))
    sb = np.pad(sb, (0, width - len(sb)))
    return bool(np.all(sa <= sb + slack))
