"""The splitting procedure itself, and seeded Monte Carlo over random patterns.

Random patterns come from a single Philox stream keyed by the seed. Trial ``i``
always consumes raw words ``[i*N, (i+1)*N)`` of that stream, so the result of a
batch depends only on ``(N, q, trials, seed)``: blocks of trials can be
generated in any order, by any number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import (
    DegenerateDistributionError,
    InvalidArgumentError,
    SchemeParams,
    _check_probability,
    _check_size,
)
from . import exact

__all__ = [
    "ContaminationPattern",
    "SchemeTrace",
    "SimConfig",
    "SimBatchResult",
    "NormalityReport",
    "LlnRow",
    "run_scheme",
    "count_tests",
    "count_tests_batch",
    "sample_patterns",
    "run_batch",
    "normality_diagnostic",
    "lln_convergence",
    "default_workers",
    "WORKERS_ENV",
]

WORKERS_ENV = "POOLSEARCH_WORKERS"

# raw Philox words drawn per block; keeps a block's pattern matrix near 16 MB
_BLOCK_WORDS = 1 << 21


class ContaminationPattern(tuple):
    """Per-specimen flags, ``True`` meaning contaminated."""

    def __new__(cls, flags):
        flags = tuple(bool(f) for f in flags)
        if not flags:
            raise InvalidArgumentError("a contamination pattern needs at least one specimen")
        return super().__new__(cls, flags)

    @classmethod
    def from_string(cls, text: str) -> "ContaminationPattern":
        """Parse ``"0010"`` or ``"..x."`` style strings (1/x/+ = contaminated)."""
        return cls(ch in "1xX+" for ch in text.strip())

    @property
    def n_contaminated(self) -> int:
        return sum(self)


@dataclass(frozen=True)
class SchemeTrace:
    tests: int
    contaminated: tuple[int, ...]


def run_scheme(pattern: Sequence[bool]) -> SchemeTrace:
    """Run the splitting scheme on one pattern, recording tests and findings.

    A group of unknown status gets one pooled test. A positive group of size
    two or more is split into its first floor(s/2) and last ceil(s/2) members;
    the first half is tested, and if it comes back clean the second half is
    known to be positive, so its own pooled test is skipped.
    """
    if not isinstance(pattern, ContaminationPattern):
        pattern = ContaminationPattern(pattern)
    flags = pattern
    tests = 0
    found: list[int] = []

    def pool_positive(a: int, b: int) -> bool:
        nonlocal tests
        tests += 1
        return any(flags[a:b])

    def resolve(a: int, b: int, known_positive: bool) -> bool:
        positive = True if known_positive else pool_positive(a, b)
        if not positive:
            return False
        if b - a == 1:
            found.append(a)
            return True
        mid = a + (b - a) // 2
        left_positive = resolve(a, mid, False)
        resolve(mid, b, not left_positive)
        return True

    resolve(0, len(flags), False)
    return SchemeTrace(tests, tuple(found))


def count_tests(pattern: Sequence[bool]) -> int:
    return run_scheme(pattern).tests


class _TreePlan:
    """Level-by-level layout of the splitting tree for vectorized counting.

    Children of the internal nodes at one level are listed, in order, as the
    next level, so a parent's positivity is ``next[:, 0::2] | next[:, 1::2]``.
    """

    def __init__(self, n: int):
        self.n = n
        levels = []
        cur = [(0, n)]
        while cur:
            starts = np.fromiter((a for a, _ in cur), dtype=np.intp, count=len(cur))
            sizes = np.fromiter((s for _, s in cur), dtype=np.intp, count=len(cur))
            levels.append((starts, sizes))
            nxt = []
            for a, s in cur:
                if s >= 2:
                    lo = s // 2
                    nxt.append((a, lo))
                    nxt.append((a + lo, s - lo))
            cur = nxt
        self.levels = []
        for starts, sizes in levels:
            internal = sizes >= 2
            leaf_idx = np.flatnonzero(~internal)
            self.levels.append(
                dict(
                    width=len(sizes),
                    all_internal=bool(internal.all()),
                    all_leaves=not internal.any(),
                    internal_idx=np.flatnonzero(internal),
                    leaf_idx=leaf_idx,
                    leaf_cols=starts[leaf_idx],
                    contiguous_leaves=bool(
                        len(leaf_idx) == n and np.array_equal(starts[leaf_idx], np.arange(n))
                    ),
                )
            )

    def count(self, bits: np.ndarray) -> np.ndarray:
        """Test counts for each row of a ``(trials, N)`` contamination matrix.

        Uses T = 1 + #(positive internal nodes) + #(positive left children):
        every positive group of size >= 2 tests its left half, and tests its
        right half exactly when the left half was positive.
        """
        rows = bits.shape[0]
        total = np.ones(rows, dtype=np.int64)
        below = None
        for lvl in reversed(self.levels):
            if lvl["all_leaves"] and lvl["contiguous_leaves"]:
                pos = bits
            else:
                if below is not None:
                    left, right = below[:, 0::2], below[:, 1::2]
                    merged = left | right
                    total += np.count_nonzero(left, axis=1)
                    total += np.count_nonzero(merged, axis=1)
                if lvl["all_internal"]:
                    pos = merged
                else:
                    pos = np.empty((rows, lvl["width"]), dtype=bool)
                    pos[:, lvl["leaf_idx"]] = bits[:, lvl["leaf_cols"]]
                    if len(lvl["internal_idx"]):
                        pos[:, lvl["internal_idx"]] = merged
            below = pos
        return total


def count_tests_batch(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=bool)
    if bits.ndim != 2 or bits.shape[1] < 1:
        raise InvalidArgumentError("expected a (trials, N) boolean matrix with N >= 1")
    return _TreePlan(bits.shape[1]).count(bits)


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise InvalidArgumentError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
        if value >= 1:
            return value
        raise InvalidArgumentError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return 1


@dataclass(frozen=True)
class SimConfig:
    params: SchemeParams
    trials: int
    seed: int
    worker_hint: int = field(default_factory=default_workers)

    def __post_init__(self):
        if not isinstance(self.params, SchemeParams):
            raise InvalidArgumentError("params must be a SchemeParams")
        _check_size(self.trials, "trials")
        _check_size(self.seed, "seed", minimum=0)
        if self.seed >= 2**64:
            raise InvalidArgumentError("seed must fit in 64 unsigned bits")
        _check_size(self.worker_hint, "worker_hint")


def _contamination_threshold(q) -> int:
    """Integer t with P(raw word < t) = 1 - q, up to the 2**-64 grid."""
    return math.floor((1 - Fraction(q)) * 2**64)


def _block_size(n: int) -> int:
    # block starts must be multiples of 4 trials: Philox advances 4 words at a time
    return max(4, (_BLOCK_WORDS // n) // 4 * 4)


def sample_patterns(params: SchemeParams, seed: int, start: int, stop: int) -> np.ndarray:
    """Contamination matrix for trials ``start <= i < stop`` (rows), ``True`` = contaminated."""
    n = params.n_samples
    if start < 0 or stop < start:
        raise InvalidArgumentError("need 0 <= start <= stop")
    thr = _contamination_threshold(params.q_clean)
    bg = np.random.Philox(key=seed)
    first_word = start * n
    bg.advance(first_word // 4)
    skip = first_word % 4
    words = bg.random_raw(skip + (stop - start) * n)[skip:]
    if thr == 0:
        bits = np.zeros(words.shape, dtype=bool)
    else:
        bits = words <= np.uint64(thr - 1)
    return bits.reshape(stop - start, n)


@dataclass(frozen=True)
class SimBatchResult:
    n_samples: int
    q_clean: float
    histogram: dict[int, int]
    empirical_mean: float
    empirical_variance: float
    standardized_m3: float
    standardized_m4: float
    trials: int
    seed: int

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.empirical_variance / self.trials)

    def to_dict(self) -> dict:
        def clean(x):
            return None if x is None or (isinstance(x, float) and math.isnan(x)) else x

        return {
            "n": self.n_samples,
            "q": self.q_clean,
            "trials": self.trials,
            "seed": self.seed,
            "histogram": {str(t): c for t, c in sorted(self.histogram.items())},
            "mean": self.empirical_mean,
            "variance": self.empirical_variance,
            "m3": clean(self.standardized_m3),
            "m4": clean(self.standardized_m4),
        }

    def histogram_rows(self) -> list[tuple[int, int]]:
        return sorted(self.histogram.items())


def _histogram_stats(values: np.ndarray, counts: np.ndarray):
    n = counts.sum()
    w = counts / n
    mean = float(np.dot(w, values))
    dev = values - mean
    m2 = float(np.dot(w, dev**2))
    var = m2 * n / (n - 1) if n > 1 else 0.0
    if m2 > 0:
        m3 = float(np.dot(w, dev**3)) / m2**1.5
        m4 = float(np.dot(w, dev**4)) / m2**2
    else:
        m3 = m4 = float("nan")
    return mean, var, m3, m4


def _run_histogram(config: SimConfig) -> np.ndarray:
    n = config.params.n_samples
    plan = _TreePlan(n)
    block = _block_size(n)
    bounds = [(s, min(s + block, config.trials)) for s in range(0, config.trials, block)]

    def work(span):
        bits = sample_patterns(config.params, config.seed, *span)
        return np.bincount(plan.count(bits), minlength=2 * n)

    if config.worker_hint == 1 or len(bounds) == 1:
        parts = map(work, bounds)
        return sum(parts, np.zeros(2 * n, dtype=np.int64))
    with ThreadPoolExecutor(max_workers=config.worker_hint) as pool:
        return sum(pool.map(work, bounds), np.zeros(2 * n, dtype=np.int64))


def run_batch(config: SimConfig) -> SimBatchResult:
    hist = _run_histogram(config)
    values = np.flatnonzero(hist)
    counts = hist[values]
    mean, var, m3, m4 = _histogram_stats(values.astype(float), counts)
    return SimBatchResult(
        n_samples=config.params.n_samples,
        q_clean=config.params.q_clean,
        histogram={int(t): int(c) for t, c in zip(values, counts)},
        empirical_mean=mean,
        empirical_variance=var,
        standardized_m3=m3,
        standardized_m4=m4,
        trials=config.trials,
        seed=config.seed,
    )


@dataclass(frozen=True)
class NormalityReport:
    """Moments of Y = (T - mu) / sigma, with mu and sigma exact, against N(0, 1).

    ``moments[k-1]`` is the sample mean of Y**k; ``std_errors`` are the iid
    Monte Carlo standard errors of those sample means. No verdict is made.
    """

    n_samples: int
    q_clean: float
    trials: int
    seed: int
    exact_mean: float
    exact_variance: float
    moments: tuple[float, float, float, float]
    std_errors: tuple[float, float, float, float]
    targets: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 3.0)
    beta_ratio: float | None = None
    beta_ratio_se: float | None = None
    beta_value: float | None = None

    @property
    def distances(self) -> tuple[float, ...]:
        return tuple(abs(m - t) for m, t in zip(self.moments, self.targets))

    @property
    def z_scores(self) -> tuple[float, ...]:
        return tuple(d / se if se > 0 else math.inf for d, se in zip(self.distances, self.std_errors))

    def rows(self) -> list[dict]:
        return [
            {
                "k": k + 1,
                "moment": self.moments[k],
                "target": self.targets[k],
                "distance": self.distances[k],
                "std_error": self.std_errors[k],
                "z": self.z_scores[k],
            }
            for k in range(4)
        ]

    def to_dict(self) -> dict:
        return {
            "n": self.n_samples,
            "q": self.q_clean,
            "trials": self.trials,
            "seed": self.seed,
            "mean": self.exact_mean,
            "variance": self.exact_variance,
            "moments": self.rows(),
            "beta": self.beta_value,
            "variance_over_n": self.beta_ratio,
            "variance_over_n_se": self.beta_ratio_se,
        }


def normality_diagnostic(config: SimConfig, batch: SimBatchResult | None = None) -> NormalityReport:
    """Standardize simulated counts by the exact mean and deviation.

    For N = 2**n the report also carries the empirical Var[T]/N next to the
    limiting variance constant, which is what the scaling (W_n - 2^n a)/2^(n/2)
    converges to.
    """
    n, q = config.params.n_samples, config.params.q_clean
    mp = exact.moments(config.params)
    mu, var = float(mp.mean), float(mp.variance)
    if var <= 0:
        raise DegenerateDistributionError(f"T({n}; q={q}) is deterministic, sigma = 0")
    if batch is None:
        batch = run_batch(config)
    values = np.array(sorted(batch.histogram), dtype=float)
    counts = np.array([batch.histogram[int(t)] for t in values], dtype=float)
    w = counts / counts.sum()
    y = (values - mu) / math.sqrt(var)
    ms, ses = [], []
    for k in range(1, 5):
        mk = float(np.dot(w, y**k))
        m2k = float(np.dot(w, y ** (2 * k)))
        ms.append(mk)
        ses.append(math.sqrt(max(m2k - mk * mk, 0.0) / batch.trials))

    beta_value = beta_ratio = beta_se = None
    if n & (n - 1) == 0 and 0 < q < 1:
        from .asymptotics import beta

        beta_value = beta(q).value
        beta_ratio = batch.empirical_variance / n
        # SE of a sample variance is sigma^2 sqrt((kurtosis - 1) / trials)
        kurt = batch.standardized_m4 if not math.isnan(batch.standardized_m4) else 3.0
        beta_se = beta_ratio * math.sqrt(max(kurt - 1.0, 0.0) / batch.trials)
    return NormalityReport(
        n_samples=n,
        q_clean=q,
        trials=batch.trials,
        seed=batch.seed,
        exact_mean=mu,
        exact_variance=var,
        moments=tuple(ms),
        std_errors=tuple(ses),
        beta_ratio=beta_ratio,
        beta_ratio_se=beta_se,
        beta_value=beta_value,
    )


@dataclass(frozen=True)
class LlnRow:
    n: int
    mean_ratio: float
    alpha1: float
    gap: float
    std_error: float


def lln_convergence(q: float, n_list: Sequence[int], trials: int, seed: int,
                    worker_hint: int | None = None) -> list[LlnRow]:
    """Empirical mean of W_n / 2**n for each n, next to its limit alpha_1(q)."""
    from .asymptotics import alpha1

    _check_probability(q)
    limit = 0.0 if q == 1 else alpha1(q).value
    rows = []
    for n in n_list:
        _check_size(n, "n", minimum=0)
        kwargs = {} if worker_hint is None else {"worker_hint": worker_hint}
        res = run_batch(SimConfig(SchemeParams(2**n, q), trials, seed, **kwargs))
        ratio = res.empirical_mean / 2**n
        rows.append(LlnRow(n, ratio, limit, abs(ratio - limit), res.standard_error / 2**n))
    return rows
