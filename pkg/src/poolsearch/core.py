"""Shared types and halving combinatorics for the binary splitting scheme."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

__all__ = [
    "PoolSearchError",
    "InvalidArgumentError",
    "ResourceLimitError",
    "NumericIntegrityError",
    "DomainError",
    "DegenerateDistributionError",
    "SchemeParams",
    "SplitPair",
    "SizeLattice",
    "split",
    "iterate_iota",
    "size_lattice",
    "MAX_N_RECURSIVE",
]

MAX_N_RECURSIVE = 2**63 - 1


class PoolSearchError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(PoolSearchError, ValueError):
    pass


class ResourceLimitError(PoolSearchError):
    """A size cap was exceeded (polynomial degree, enumeration width, ...)."""


class NumericIntegrityError(PoolSearchError, ArithmeticError):
    """A computed distribution violated a probability invariant beyond roundoff."""


class DomainError(PoolSearchError, ValueError):
    """Argument outside the domain where a series or limit is defined."""


class DegenerateDistributionError(PoolSearchError, ValueError):
    """The test count is deterministic, so it cannot be standardized."""


def _check_probability(q, name: str = "q") -> None:
    if not isinstance(q, (Real, Fraction)):
        raise InvalidArgumentError(f"{name} must be a real number, got {q!r}")
    if not 0 <= q <= 1:
        raise InvalidArgumentError(f"{name} must lie in [0, 1], got {q!r}")


def _check_size(n, name: str = "N", minimum: int = 1) -> None:
    if isinstance(n, bool) or not isinstance(n, int):
        raise InvalidArgumentError(f"{name} must be an integer, got {n!r}")
    if n < minimum:
        raise InvalidArgumentError(f"{name} must be >= {minimum}, got {n}")


@dataclass(frozen=True)
class SchemeParams:
    """A problem instance: ``n_samples`` specimens, each clean with probability ``q_clean``."""

    n_samples: int
    q_clean: float

    def __post_init__(self):
        _check_size(self.n_samples, "n_samples")
        _check_probability(self.q_clean, "q_clean")

    @classmethod
    def from_p(cls, n_samples: int, p_contaminated: float) -> "SchemeParams":
        _check_probability(p_contaminated, "p")
        return cls(n_samples, 1 - p_contaminated)

    @property
    def p_contaminated(self):
        return 1 - self.q_clean


@dataclass(frozen=True)
class SplitPair:
    lo: int
    hi: int

    def __iter__(self):
        yield self.lo
        yield self.hi


def split(n: int) -> SplitPair:
    """Return ``(floor(n/2), ceil(n/2))``; the first group is the smaller one."""
    _check_size(n, "N", minimum=2)
    lo = n // 2
    return SplitPair(lo, n - lo)


def iterate_iota(n: int, k: int) -> int:
    """Apply ``m -> floor(m/2)`` to ``n`` exactly ``k`` times."""
    _check_size(n, "N")
    _check_size(k, "k", minimum=0)
    return n >> k


@dataclass(frozen=True)
class SizeLattice:
    """Every distinct group size the splitting procedure can reach from ``root``.

    ``sizes`` is sorted ascending, so a single forward pass over it can fill a
    memo table for any recursion of the form f(N) = F(f(lo), f(hi)).
    """

    root: int
    sizes: tuple[int, ...]

    def __contains__(self, s: int) -> bool:
        return s in self.sizes

    def __iter__(self):
        return iter(self.sizes)

    def __len__(self) -> int:
        return len(self.sizes)


def size_lattice(n: int) -> SizeLattice:
    _check_size(n, "N")
    # each halving level holds at most two consecutive sizes {m, m+1}
    level = {n}
    seen = {n}
    while level:
        nxt = set()
        for s in level:
            if s >= 2:
                lo = s // 2
                nxt.add(lo)
                nxt.add(s - lo)
        nxt -= seen
        seen |= nxt
        level = nxt
    return SizeLattice(n, tuple(sorted(seen)))
