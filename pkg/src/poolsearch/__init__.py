"""Exact and simulated analysis of binary splitting pooled testing.

A pool of N specimens is tested as a whole; a positive pool is split into
halves of sizes floor(N/2) and ceil(N/2), and the left half is tested. When
the left half is clean, the right half is known to be contaminated and is
split without a test of its own. ``T(N; q)`` is the number of tests used when
each specimen is clean with probability ``q``.
"""

from .core import (
    DegenerateDistributionError,
    DomainError,
    InvalidArgumentError,
    NumericIntegrityError,
    PoolSearchError,
    ResourceLimitError,
    SchemeParams,
    SizeLattice,
    SplitPair,
    iterate_iota,
    size_lattice,
    split,
)
from .exact import (
    MomentPair,
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
from .dist import (
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
from .asymptotics import (
    BreakevenRow,
    SeriesValue,
    ThresholdResult,
    alpha1,
    alpha1_functional_residual,
    alphaM,
    beta,
    breakeven_report,
    threshold_q_infinity,
    threshold_qn,
    threshold_sequence,
)
from .sim import (
    ContaminationPattern,
    LlnRow,
    NormalityReport,
    SchemeTrace,
    SimBatchResult,
    SimConfig,
    count_tests,
    count_tests_batch,
    lln_convergence,
    normality_diagnostic,
    run_batch,
    run_scheme,
    sample_patterns,
)

__version__ = "0.1.0"
