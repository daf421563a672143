"""Batch command line for the binary splitting analyzer.

Every subcommand writes CSV (default) or JSON to standard output or ``--out``.
Examples::

    poolsearch table1
    poolsearch table2 --format json
    poolsearch pmf --n 2 --q 0.5
    poolsearch moments --n 1000 --p 0.05
    poolsearch thresholds
    poolsearch simulate --n 256 --q 0.9 --trials 100000 --seed 7

Exit status: 0 success, 1 I/O failure, 2 bad arguments or domain errors,
3 numeric integrity failure, 4 resource cap exceeded. With ``--error-json``
failures are also reported as one JSON object on standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from decimal import ROUND_HALF_EVEN, ROUND_HALF_UP, Decimal
from typing import Any, Sequence

from . import asymptotics, dist, exact, sim
from .core import (
    DegenerateDistributionError,
    DomainError,
    InvalidArgumentError,
    NumericIntegrityError,
    ResourceLimitError,
    SchemeParams,
)

__all__ = [
    "main",
    "build_parser",
    "round_value",
    "table1_rows",
    "table2_rows",
    "DEFAULT_P_LIST",
    "TABLE1_N",
    "TABLE2_N",
    "DEFAULT_SEED",
    "DEFAULT_TRIALS",
]

DEFAULT_P_LIST = (0.005, 0.01, 0.05, 0.1, 0.15, 0.2)
TABLE1_N = tuple(2**k for k in range(11))
TABLE2_N = (3, 5, 6, 7, 12, 48, 96, 200, 389, 768, 1000)
DEFAULT_SEED = 20240601
DEFAULT_TRIALS = 100_000

EXIT_OK = 0
EXIT_IO = 1
EXIT_ARGS = 2
EXIT_NUMERIC = 3
EXIT_RESOURCE = 4

ROUNDING_MODES = {"half-away": ROUND_HALF_UP, "half-even": ROUND_HALF_EVEN}


def round_value(x, precision: int, mode: str = "half-away") -> Decimal:
    """Round ``x`` to ``precision`` decimals.

    Floats are rounded from their shortest repr, so 0.3445 rounds like the
    decimal literal it prints as. Fractions are rounded from their exact value.
    """
    if mode not in ROUNDING_MODES:
        raise InvalidArgumentError(f"unknown rounding mode {mode!r}")
    if isinstance(x, float):
        d = Decimal(repr(x))
    elif isinstance(x, int):
        d = Decimal(x)
    else:  # Fraction and friends
        d = Decimal(x.numerator) / Decimal(x.denominator)
    return d.quantize(Decimal(1).scaleb(-precision), rounding=ROUNDING_MODES[mode])


def _table_rows(n_list: Sequence[int], p_list: Sequence, exact_q: bool = False) -> list[list]:
    from fractions import Fraction

    rows = []
    for n in n_list:
        row = []
        for p in p_list:
            q = 1 - Fraction(str(p)) if exact_q else 1 - p
            row.append(exact.mean_recursive(SchemeParams(n, q)) / n)
        rows.append(row)
    return rows


def table1_rows(p_list: Sequence = DEFAULT_P_LIST, n_list: Sequence[int] = TABLE1_N,
                exact_q: bool = False) -> list[list]:
    """Unrounded mu(N; 1 - p) / N for N = 2**n, one row per N.

    With ``exact_q`` each p is read as a decimal literal and the cell is an
    exact :class:`fractions.Fraction`.
    """
    return _table_rows(n_list, p_list, exact_q)


def table2_rows(p_list: Sequence = DEFAULT_P_LIST, n_list: Sequence[int] = TABLE2_N,
                exact_q: bool = False) -> list[list]:
    """Same as :func:`table1_rows` for sizes that are not powers of two."""
    return _table_rows(n_list, p_list, exact_q)


# ---------------------------------------------------------------- output


class _Output:
    def __init__(self, args):
        self.format = args.format
        self.precision = args.precision
        self.rounding = getattr(args, "rounding", "half-away")
        self.out = args.out

    def num(self, x):
        """Format a number for output, honoring ``--precision`` when given."""
        if x is None:
            return None
        if isinstance(x, bool):
            return x
        if isinstance(x, int):
            return x
        x = float(x)
        if not math.isfinite(x):
            return None if self.format == "json" else repr(x)
        if self.precision is None:
            return x
        d = round_value(x, self.precision, self.rounding)
        return float(d) if self.format == "json" else str(d)

    def emit(self, header: Sequence[str], rows: Sequence[Sequence[Any]], meta: dict | None = None) -> str:
        if self.format == "json":
            obj = dict(meta or {})
            obj["rows"] = [dict(zip(header, r)) for r in rows]
            text = json.dumps(obj) + "\n"
        else:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
            text = buf.getvalue()
        self.write(text)
        return text

    def write(self, text: str) -> None:
        if self.out is None or self.out == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            with open(self.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)


def _q_from(args) -> float:
    if args.q is not None:
        return args.q
    if args.p is not None:
        return 1 - args.p
    raise InvalidArgumentError("one of --q or --p is required")


# ---------------------------------------------------------------- commands


def _cmd_table(args, n_default, rows_fn) -> int:
    out = _Output(args)
    p_list = args.p_list or list(DEFAULT_P_LIST)
    n_list = args.n_list or list(n_default)
    for n in n_list:
        if n < 1:
            raise InvalidArgumentError(f"N must be >= 1, got {n}")
    rows = rows_fn(p_list, n_list)
    header = ["N"] + [f"p={p:g}" for p in p_list]
    body = [[n] + [out.num(v) for v in row] for n, row in zip(n_list, rows)]
    out.emit(header, body, {"p": list(p_list)})
    return EXIT_OK


def cmd_table1(args) -> int:
    return _cmd_table(args, TABLE1_N, table1_rows)


def cmd_table2(args) -> int:
    return _cmd_table(args, TABLE2_N, table2_rows)


def cmd_pmf(args) -> int:
    out = _Output(args)
    d = dist.pmf(SchemeParams(args.n, _q_from(args)))
    rows = [[int(t), out.num(d.probs[t])] for t in range(len(d.probs))]
    if args.support_only:
        rows = [r for r in rows if d.probs[r[0]] > 0]
    out.emit(["t", "probability"], rows, {"n": d.n_samples, "q": d.q_clean})
    return EXIT_OK


def cmd_moments(args) -> int:
    out = _Output(args)
    q = _q_from(args)
    rows = []
    for n in args.n:
        m = exact.moments(SchemeParams(n, q))
        rows.append([n, out.num(m.mean), out.num(m.variance), out.num(m.std), out.num(m.mean / n)])
    out.emit(["N", "mean", "variance", "std", "mean_over_n"], rows, {"q": q})
    return EXIT_OK


def cmd_poly(args) -> int:
    out = _Output(args)
    poly = exact.mean_poly(args.n)
    rows = [[e, c] for e, c in poly]
    out.emit(["exponent", "coefficient"], rows, {"n": args.n, "polynomial": str(poly)})
    return EXIT_OK


def cmd_thresholds(args) -> int:
    out = _Output(args)
    results = asymptotics.threshold_sequence(args.n_max, args.width)
    if not args.no_limit:
        results.append(asymptotics.threshold_q_infinity(args.width))
    rows = [
        ["inf" if r.index == math.inf else int(r.index), out.num(r.q_star), r.bracket_width]
        for r in results
    ]
    out.emit(["n", "q_n", "bracket_width"], rows)
    return EXIT_OK


def cmd_asymptotics(args) -> int:
    out = _Output(args)
    q = _q_from(args)
    rows = []
    a1 = asymptotics.alpha1(q, args.tol)
    rows.append(["alpha_1", out.num(a1.value), a1.tail_bound, a1.terms_used])
    for m in args.m:
        if m == 1:
            continue
        am = asymptotics.alphaM(m, q, args.tol)
        rows.append([f"alpha_{m}", out.num(am.value), am.tail_bound, am.terms_used])
    b = asymptotics.beta(q, args.tol)
    rows.append(["beta", out.num(b.value), b.tail_bound, b.terms_used])
    out.emit(["constant", "value", "tail_bound", "terms"], rows, {"q": q})
    return EXIT_OK


def cmd_breakeven(args) -> int:
    out = _Output(args)
    q = _q_from(args)
    rows = [[r.n, out.num(r.ratio), r.beats_one_by_one] for r in asymptotics.breakeven_report(q, args.n_max)]
    out.emit(["n", "ratio", "beats_one_by_one"], rows, {"q": q})
    return EXIT_OK


def cmd_sweep(args) -> int:
    """mu(N)/N for every N up to n_max, next to alpha_1(q); evidence only, no claim."""
    out = _Output(args)
    q = _q_from(args)
    if args.n_max < 1:
        raise InvalidArgumentError("--n-max must be >= 1")
    limit = asymptotics.alpha1(q).value if q < 1 else 0.0
    seq = exact.mean_explicit_sequence(args.n_max, q) if args.n_max <= 1 << 16 else None
    rows = []
    running_max = -math.inf
    for n in range(1, args.n_max + 1):
        mu = seq[n - 1] if seq is not None else exact.mean_recursive(SchemeParams(n, q))
        ratio = mu / n
        running_max = max(running_max, ratio)
        if n >= args.n_min:
            rows.append([n, out.num(ratio), out.num(running_max), out.num(ratio - limit)])
    out.emit(["N", "mean_over_n", "running_max", "minus_alpha1"], rows, {"q": q, "alpha1": limit})
    return EXIT_OK


def _sim_config(args) -> sim.SimConfig:
    kwargs = {} if args.workers is None else {"worker_hint": args.workers}
    return sim.SimConfig(SchemeParams(args.n, _q_from(args)), args.trials, args.seed, **kwargs)


def cmd_simulate(args) -> int:
    out = _Output(args)
    res = sim.run_batch(_sim_config(args))
    meta = {
        "n": res.n_samples,
        "q": res.q_clean,
        "trials": res.trials,
        "seed": res.seed,
        "mean": out.num(res.empirical_mean),
        "variance": out.num(res.empirical_variance),
        "std_error": out.num(res.standard_error),
        "m3": out.num(res.standardized_m3),
        "m4": out.num(res.standardized_m4),
    }
    if args.compare:
        m = exact.moments(SchemeParams(res.n_samples, res.q_clean))
        meta["exact_mean"] = out.num(m.mean)
        meta["exact_variance"] = out.num(m.variance)
    out.emit(["t", "count"], res.histogram_rows(), meta)
    return EXIT_OK


def cmd_normality(args) -> int:
    out = _Output(args)
    rep = sim.normality_diagnostic(_sim_config(args))
    rows = [[r["k"], out.num(r["moment"]), r["target"], out.num(r["distance"]),
             out.num(r["std_error"]), out.num(r["z"])] for r in rep.rows()]
    meta = {
        "n": rep.n_samples,
        "q": rep.q_clean,
        "trials": rep.trials,
        "seed": rep.seed,
        "variance_over_n": out.num(rep.beta_ratio),
        "variance_over_n_se": out.num(rep.beta_ratio_se),
        "beta": out.num(rep.beta_value),
    }
    out.emit(["k", "moment", "target", "distance", "std_error", "z"], rows, meta)
    return EXIT_OK


def cmd_lln(args) -> int:
    out = _Output(args)
    q = _q_from(args)
    rows = [
        [r.n, out.num(r.mean_ratio), out.num(r.alpha1), out.num(r.gap), out.num(r.std_error)]
        for r in sim.lln_convergence(q, args.n_list, args.trials, args.seed, args.workers)
    ]
    out.emit(["n", "mean_ratio", "alpha1", "gap", "std_error"], rows, {"q": q, "seed": args.seed})
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _precision(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"precision must be an integer, got {text!r}")
    if not 1 <= value <= 17:
        raise argparse.ArgumentTypeError(f"precision must lie in [1, 17], got {value}")
    return value


def _probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"probability must lie in [0, 1], got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _add_output(p: argparse.ArgumentParser, default_precision: int | None) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    hint = "full precision" if default_precision is None else str(default_precision)
    p.add_argument("--precision", type=_precision, default=default_precision,
                   help=f"decimal places, 1..17 (default: {hint})")
    p.add_argument("--rounding", choices=tuple(ROUNDING_MODES), default="half-away")
    p.add_argument("--out", metavar="PATH", default=None, help="output file (default: stdout)")
    p.add_argument("--error-json", action="store_true", default=argparse.SUPPRESS,
                   help="on failure, also print a JSON error object to stderr")


def _add_q(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--q", type=_probability, help="probability a specimen is clean")
    g.add_argument("--p", type=_probability, help="probability a specimen is contaminated")


def _add_sim(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trials", type=_positive_int, default=DEFAULT_TRIALS)
    p.add_argument("--seed", type=_nonneg_int, default=DEFAULT_SEED,
                   help=f"Philox key (default: {DEFAULT_SEED})")
    p.add_argument("--workers", type=_positive_int, default=None,
                   help=f"worker threads (default: ${sim.WORKERS_ENV} or 1); never changes results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poolsearch",
        description="Exact and simulated test counts for binary splitting pooled testing.",
    )
    parser.add_argument("--error-json", action="store_true",
                        help="on failure, also print a JSON error object to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_text in (
        ("table1", cmd_table1, "mu(N)/N for N = 1, 2, 4, ..., 1024"),
        ("table2", cmd_table2, "mu(N)/N for sizes that are not powers of two"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--p", dest="p_list", type=_probability, nargs="+", default=None,
                       help="contamination probabilities (columns)")
        p.add_argument("--n", dest="n_list", type=_positive_int, nargs="+", default=None,
                       help="pool sizes (rows)")
        _add_output(p, 3)
        p.set_defaults(func=fn)

    p = sub.add_parser("pmf", help="exact distribution of the test count")
    p.add_argument("--n", type=_positive_int, required=True)
    _add_q(p)
    p.add_argument("--support-only", action="store_true", help="omit zero-probability rows")
    _add_output(p, None)
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("moments", help="exact mean and variance")
    p.add_argument("--n", type=_positive_int, nargs="+", required=True)
    _add_q(p)
    _add_output(p, None)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("poly", help="mean test count as an integer polynomial in q")
    p.add_argument("--n", type=_positive_int, required=True)
    _add_output(p, None)
    p.set_defaults(func=cmd_poly)

    p = sub.add_parser("thresholds", help="break-even thresholds q_1..q_n and their limit")
    p.add_argument("--n-max", type=_positive_int, default=10)
    p.add_argument("--width", type=float, default=1e-12, help="bisection bracket width")
    p.add_argument("--no-limit", action="store_true", help="omit the limiting threshold")
    _add_output(p, None)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("asymptotics", help="limit constants alpha_1, alpha_M and beta")
    _add_q(p)
    p.add_argument("--m", type=_positive_int, nargs="*", default=[3, 5],
                   help="odd multipliers M for alpha_M (default: 3 5)")
    p.add_argument("--tol", type=float, default=asymptotics.DEFAULT_TOL)
    _add_output(p, None)
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("breakeven", help="mu(2^n)/2^n against testing one by one")
    _add_q(p)
    p.add_argument("--n-max", type=_nonneg_int, default=20)
    _add_output(p, None)
    p.set_defaults(func=cmd_breakeven)

    p = sub.add_parser("sweep", help="mu(N)/N for every N, for inspecting its upper limit")
    _add_q(p)
    p.add_argument("--n-max", type=_positive_int, default=4096)
    p.add_argument("--n-min", type=_positive_int, default=1)
    _add_output(p, None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="seeded Monte Carlo histogram of the test count")
    p.add_argument("--n", type=_positive_int, required=True)
    _add_q(p)
    _add_sim(p)
    p.add_argument("--compare", action="store_true", help="include exact mean and variance")
    _add_output(p, None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("normality", help="moments of the standardized simulated count")
    p.add_argument("--n", type=_positive_int, required=True)
    _add_q(p)
    _add_sim(p)
    _add_output(p, None)
    p.set_defaults(func=cmd_normality)

    p = sub.add_parser("lln", help="simulated mu(2^n)/2^n against alpha_1")
    _add_q(p)
    p.add_argument("--n", dest="n_list", type=_nonneg_int, nargs="+", required=True)
    _add_sim(p)
    _add_output(p, None)
    p.set_defaults(func=cmd_lln)

    return parser


_EXIT_FOR = (
    (ResourceLimitError, EXIT_RESOURCE),
    (NumericIntegrityError, EXIT_NUMERIC),
    (InvalidArgumentError, EXIT_ARGS),
    (DomainError, EXIT_ARGS),
    (DegenerateDistributionError, EXIT_ARGS),
    (OSError, EXIT_IO),
)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except tuple(cls for cls, _ in _EXIT_FOR) as exc:
        code = next(c for cls, c in _EXIT_FOR if isinstance(exc, cls))
        print(f"poolsearch: error: {exc}", file=sys.stderr)
        if args.error_json:
            err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
            print(json.dumps(err), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
