"""Command-line entry point: ``multidisc {gen,check,solve,scaling,chernoff}``.

Exit codes: 0 success or PASS, 1 FAIL verdict, 2 usage or validation error,
3 capacity exceeded (or an optimum that could not be proven).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import statistics
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import mpmath

from .core import (
    Allocation,
    CapacityError,
    Coloring,
    MultidiscError,
    SetSystem,
    detect_kind,
    parse_allocation,
    parse_coloring,
    parse_instance,
    parse_set_system,
    serialize_allocation,
    serialize_coloring,
    serialize_instance,
    serialize_set_system,
)
from .discrepancy import (
    DEFAULT_STATE_CAP,
    discrepancy,
    min_discrepancy_exact,
    min_discrepancy_search,
    scaled_lower_bound,
    solve_exact,
)
from .fairness import exact_min_over_allocations, min_d, set_system_to_instance
from .generators import CONSTRUCTIONS, ConstructionParams, TheoremRangeWarning, generate
from .probability import binom_tail_ge, binom_tail_le, chernoff_grid
from .rng import derive_seed

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAPACITY = 0, 1, 2, 3

SCALING_HEADER = ("construction", "n", "k", "sample_index", "m", "d_threshold", "exact_min_value")
CHERNOFF_HEADER = ("t", "eps", "exact_tail_log", "bound_log", "holds")


class UsageError(Exception):
    pass


def _color(text: str, code: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _verdict(ok: bool) -> str:
    return _color("PASS", "32") if ok else _color("FAIL", "31")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a number like 3 or 1/2, got {text!r}")


def _write(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(path).write_bytes(data)


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args: argparse.Namespace) -> int:
    p = ConstructionParams(
        n=args.n, k=args.k, constant_c=args.constant, group_sizes=args.group_sizes, seed=args.seed
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TheoremRangeWarning)
        obj, d = generate(args.construction, p)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if isinstance(obj, SetSystem):
        data, m = serialize_set_system(obj), obj.universe_size
    else:
        data, m = serialize_instance(obj), obj.num_items
    _write(args.out, data)
    print(f"m={m} d={d}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check / solve


def _load_instance(path: str):
    raw = _read(path)
    kind = detect_kind(raw)
    if kind == "set_system":
        return parse_set_system(raw)
    if kind == "instance":
        return parse_instance(raw)
    raise UsageError(f"{path} holds a {kind}, not a set system or instance")


def _load_witness(path: str):
    raw = _read(path)
    kind = detect_kind(raw)
    if kind == "coloring":
        return parse_coloring(raw)
    if kind == "allocation":
        return parse_allocation(raw)
    raise UsageError(f"{path} holds a {kind}, not a coloring or allocation")


def _as_coloring(w, k: int | None) -> Coloring:
    if isinstance(w, Coloring):
        return w
    assignment = [0] * w.num_items
    for h, bundle in enumerate(w.bundles):
        for j in bundle:
            assignment[j] = h
    return Coloring(k or w.k, tuple(assignment))


def _as_allocation(w) -> Allocation:
    if isinstance(w, Allocation):
        return w
    return Allocation.from_assignment(w.assignment, w.k)


def _fair_instance(inst, notion: str):
    if isinstance(inst, SetSystem):
        if notion != "cd":
            raise UsageError(f"{notion} needs a grouped instance, got a set system")
        return set_system_to_instance(inst)
    return inst


def cmd_check(args: argparse.Namespace) -> int:
    inst = _load_instance(args.instance)
    witness = _load_witness(args.witness)
    notion = args.notion
    if notion == "disc":
        if not isinstance(inst, SetSystem):
            raise UsageError("disc needs a set system")
        chi = _as_coloring(witness, args.k)
        result = discrepancy(chi, inst)
        ok = result.value <= args.d
        print(f"disc value={result.value} set={result.witness_set + 1} "
              f"color={result.witness_color + 1} threshold={args.d} {_verdict(ok)}")
    else:
        fair = _fair_instance(inst, notion)
        a = _as_allocation(witness)
        value = min_d(fair, a, notion)
        ok = value <= args.d
        print(f"{notion} value={value} threshold={args.d} {_verdict(ok)}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_solve(args: argparse.Namespace) -> int:
    inst = _load_instance(args.instance)
    notion = args.notion
    summary: dict = {"notion": notion}
    if notion == "disc":
        if not isinstance(inst, SetSystem):
            raise UsageError("disc needs a set system")
        if args.k is None:
            raise UsageError("--k is required for disc")
        if args.search:
            chi, result = min_discrepancy_search(inst, args.k, args.budget, args.seed)
            optimal, method = False, "search"
        else:
            chi, result = min_discrepancy_exact(inst, args.k, args.state_cap)
            optimal, method = True, "enumeration"
        witness = serialize_coloring(chi)
        summary.update(value=str(result.value), optimal=optimal, method=method)
    else:
        if args.search:
            raise UsageError("--search is only available for disc")
        fair = _fair_instance(inst, notion)
        a, value = exact_min_over_allocations(fair, notion, args.state_cap, k=args.k)
        witness = serialize_allocation(a)
        summary.update(value=str(value), optimal=True, method="enumeration")
    if args.out:
        _write(args.out, witness)
    else:
        summary["witness"] = json.loads(witness)
    print(json.dumps(summary, separators=(",", ":")))
    return EXIT_OK


# ---------------------------------------------------------------------------
# scaling


@dataclass(frozen=True)
class SampleResult:
    n: int
    sample_index: int
    m: int
    d_threshold: str
    low: Fraction
    high: Fraction
    method: str

    @property
    def proven(self) -> bool:
        return self.low == self.high


def _format_range(low: Fraction, high: Fraction) -> str:
    return str(low) if low == high else f"{low}..{high}"


def solve_sample(task: tuple) -> SampleResult:
    construction, n, k, j, constant, seed, state_cap, solver, steps, time_limit = task
    p = ConstructionParams(n=n, k=k, constant_c=constant, seed=derive_seed(seed, n, j))
    s, d = generate(construction, p)
    if solver == "enumerate":
        chi, result = min_discrepancy_exact(s, k, state_cap)
        low = high = result.value
        method = "enumeration"
    else:
        sol = solve_exact(s, k, state_cap, seed=derive_seed(seed, n, j, 1),
                          search_steps=steps, milp_time_limit=time_limit)
        high = sol.result.value
        low = high if sol.proven else Fraction(scaled_lower_bound(s, k), k)
        method = sol.method
    return SampleResult(n, j, s.universe_size, str(d), low, high, method)


def run_scaling(
    construction: str,
    k: int,
    ns: Sequence[int],
    samples: int,
    constant: float,
    seed: int,
    state_cap: int = DEFAULT_STATE_CAP,
    solver: str = "auto",
    search_steps: int = 20000,
    milp_time_limit: float | None = 30.0,
    threads: int = 1,
) -> list[SampleResult]:
    """Exact minimum discrepancy for ``samples`` seeded instances per ``n``.

    Sample ``j`` at size ``n`` is generated from ``derive_seed(seed, n, j)``.
    Results come back in (n, sample) order regardless of ``threads``.
    """
    if construction != "disc":
        raise UsageError("scaling supports the disc construction only")
    tasks = [(construction, n, k, j, constant, seed, state_cap, solver, search_steps, milp_time_limit)
             for n in ns for j in range(samples)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(solve_sample, tasks))
    return [solve_sample(t) for t in tasks]


def median_range(results: Sequence[SampleResult]) -> tuple[Fraction, Fraction]:
    """Median of the true values, bracketed by medians of the lower and upper ends."""
    return (statistics.median([r.low for r in results]),
            statistics.median([r.high for r in results]))


def scaling_csv(construction: str, k: int, results: Sequence[SampleResult]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCALING_HEADER)
    by_n: dict[int, list[SampleResult]] = {}
    for r in results:
        by_n.setdefault(r.n, []).append(r)
    for n, rows in by_n.items():
        for r in rows:
            writer.writerow((construction, n, k, r.sample_index, r.m, r.d_threshold,
                             _format_range(r.low, r.high)))
        low, high = median_range(rows)
        writer.writerow((construction, n, k, "median", rows[0].m, rows[0].d_threshold,
                         _format_range(Fraction(low), Fraction(high))))
    return buf.getvalue().encode("utf-8")


def cmd_scaling(args: argparse.Namespace) -> int:
    results = run_scaling(
        args.construction, args.k, args.n, args.samples, args.constant, args.seed,
        state_cap=args.state_cap, solver=args.solver, search_steps=args.search_steps,
        milp_time_limit=args.milp_time_limit, threads=args.threads,
    )
    _write(args.out, scaling_csv(args.construction, args.k, results))
    unproven = [r for r in results if not r.proven]
    if unproven:
        for r in unproven:
            print(f"unproven: n={r.n} sample={r.sample_index} value in [{r.low}, {r.high}]",
                  file=sys.stderr)
        return EXIT_CAPACITY
    return EXIT_OK


# ---------------------------------------------------------------------------
# chernoff


def _log_str(x) -> str:
    return mpmath.nstr(x, 17, min_fixed=-mpmath.inf, max_fixed=mpmath.inf)


def chernoff_csv(t_min: int, t_max: int, eps_step: Fraction) -> tuple[bytes, bool]:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CHERNOFF_HEADER)
    all_hold = True
    for point in chernoff_grid(t_min, t_max, eps_step):
        r = point.report
        if r is None:
            half = Fraction(point.t, 2)
            tail = min(binom_tail_le(point.t, math.floor(half * (1 - point.eps))),
                       binom_tail_ge(point.t, math.ceil(half * (1 + point.eps))))
            with mpmath.workdps(30):
                tail_log = _log_str(mpmath.log(mpmath.mpf(tail.numerator) / tail.denominator))
            writer.writerow((point.t, point.eps, tail_log, "", "skipped"))
            continue
        all_hold &= r.holds
        writer.writerow((point.t, point.eps, _log_str(r.rhs_log), _log_str(r.lhs_log),
                         "true" if r.holds else "false"))
    return buf.getvalue().encode("utf-8"), all_hold


def cmd_chernoff(args: argparse.Namespace) -> int:
    if args.t_min < 0 or args.t_max < args.t_min:
        raise UsageError("need 0 <= --t-min <= --t-max")
    if args.eps_step <= 0:
        raise UsageError("--eps-step must be positive")
    data, ok = chernoff_csv(args.t_min, args.t_max, args.eps_step)
    _write(args.report, data)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multidisc", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a seeded hard instance")
    g.add_argument("--construction", choices=CONSTRUCTIONS, required=True)
    g.add_argument("--n", type=int)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--group-sizes", type=_int_list)
    g.add_argument("--constant", type=float, help="proof constant (default: the asymptotic one)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("check", help="evaluate a coloring or allocation against a threshold")
    c.add_argument("--instance", required=True)
    c.add_argument("--witness", required=True)
    c.add_argument("--notion", choices=("disc", "cd", "ef", "prop"), default="disc")
    c.add_argument("--d", type=_fraction, required=True)
    c.add_argument("--k", type=int, help="number of colors when the witness is an allocation")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", help="minimum discrepancy or minimal fairness d")
    s.add_argument("--instance", required=True)
    s.add_argument("--notion", choices=("disc", "cd", "ef", "prop"), default="disc")
    s.add_argument("--k", type=int)
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exhaustive search (default)")
    mode.add_argument("--search", action="store_true", help="multi-restart local search (disc)")
    s.add_argument("--state-cap", type=int, default=DEFAULT_STATE_CAP)
    s.add_argument("--budget", type=int, default=50, help="local search restarts")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    sc = sub.add_parser("scaling", help="exact minimum discrepancy across sizes (CSV)")
    sc.add_argument("--construction", choices=("disc",), default="disc")
    sc.add_argument("--k", type=int, default=2)
    sc.add_argument("--n", type=_int_list, required=True, help="comma-separated sizes")
    sc.add_argument("--samples", type=int, default=20)
    sc.add_argument("--constant", type=float, default=1.0)
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--state-cap", type=int, default=DEFAULT_STATE_CAP)
    sc.add_argument("--solver", choices=("auto", "enumerate"), default="auto",
                    help="auto adds lower-bound search and MILP past the state cap")
    sc.add_argument("--search-steps", type=int, default=20000)
    sc.add_argument("--milp-time-limit", type=float, default=30.0)
    sc.add_argument("--out")
    sc.set_defaults(func=cmd_scaling)

    ch = sub.add_parser("chernoff", help="reverse Chernoff grid against exact tails (CSV)")
    ch.add_argument("--t-min", type=int, default=24)
    ch.add_argument("--t-max", type=int, default=400)
    ch.add_argument("--eps-step", type=_fraction, default=Fraction(1, 20))
    ch.add_argument("--report")
    ch.set_defaults(func=cmd_chernoff)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc} (required {exc.required})", file=sys.stderr)
        return EXIT_CAPACITY
    except (UsageError, MultidiscError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
