"""Multi-color discrepancy of colorings and minimum-discrepancy search."""
from __future__ import annotations

import sys
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any

import numpy as np

from .core import CapacityError, Coloring, DimensionError, SetSystem, exact
from .rng import substream

DEFAULT_STATE_CAP = 10**8


@dataclass(frozen=True)
class DiscrepancyResult:
    value: Fraction
    witness_set: int
    witness_color: int


def _check_dims(chi: Coloring, s: SetSystem) -> None:
    if len(chi.assignment) != s.universe_size:
        raise DimensionError(
            f"coloring has {len(chi.assignment)} entries but the universe has {s.universe_size}"
        )


def color_counts(chi: Coloring, s: SetSystem) -> list[list[int]]:
    """``counts[i][h] = |chi^-1(h) ∩ S_i|``."""
    _check_dims(chi, s)
    out = []
    for members in s.sets:
        row = [0] * chi.k
        for e in members:
            row[chi.assignment[e]] += 1
        out.append(row)
    return out


def deviation(chi: Coloring, s: SetSystem, i: int, h: int) -> Fraction:
    """Signed ``|chi^-1(h) ∩ S_i| - |S_i|/k``."""
    _check_dims(chi, s)
    count = sum(1 for e in s.sets[i] if chi.assignment[e] == h)
    return count - Fraction(len(s.sets[i]), chi.k)


def discrepancy(chi: Coloring, s: SetSystem) -> DiscrepancyResult:
    """Max over sets and colors of ``| |chi^-1(h) ∩ S_i| - |S_i|/k |``.

    The witness is the first (set, color) pair attaining the maximum, scanning
    sets in order and colors ascending within a set.
    """
    k = chi.k
    best, best_i, best_h = -1, 0, 0
    for i, row in enumerate(color_counts(chi, s)):
        size = s.sizes[i]
        for h, c in enumerate(row):
            dev = abs(k * c - size)
            if dev > best:
                best, best_i, best_h = dev, i, h
    return DiscrepancyResult(Fraction(best, k), best_i, best_h)


def check_discrepancy_at_most(chi: Coloring, s: SetSystem, d: Any) -> bool:
    return discrepancy(chi, s).value <= exact(d)


def scaled_lower_bound(s: SetSystem, k: int) -> int:
    """Lower bound on ``k * discrepancy`` valid for every k-coloring.

    Per-set color counts are integers summing to ``|S_i|``; when ``k`` does not
    divide ``|S_i|`` some count is at least the ceiling and some at most the
    floor of ``|S_i|/k``.
    """
    bound = 0
    for size in s.sizes:
        r = size % k
        if r:
            bound = max(bound, r, k - r)
    return bound


@lru_cache(maxsize=None)
def _stirling2(m: int, j: int) -> int:
    if m == j:
        return 1
    if j == 0 or j > m:
        return 0
    return j * _stirling2(m - 1, j) + _stirling2(m - 1, j - 1)


def canonical_count(m: int, k: int) -> int:
    """Number of colorings of ``m`` elements with at most ``k`` colors, up to color relabelling."""
    return sum(_stirling2(m, j) for j in range(1, min(k, m) + 1))


def canonicalize(chi: Coloring) -> Coloring:
    """Relabel colors in order of first use."""
    relabel: dict[int, int] = {}
    out = []
    for c in chi.assignment:
        if c not in relabel:
            relabel[c] = len(relabel)
        out.append(relabel[c])
    return Coloring(chi.k, tuple(out))


def min_discrepancy_exact(
    s: SetSystem, k: int, state_cap: int = DEFAULT_STATE_CAP
) -> tuple[Coloring, DiscrepancyResult]:
    """Exact minimum discrepancy by depth-first search over canonical colorings.

    Elements are colored in index order and a new color may only be opened
    after all lower ones are in use, so each color-permutation class is
    visited once. A subtree is cut when the deviation already forced on some
    (set, color) pair reaches the best value found; because the search runs in
    lexicographic order the returned coloring is the lexicographically
    smallest canonical optimum.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    m = s.universe_size
    required = canonical_count(m, k)
    if required > state_cap:
        raise CapacityError(required, state_cap, "canonical colorings")

    sizes = s.sizes
    n = s.n
    touching = [[i for i in range(n) if j in s.sets[i]] for j in range(m)]
    counts = [[0] * k for _ in range(n)]
    remaining = list(sizes)
    assignment = [0] * m
    floor_bound = scaled_lower_bound(s, k)

    best_value = sys.maxsize
    best_assignment: list[int] | None = None

    def set_bound(i: int) -> int:
        size, rem, row = sizes[i], remaining[i], counts[i]
        worst = 0
        for c in row:
            over = k * c - size
            under = size - k * (c + rem)
            worst = max(worst, over, under)
        return worst

    def visit(j: int, used: int, bound: int) -> bool:
        # returns True once the global floor is reached
        nonlocal best_value, best_assignment
        if j == m:
            if bound < best_value:
                best_value, best_assignment = bound, assignment[:]
            return best_value <= floor_bound
        sets_j = touching[j]
        for i in sets_j:
            remaining[i] -= 1
        stop = False
        for h in range(min(used + 1, k)):
            assignment[j] = h
            for i in sets_j:
                counts[i][h] += 1
            child = bound
            for i in sets_j:
                child = max(child, set_bound(i))
            if child < best_value:
                stop = visit(j + 1, max(used, h + 1), child)
            for i in sets_j:
                counts[i][h] -= 1
            if stop:
                break
        for i in sets_j:
            remaining[i] += 1
        return stop

    initial = max(set_bound(i) for i in range(n))
    visit(0, 0, initial)
    assert best_assignment is not None
    chi = Coloring(k, tuple(best_assignment))
    result = discrepancy(chi, s)
    assert result.value == Fraction(best_value, k)
    return chi, result


def min_discrepancy_search(
    s: SetSystem, k: int, budget: int = 50, seed: int = 0
) -> tuple[Coloring, DiscrepancyResult]:
    """Best coloring found by ``budget`` restarts of single-element recoloring descent.

    Each restart draws a uniform random coloring from its own substream, then
    repeatedly applies the first move (elements in index order, target colors
    ascending) that strictly lowers the discrepancy until none does.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    m, n = s.universe_size, s.n
    member = np.zeros((n, m), dtype=np.int64)
    for i, members in enumerate(s.sets):
        member[i, list(members)] = 1
    sizes = np.asarray(s.sizes, dtype=np.int64)[:, None]
    floor_bound = scaled_lower_bound(s, k)

    best_value, best_assignment = None, None
    for restart in range(budget):
        rng = substream(seed, restart)
        chi = rng.integers(0, k, size=m)
        counts = member @ np.eye(k, dtype=np.int64)[chi]
        value = int(np.abs(k * counts - sizes).max())
        improved = True
        while improved and value > floor_bound:
            improved = False
            for j in range(m):
                col = member[:, j]
                old = chi[j]
                for h in range(k):
                    if h == old:
                        continue
                    counts[:, old] -= col
                    counts[:, h] += col
                    new_value = int(np.abs(k * counts - sizes).max())
                    if new_value < value:
                        chi[j], value, improved = h, new_value, True
                        break
                    counts[:, h] -= col
                    counts[:, old] += col
                if improved:
                    break
        if best_value is None or value < best_value:
            best_value, best_assignment = value, chi.copy()
        if best_value <= floor_bound:
            break
    chi = Coloring(k, tuple(int(c) for c in best_assignment))
    return chi, discrepancy(chi, s)


def min_discrepancy_milp(
    s: SetSystem, k: int, time_limit: float | None = None
) -> tuple[Coloring, DiscrepancyResult, bool]:
    """Minimum discrepancy through an integer program solved by HiGHS.

    Works on ``T = k * discrepancy`` so every coefficient is an integer. The
    coloring is re-evaluated exactly; the returned flag is True only when the
    solver's dual bound rules out ``T - 1``, i.e. the value is proven optimal.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    m, n = s.universe_size, s.n
    nvar = m * k + 1
    t_idx = m * k
    rows = m + 2 * n * k
    a = lil_matrix((rows, nvar))
    lo = np.empty(rows)
    hi = np.empty(rows)
    r = 0
    for j in range(m):
        for h in range(k):
            a[r, j * k + h] = 1
        lo[r] = hi[r] = 1
        r += 1
    for i, members in enumerate(s.sets):
        size = len(members)
        for h in range(k):
            for j in members:
                a[r, j * k + h] = k
                a[r + 1, j * k + h] = k
            a[r, t_idx] = -1
            a[r + 1, t_idx] = 1
            lo[r], hi[r] = -np.inf, size
            lo[r + 1], hi[r + 1] = size, np.inf
            r += 2

    lower = np.zeros(nvar)
    upper = np.ones(nvar)
    # element j never needs a color above j (canonical relabelling)
    for j in range(m):
        for h in range(j + 1, k):
            upper[j * k + h] = 0
    lower[t_idx] = scaled_lower_bound(s, k)
    upper[t_idx] = (k - 1) * max(s.sizes) if max(s.sizes) else 0
    upper[t_idx] = max(upper[t_idx], lower[t_idx])
    cost = np.zeros(nvar)
    cost[t_idx] = 1
    options = {"disp": False, "mip_rel_gap": 0.0}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(
        cost,
        constraints=LinearConstraint(a.tocsr(), lo, hi),
        integrality=np.ones(nvar),
        bounds=Bounds(lower, upper),
        options=options,
    )
    if res.x is None:
        raise RuntimeError(f"MILP solver returned no solution: {res.message}")
    x = res.x[: m * k].reshape(m, k)
    chi = Coloring(k, tuple(int(np.argmax(row)) for row in x))
    result = discrepancy(chi, s)
    scaled = int(result.value * k)
    dual = getattr(res, "mip_dual_bound", None)
    proven = scaled == lower[t_idx] or (
        res.status == 0 and dual is not None and dual > scaled - 1 + 1e-6
    )
    return chi, result, bool(proven)


def find_coloring_within(
    s: SetSystem, k: int, scaled_target: int, max_steps: int = 20000, seed: int = 0
) -> Coloring | None:
    """Tabu min-conflicts search for a coloring with ``k * discrepancy <= scaled_target``.

    Minimizes the summed squared excess of every (set, color) deviation over the
    target, always taking the best non-tabu single-element recoloring. Returns
    None when ``max_steps`` moves do not reach the target.
    """
    m, n = s.universe_size, s.n
    member = np.zeros((n, m), dtype=np.int64)
    for i, members in enumerate(s.sets):
        member[i, list(members)] = 1
    sizes = np.asarray(s.sizes, dtype=np.int64)[:, None]
    rng = substream(seed, 0)
    chi = rng.integers(0, k, size=m)
    dev = k * (member @ np.eye(k, dtype=np.int64)[chi]) - sizes
    elements = np.arange(m)
    tabu_until = np.zeros(m, dtype=np.int64)
    blocked = np.iinfo(np.int64).max // 4

    def excess(x):
        return np.maximum(0, np.abs(x) - scaled_target) ** 2

    for step in range(max_steps):
        if int(np.abs(dev).max()) <= scaled_target:
            return Coloring(k, tuple(int(c) for c in chi))
        base = excess(dev)
        leave = member.T @ (excess(dev - k) - base)
        enter = member.T @ (excess(dev + k) - base)
        delta = leave[elements, chi][:, None] + enter
        delta[elements, chi] = blocked
        delta[tabu_until > step, :] = blocked
        best = delta.min()
        if best >= blocked:
            tabu_until[:] = 0
            continue
        choices = np.argwhere(delta == best)
        j, h = choices[rng.integers(len(choices))]
        old = chi[j]
        dev[:, old] -= k * member[:, j]
        dev[:, h] += k * member[:, j]
        chi[j] = h
        tabu_until[j] = step + 1 + rng.integers(1, 10)
    if int(np.abs(dev).max()) <= scaled_target:
        return Coloring(k, tuple(int(c) for c in chi))
    return None


@dataclass(frozen=True)
class ExactSolution:
    coloring: Coloring
    result: DiscrepancyResult
    proven: bool
    method: str


def solve_exact(
    s: SetSystem,
    k: int,
    state_cap: int = DEFAULT_STATE_CAP,
    seed: int = 0,
    search_steps: int = 20000,
    milp_time_limit: float | None = 30.0,
) -> ExactSolution:
    """Minimum discrepancy with a certificate, for instances of any size.

    Small instances go through :func:`min_discrepancy_exact`. Larger ones are
    certified when a coloring meeting :func:`scaled_lower_bound` is found, or
    when the MILP dual bound closes the gap. Otherwise the best coloring seen is
    returned with ``proven=False``.
    """
    if canonical_count(s.universe_size, k) <= state_cap:
        chi, result = min_discrepancy_exact(s, k, state_cap)
        return ExactSolution(chi, result, True, "enumeration")
    floor_bound = scaled_lower_bound(s, k)
    chi = find_coloring_within(s, k, floor_bound, search_steps, seed)
    if chi is not None:
        return ExactSolution(chi, discrepancy(chi, s), True, "lower-bound")
    chi, result, proven = min_discrepancy_milp(s, k, milp_time_limit)
    return ExactSolution(chi, result, proven, "milp")
