"""Exact Binomial(t, 1/2) tails and numerical evaluation of the probability
inequality chains behind the discrepancy and fair-division lower bounds.

Chain reports evaluate every link separately and never stop at a failing one.
Each link is one :class:`~multidisc.core.BoundReport` whose ``kind`` says how
it was checked:

``algebra``   exact comparison of rationals / square-root surds (zero tolerance)
``tail``      exact binomial probability against an exponential bound
``analytic``  real inequality between logs, evaluated with 80 significant digits
``identity``  equality of two independently computed logs, relative error 1e-12

``preconditions_met`` is False when the link depends on a hypothesis (usually a
size condition on the parameters tied to the proof constant) that the given
parameters do not satisfy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Sequence

import mpmath
import numpy as np

from .core import (
    BoundReport,
    Coloring,
    DomainError,
    PreconditionError,
    SetSystem,
    Surd,
    ceil_exact,
    exact,
    floor_exact,
)
from .discrepancy import discrepancy
from .rng import substream

DPS = 80
IDENTITY_RTOL = 1e-12
# analytic "<=" links that are equalities in exact arithmetic (Jensen at a
# constant vector) need room for rounding in the last of the 80 digits
ANALYTIC_TOL = mpmath.mpf("1e-60")
EXACT_TAIL_LIMIT = 4000


# ---------------------------------------------------------------------------
# exact tails


@lru_cache(maxsize=512)
def _prefix_counts(t: int) -> tuple[int, ...]:
    out, acc = [], 0
    for i in range(t + 1):
        acc += math.comb(t, i)
        out.append(acc)
    return tuple(out)


def binom_tail_le(t: int, j: int) -> Fraction:
    """Exact ``Pr[X <= j]`` for ``X ~ Binomial(t, 1/2)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if j < 0:
        return Fraction(0)
    if j >= t:
        return Fraction(1)
    return Fraction(_prefix_counts(t)[j], 1 << t)


def binom_tail_ge(t: int, j: int) -> Fraction:
    """Exact ``Pr[X >= j]``, by symmetry ``Pr[X <= t - j]``."""
    return binom_tail_le(t, t - j)


def binom_pmf(t: int, j: int) -> Fraction:
    if not 0 <= j <= t:
        return Fraction(0)
    return Fraction(math.comb(t, j), 1 << t)


def prob_below(t: int, x: Any) -> Fraction:
    """``Pr[X < x]`` for an exact real threshold."""
    return binom_tail_le(t, ceil_exact(x) - 1)


def prob_above(t: int, x: Any) -> Fraction:
    """``Pr[X > x]`` for an exact real threshold."""
    return binom_tail_ge(t, floor_exact(x) + 1)


def prob_at_most(t: int, x: Any) -> Fraction:
    return binom_tail_le(t, floor_exact(x))


def prob_at_least(t: int, x: Any) -> Fraction:
    return binom_tail_ge(t, ceil_exact(x))


# ---------------------------------------------------------------------------
# reverse Chernoff


def _chernoff_failures(t: int, eps: Fraction) -> list[str]:
    failed = []
    if not 0 < eps <= Fraction(1, 2):
        failed.append("eps in (0, 1/2]")
    if eps * eps * t < 6:
        failed.append("eps^2 * t >= 6")
    return failed


def reverse_chernoff_bound(t: int, eps: Any) -> float:
    """``exp(-9 eps^2 t / 2)``, defined for ``eps`` in (0, 1/2] with ``eps^2 t >= 6``."""
    e = exact(eps)
    failed = _chernoff_failures(t, e)
    if failed:
        raise DomainError("reverse Chernoff bound needs " + " and ".join(failed))
    return math.exp(-9 * float(e) ** 2 * t / 2)


def _log(x: Any) -> mpmath.mpf:
    """Natural log of a nonnegative exact number (``-inf`` at zero)."""
    x = to_mpf(x)
    if x <= 0:
        return mpmath.mpf("-inf")
    return mpmath.log(x)


def to_mpf(x: Any) -> mpmath.mpf:
    if isinstance(x, Surd):
        return to_mpf(x.a) + to_mpf(x.b) * mpmath.sqrt(to_mpf(x.q))
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def verify_reverse_chernoff(t: int, eps: Any) -> BoundReport:
    """Check both reverse Chernoff tails against the exact binomial distribution.

    ``rhs_log`` is the log of the smaller of ``Pr[X <= (t/2)(1-eps)]`` and
    ``Pr[X >= (t/2)(1+eps)]``; ``lhs_log`` is ``-9 eps^2 t / 2``.
    """
    e = exact(eps)
    failed = _chernoff_failures(t, e)
    if failed:
        raise DomainError("reverse Chernoff bound needs " + " and ".join(failed))
    half = Fraction(t, 2)
    lower = binom_tail_le(t, math.floor(half * (1 - e)))
    upper = binom_tail_ge(t, math.ceil(half * (1 + e)))
    with mpmath.workdps(DPS):
        bound_log = -9 * to_mpf(e) ** 2 * t / 2
        tail_log = _log(min(lower, upper))
        return BoundReport.compare(f"reverse_chernoff t={t} eps={e}", bound_log, tail_log,
                                   kind="tail")


@dataclass(frozen=True)
class GridPoint:
    t: int
    eps: Fraction
    report: BoundReport | None  # None when the point violates the preconditions


def chernoff_grid(t_min: int = 24, t_max: int = 400, eps_step: Any = Fraction(1, 20)) -> list[GridPoint]:
    step = exact(eps_step)
    if step <= 0:
        raise ValueError("eps_step must be positive")
    points = []
    for t in range(t_min, t_max + 1):
        j = 1
        while j * step <= Fraction(1, 2):
            eps = j * step
            report = None if _chernoff_failures(t, eps) else verify_reverse_chernoff(t, eps)
            points.append(GridPoint(t, eps, report))
            j += 1
    return points


# ---------------------------------------------------------------------------
# discrepancy events


def event_prob_disc(color_class_size: int, m: int, k: int, d: Any, side: str) -> Fraction:
    """Exact probability that a random set meets a color class of the given size in
    fewer than ``m/(2k) - d`` (``side="low"``) or more than ``m/(2k) + d``
    (``side="high"``) elements."""
    if not 0 <= color_class_size <= m:
        raise PreconditionError("color class size must lie in [0, m]")
    center = Fraction(m, 2 * k)
    d = exact(d)
    if side == "low":
        return prob_below(color_class_size, center - d)
    if side == "high":
        return prob_above(color_class_size, center + d)
    raise ValueError("side must be 'low' or 'high'")


def lemma2_check(chi: Coloring, s: SetSystem, k: int, d: Any, i: int, h1: int, h2: int) -> bool:
    """Whether the coloring's discrepancy exceeds ``d``, given a set where a
    lower-half color is sparse and an upper-half color is dense.

    Colors ``0..floor(k/2)-1`` form the lower half. Requires
    ``|chi^-1(h1) ∩ S_i| < m/(2k) - d`` and ``|chi^-1(h2) ∩ S_i| > m/(2k) + d``.
    """
    if chi.k != k:
        raise PreconditionError("coloring uses a different number of colors")
    half = k // 2
    if not 0 <= h1 < half:
        raise PreconditionError(f"h1={h1} is not in the lower half [0, {half})")
    if not half <= h2 < k:
        raise PreconditionError(f"h2={h2} is not in the upper half [{half}, {k})")
    if not 0 <= i < s.n:
        raise PreconditionError(f"set index {i} out of range")
    d = exact(d)
    m = s.universe_size
    center = Fraction(m, 2 * k)
    members = s.sets[i]
    c1 = sum(1 for e in members if chi.assignment[e] == h1)
    c2 = sum(1 for e in members if chi.assignment[e] == h2)
    if not c1 < center - d:
        raise PreconditionError(f"event for color {h1} on set {i} does not hold")
    if not c2 > center + d:
        raise PreconditionError(f"event for color {h2} on set {i} does not hold")
    return discrepancy(chi, s).value > d


# ---------------------------------------------------------------------------
# chain plumbing


class _Chain:
    def __init__(self, exact_tails: bool):
        self.reports: list[BoundReport] = []
        self.exact_tails = exact_tails

    def algebra(self, label, lhs, rhs, relation="<=", pre=True, note=""):
        diff = Surd.lift(lhs) - Surd.lift(rhs)
        holds = {"<=": diff <= 0, "<": diff < 0, "==": diff == 0}[relation]
        self.reports.append(BoundReport.compare(
            label, _log(lhs), _log(rhs), relation=relation, preconditions_met=pre,
            kind="algebra", exact_holds=holds, note=note))

    def tail(self, label, bound_log, prob, relation="<=", pre=True, note=""):
        """``exp(bound_log) relation prob``, or the reverse when ``relation`` is ``">="``."""
        if relation == ">=":
            self.reports.append(BoundReport.compare(label, _log(prob), bound_log,
                                                    preconditions_met=pre, kind="tail", note=note))
        else:
            self.reports.append(BoundReport.compare(label, bound_log, _log(prob), relation=relation,
                                                    preconditions_met=pre, kind="tail", note=note))

    def analytic(self, label, lhs_log, rhs_log, relation="<=", pre=True, note="", tol=ANALYTIC_TOL):
        self.reports.append(BoundReport.compare(
            label, lhs_log, rhs_log, relation=relation, preconditions_met=pre,
            kind="analytic", tolerance=tol if relation == "<=" else 0.0, note=note))

    def identity(self, label, lhs_log, rhs_log, pre=True, note=""):
        self.reports.append(BoundReport.compare(
            label, lhs_log, rhs_log, relation="==", preconditions_met=pre, kind="identity",
            tolerance=IDENTITY_RTOL, note=note))

    def tails_ok(self, *sizes: int) -> bool:
        return self.exact_tails and all(0 <= t <= EXACT_TAIL_LIMIT for t in sizes)


def _square(d: Any) -> Fraction:
    sq = Surd.lift(d) * Surd.lift(d)
    return sq.to_fraction()


def _neg_log_k_pow(m: int, k: int) -> tuple[mpmath.mpf, mpmath.mpf]:
    """``-m ln k`` two ways: as a product, and as the log of the power ``k^-m``."""
    return -m * mpmath.log(k), mpmath.log(mpmath.power(mpmath.mpf(k), -m))


def _log1m_exp(x: mpmath.mpf) -> mpmath.mpf:
    """``log(1 - exp(-x))`` for ``x > 0``."""
    return mpmath.log1p(-mpmath.exp(-x))


# ---------------------------------------------------------------------------
# discrepancy chain


def disc_theorem_scale() -> tuple[int, int, int]:
    """Smallest ``(n, k, m)`` meeting the discrepancy theorem's hypotheses."""
    with mpmath.workdps(DPS):
        e48 = mpmath.exp(48)
        k = int(mpmath.ceil(3 + 6 * e48))
        n = int(mpmath.ceil(1 + 147 * e48 * mpmath.log(k)))
        m = int(mpmath.floor((n - 1) * mpmath.mpf(k) / (3 * e48 * mpmath.log(k))))
    return n, k, m


def disc_chain_report(n: int, k: int, m: int, d: Any = None, exact_tails: bool = True) -> list[BoundReport]:
    """Evaluate every link of the discrepancy lower-bound chain at ``(n, k, m, d)``.

    ``d`` defaults to ``sqrt(m/k)``. Color classes range over the integer sizes
    in ``[m/k - d, m/k + d]``; per-class links are checked at both ends.
    """
    d = Surd.sqrt(Fraction(m, k)) if d is None else Surd.lift(exact(d))
    ch = _Chain(exact_tails)
    q = Fraction(m, k)
    with mpmath.workdps(DPS):
        e48 = mpmath.exp(48)
        lnk = mpmath.log(k)
        hyp_k = k >= 3 + 6 * e48
        hyp_n = n >= 1 + 147 * e48 * lnk
        theorem = hyp_k and hyp_n
        m_def = m <= (n - 1) * mpmath.mpf(k) / (3 * e48 * lnk)
        dd = _square(d)

        ch.algebra("setup: sqrt(m/k) >= 7", 49, q, pre=hyp_n)
        ch.algebra("setup: d <= m/(7k)", d, Fraction(m, 7 * k), pre=hyp_n)

        s_lo = max(0, ceil_exact(q - d))
        s_hi = min(m, floor_exact(q + d))
        ends = sorted({s_lo, s_hi})
        claim_ok = {}
        for s in ends:
            ok1 = 6 * d <= s
            ok2 = 6 * s <= 9 * dd
            claim_ok[s] = ok1 and ok2
            ch.algebra(f"claim: eps=3d/s <= 1/2 at s={s}", 6 * d, s, pre=hyp_n)
            ch.algebra(f"claim: eps^2*s >= 6 at s={s}", 6 * s, 9 * dd, pre=hyp_n,
                       note="uses the upper class-size bound m/k + d")

        worst_low = worst_high = None
        for s in ends:
            if s == 0:
                continue
            bound = -mpmath.mpf(81) / 2 * to_mpf(dd) / s
            if ch.tails_ok(s):
                for side in ("low", "high"):
                    p = event_prob_disc(s, m, k, d, side)
                    ch.tail(f"event {side}: Pr >= exp(-81 d^2/(2s)) at s={s}", bound, p,
                            relation="<=", pre=claim_ok[s])
            ch.analytic(f"class size: exp(-81 d^2/(2s)) >= exp(-81 d^2/(2(m/k-d))) at s={s}",
                        -mpmath.mpf(81) / 2 * to_mpf(dd) / to_mpf(q - d), bound, pre=s >= q - d)
        if ch.tails_ok(s_hi):
            lows = [1 - event_prob_disc(s, m, k, d, "low") for s in range(s_lo, s_hi + 1)]
            highs = [1 - event_prob_disc(s, m, k, d, "high") for s in range(s_lo, s_hi + 1)]
            worst_low, worst_high = max(lows), max(highs)

        l1 = -mpmath.mpf(81) / 2 * to_mpf(dd) / to_mpf(q - d)
        l2 = -mpmath.mpf(81) / 2 * 7 * to_mpf(dd) * k / (6 * m)
        ch.analytic("event: exp(-81 d^2/(2(m/k-d))) >= exp(-(81/2)(7 d^2 k/(6m)))", l2, l1,
                    pre=hyp_n)
        ch.analytic("event: exp(-(81/2)(7 d^2 k/(6m))) > exp(-48)", mpmath.mpf(-48), l2,
                    relation="<", pre=hyp_n)
        x48 = mpmath.exp(-48)
        ch.analytic("event: 1 - exp(-48) <= exp(-exp(-48))", _log1m_exp(48), -x48)
        if worst_low is not None:
            ch.tail("event: max Pr[not E] < exp(-exp(-48))", -x48, max(worst_low, worst_high),
                    relation=">=", pre=theorem)
            # independence within each half of the colors, union bound across halves
            h1, h2 = k // 2, k - k // 2
            log_per_set = mpmath.log(mpmath.exp(h1 * _log(worst_low)) + mpmath.exp(h2 * _log(worst_high)))
            ch.analytic("union: (prod Pr[not E_h1] + prod Pr[not E_h2])^(n-1) <= (2 exp(-((k-1)/2) exp(-48)))^(n-1)",
                        (n - 1) * log_per_set,
                        (n - 1) * (mpmath.log(2) - (k - 1) * x48 / 2), pre=theorem,
                        note="exact class probabilities at the worst class size")

        h1, h2 = k // 2, k - k // 2
        p_bar = -x48  # log of the per-event bound exp(-exp(-48))
        analytic_per_set = mpmath.log(mpmath.exp(h1 * p_bar) + mpmath.exp(h2 * p_bar))
        lhs0 = (n - 1) * analytic_per_set
        rhs0 = (n - 1) * (mpmath.log(2) - (k - 1) * x48 / 2)
        ch.analytic("union: halves have >= (k-1)/2 colors", lhs0, rhs0)
        rhs1 = (n - 1) * (1 - (k - 1) * x48 / 2)
        ch.analytic("chain: 2 exp(-x) <= exp(1 - x)", rhs0, rhs1)
        rhs2 = -(n - 1) * mpmath.mpf(k) / 3 * x48
        ch.analytic("chain: exp((n-1)(1 - ((k-1)/2) exp(-48))) <= exp(-(n-1)(k/3) exp(-48))",
                    rhs1, rhs2, pre=hyp_k)
        prod_form, pow_form = _neg_log_k_pow(m, k)
        ch.analytic("chain: exp(-(n-1)(k/3) exp(-48)) <= exp(-m ln k)", rhs2, prod_form,
                    pre=bool(m_def))
        ch.identity("identity: exp(-m ln k) = k^-m", prod_form, pow_form)
        ch.analytic("final: Pr[coloring has discrepancy <= d] < k^-m", lhs0, pow_form,
                    relation="<", pre=theorem)
    return ch.reports


# ---------------------------------------------------------------------------
# fair-division chains


def _check_sizes(bundle_sizes: Sequence[int], m: int, k: int) -> tuple[int, ...]:
    sizes = tuple(int(x) for x in bundle_sizes)
    if len(sizes) != k:
        raise PreconditionError(f"expected {k} bundle sizes, got {len(sizes)}")
    if sum(sizes) != m:
        raise PreconditionError(f"bundle sizes sum to {sum(sizes)}, expected m={m}")
    if min(sizes) < 0:
        raise PreconditionError("bundle sizes must be nonnegative")
    return sizes


def _even_split(m: int, k: int) -> tuple[int, ...]:
    base, extra = divmod(m, k)
    return tuple(base + (h < extra) for h in range(k))


def _require_lower(sizes: Sequence[int], low: Any) -> None:
    for h, s in enumerate(sizes):
        if s < low:
            raise PreconditionError(f"bundle {h} has {s} items, below the allowed minimum m/k - d")


def ef_event_probability(sizes: Sequence[int], own: int, d: Any) -> Fraction:
    """Exact ``Pr[v(A_own) >= v(A_h) - d for all h]`` for a fair-coin follower."""
    d = exact(d)
    total = Fraction(0)
    for x in range(sizes[own] + 1):
        term = binom_pmf(sizes[own], x)
        for h, s in enumerate(sizes):
            if h != own:
                term *= prob_at_most(s, x + d)
        total += term
    return total


def prop_event_probability(sizes: Sequence[int], own: int, d: Any) -> Fraction:
    """Exact ``Pr[v(A_own) >= (1/k) v(all) - d]`` for a fair-coin follower."""
    d = exact(d)
    k, m = len(sizes), sum(sizes)
    rest = m - sizes[own]
    total = Fraction(0)
    for x in range(sizes[own] + 1):
        total += binom_pmf(sizes[own], x) * prob_at_most(rest, (k - 1) * x + k * d)
    return total


def ef_event_chain_report(
    n: int,
    k: int,
    m: int,
    bundle_sizes: Sequence[int] | None = None,
    d: Any = None,
    own: int = 0,
    other: int | None = None,
    exact_tails: bool = True,
) -> list[BoundReport]:
    """Links of the envy-freeness chain for one follower of group ``own`` and an
    allocation with the given bundle sizes; ``other`` plays the role of the
    compared group (defaults to the first group that is not ``own``)."""
    d = Surd.sqrt(Fraction(m, k)) if d is None else Surd.lift(exact(d))
    sizes = _check_sizes(bundle_sizes or _even_split(m, k), m, k)
    q = Fraction(m, k)
    for h, s in enumerate(sizes):
        if not q - d <= s <= q + d:
            raise PreconditionError(f"bundle {h} has {s} items, outside [m/k - d, m/k + d]")
    if other is None:
        other = 1 if own == 0 else 0
    if other == own:
        raise PreconditionError("the compared group must differ from the agent's group")
    sg, sh = sizes[own], sizes[other]
    dd = _square(d)
    ch = _Chain(exact_tails)
    with mpmath.workdps(DPS):
        e124 = mpmath.exp(124)
        lnk = mpmath.log(k)
        theorem = n >= k + 242 * e124 * k * lnk
        m_def = m <= (n - k) / (2 * e124 * lnk)
        setup = q >= 121

        ch.algebra("setup: sqrt(m/k) >= 11", 121, q, pre=theorem)
        ch.algebra("setup: m >= 11 k d", 11 * k * d, m, pre=theorem)
        ch.algebra("size: |A_h*| >= |A_g| - 2d", sg - 2 * d, sh)
        ch.algebra("E1 threshold: |A_g|/2 - 5d/2 <= |A_h*|/2 - 3d/2",
                   Fraction(sg, 2) - Fraction(5, 2) * d, Fraction(sh, 2) - Fraction(3, 2) * d)
        ch.algebra("claim: m/k - d >= 10d", 10 * d, q - d, pre=setup)
        ch.algebra("claim: eps=5d/|A_g| <= 1/2", 10 * d, sg, pre=setup)
        ch.algebra("claim: m/k + d <= 12m/(11k)", q + d, Fraction(12 * m, 11 * k), pre=setup)
        ch.algebra("claim: 25m/(k|A_g|) >= 275/12", Fraction(275, 12) * sg, 25 * q, pre=setup)
        ch.algebra("claim: eps^2 |A_g| >= 6", 6 * sg, 25 * dd, pre=setup)

        bound1 = -mpmath.mpf(225) * to_mpf(dd) / (2 * sg)
        pr_e1 = pr_e2 = None
        if ch.tails_ok(sg, sh):
            pr_e1 = prob_at_most(sg, Fraction(sh, 2) - Fraction(3, 2) * d)
            pr_e2 = prob_at_least(sh, Fraction(sh, 2))
            ch.tail("E1: Pr >= exp(-9 eps^2 |A_g|/2)", bound1, pr_e1, pre=setup)
            ch.algebra("E2: Pr[v(A_h*) >= |A_h*|/2] >= 1/2", Fraction(1, 2), pr_e2)
        bound2 = -mpmath.mpf(225) * to_mpf(dd) / (2 * to_mpf(q - d))
        ch.analytic("E1: exp(-225 d^2/(2|A_g|)) >= exp(-225 d^2/(2(m/k-d)))", bound2, bound1)
        if dd == q:
            x = mpmath.sqrt(to_mpf(q))
            ch.identity("E1: 225 d^2/(2(m/k-d)) = 225 sqrt(m/k)/(2(sqrt(m/k)-1))",
                        bound2, -225 * x / (2 * (x - 1)))
        ch.analytic("E1: exp(-225 d^2/(2(m/k-d))) >= exp(-225*11/20)", -mpmath.mpf(2475) / 20,
                    bound2, pre=setup, note="bound at sqrt(m/k) = 11 is 123.75")
        ch.analytic("E1: exp(-225*11/20) > exp(-124)", mpmath.mpf(-124), -mpmath.mpf(2475) / 20,
                    relation="<")
        if pr_e1 is not None:
            ch.tail("E1 and E2: Pr[E1] Pr[E2] > exp(-124)/2", mpmath.mpf(-124) - mpmath.log(2),
                    pr_e1 * pr_e2, relation="<", pre=setup)
        ch.algebra("E1 and E2 exclude E: |A_h*|/2 - 3d/2 < |A_h*|/2 - d",
                   Fraction(sh, 2) - Fraction(3, 2) * d + 2 * d, Fraction(sh, 2) + d, relation="<",
                   note="both sides shifted by 2d to keep them positive")
        if pr_e1 is not None:
            pr_e = ef_event_probability(sizes, own, d)
            ch.tail("E: Pr[E] <= 1 - Pr[E1] Pr[E2]", _log(1 - pr_e1 * pr_e2), pr_e, relation=">=")
        x124 = mpmath.exp(-124) / 2
        ch.analytic("E: 1 - exp(-124)/2 <= exp(-exp(-124)/2)", _log1m_exp(124 + mpmath.log(2)), -x124)
        prod_form, pow_form = _neg_log_k_pow(m, k)
        ch.analytic("final: exp(-((n-k)/2) exp(-124)) <= exp(-m ln k)", -(n - k) * x124, prod_form,
                    pre=bool(m_def))
        ch.identity("identity: exp(-m ln k) = k^-m", prod_form, pow_form)
    return ch.reports


def prop_deficit_holds(m: int, k: int, d: Any, own_size: int, v_own: int, v_rest: int) -> bool:
    """Given both events, the agent misses her proportional share by more than ``d``.

    Requires ``v_own <= own_size/2 - 2kd``, ``v_rest >= (m - own_size)/2`` and
    ``own_size <= m/k + (k-1)d``; returns whether
    ``(1/k)(v_own + v_rest) - v_own >= (3(k-1)/2) d > d`` holds exactly.
    """
    d = exact(d)
    if not v_own <= Fraction(own_size, 2) - 2 * k * d:
        raise PreconditionError("E1 does not hold")
    if not v_rest >= Fraction(m - own_size, 2):
        raise PreconditionError("E2 does not hold")
    if not own_size <= Fraction(m, k) + (k - 1) * d:
        raise PreconditionError("own bundle exceeds m/k + (k-1)d")
    gap = Fraction(v_own + v_rest, k) - v_own
    target = Fraction(3 * (k - 1), 2) * d
    return bool(gap >= target and target > d)


def prop_event_chain_report(
    n: int,
    k: int,
    m: int,
    bundle_sizes: Sequence[int] | None = None,
    d: Any = None,
    own: int = 0,
    exact_tails: bool = True,
) -> list[BoundReport]:
    """Links of the proportionality chain with ``d = sqrt(m/k^3)`` by default."""
    d = Surd.sqrt(Fraction(m, k**3)) if d is None else Surd.lift(exact(d))
    sizes = _check_sizes(bundle_sizes or _even_split(m, k), m, k)
    q = Fraction(m, k)
    _require_lower(sizes, q - d)
    sg = sizes[own]
    rest = m - sg
    dd = _square(d)
    ch = _Chain(exact_tails)
    with mpmath.workdps(DPS):
        e77 = mpmath.exp(77)
        lnk = mpmath.log(k)
        theorem = n >= k + 162 * e77 * k * lnk
        m_def = m <= (n - k) / (2 * e77 * lnk)
        setup = m >= 9 * k * k * d

        ch.algebra("setup: m >= 9 k^2 d", 9 * k * k * d, m, pre=theorem)
        ch.algebra("size: |A_g| <= m/k + (k-1)d", sg, q + (k - 1) * d)
        ch.algebra("claim: m/k - d >= 8kd", 8 * k * d, q - d, pre=setup)
        ch.algebra("claim: eps=4kd/|A_g| <= 1/2", 8 * k * d, sg, pre=setup)
        ch.algebra("claim: m/k + kd <= 10m/(9k)", q + k * d, Fraction(10 * m, 9 * k), pre=setup)
        ch.algebra("claim: 72 k^3 d^2/(5m) >= 6", 6, Fraction(72 * k**3, 5 * m) * dd, pre=setup)
        ch.algebra("claim: eps^2 |A_g| >= 6", 6 * sg, 16 * k * k * dd, pre=setup)
        ch.algebra("size: m/k - m/(9k^2) >= 17m/(18k)", Fraction(17 * m, 18 * k),
                   q - Fraction(m, 9 * k * k), pre=k >= 2)
        ch.algebra("size: |A_g| >= 17m/(18k)", Fraction(17 * m, 18 * k), sg, pre=setup)

        bound1 = -72 * mpmath.mpf(k * k) * to_mpf(dd) / sg
        bound2 = -mpmath.mpf(1296) * k**3 * to_mpf(dd) / (17 * m)
        pr_e1 = pr_e2 = None
        if ch.tails_ok(sg, rest):
            pr_e1 = prob_at_most(sg, Fraction(sg, 2) - 2 * k * d)
            pr_e2 = prob_at_least(rest, Fraction(rest, 2))
            ch.tail("E1: Pr >= exp(-72 k^2 d^2/|A_g|)", bound1, pr_e1, pre=setup)
            ch.algebra("E2: Pr[v(rest) >= (m-|A_g|)/2] >= 1/2", Fraction(1, 2), pr_e2)
        ch.analytic("E1: exp(-72 k^2 d^2/|A_g|) >= exp(-1296 k^3 d^2/(17m))", bound2, bound1,
                    pre=setup)
        ch.analytic("E1: exp(-1296 k^3 d^2/(17m)) > exp(-77)", mpmath.mpf(-77), bound2,
                    relation="<", pre=dd * k**3 <= m)
        if pr_e1 is not None:
            ch.tail("E1 and E2: Pr[E1] Pr[E2] >= exp(-77)/2", mpmath.mpf(-77) - mpmath.log(2),
                    pr_e1 * pr_e2, pre=setup)

        # deficit algebra at the extreme values the two events allow
        lhs_expr = Fraction(rest, 2) - (k - 1) * (Fraction(sg, 2) - 2 * k * d)
        mid = Fraction(m, 2) - Fraction(k * sg, 2) + 2 * k * (k - 1) * d
        target = Fraction(3 * k * (k - 1), 2) * d
        ch.algebra("deficit: (m-|A_g|)/2 - (k-1)(|A_g|/2 - 2kd) = m/2 - k|A_g|/2 + 2k(k-1)d",
                   lhs_expr, mid, relation="==")
        ch.algebra("deficit: m/2 - k|A_g|/2 + 2k(k-1)d >= (3k(k-1)/2) d", target, mid)
        ch.algebra("deficit: (3k(k-1)/2) d > k d", k * d, target, relation="<")
        v_own = floor_exact(Fraction(sg, 2) - 2 * k * d)
        v_rest = ceil_exact(Fraction(rest, 2))
        if v_own >= 0:
            ch.algebra("deficit: extreme event values violate v(A_g) >= (1/k) v(all) - d",
                       v_own + d + 1, Fraction(v_own + v_rest, k) + 1, relation="<",
                       note="both sides shifted by 1 to keep them positive")
        if pr_e1 is not None:
            pr_e = prop_event_probability(sizes, own, d)
            ch.tail("E: Pr[E] <= 1 - Pr[E1] Pr[E2]", _log(1 - pr_e1 * pr_e2), pr_e, relation=">=")
        x77 = mpmath.exp(-77) / 2
        ch.analytic("E: 1 - exp(-77)/2 <= exp(-exp(-77)/2)", _log1m_exp(77 + mpmath.log(2)), -x77)
        prod_form, pow_form = _neg_log_k_pow(m, k)
        ch.analytic("final: exp(-((n-k)/2) exp(-77)) <= exp(-m ln k)", -(n - k) * x77, prod_form,
                    pre=bool(m_def))
        ch.identity("identity: exp(-m ln k) = k^-m", prod_form, pow_form)
    return ch.reports


def zetas(bundle_sizes: Sequence[int], m: int, k: int, d: Any) -> list[Surd]:
    """``zeta_h`` with ``|A_h| = m/k + (zeta_h - 1) d``."""
    d = Surd.lift(exact(d))
    q = Fraction(m, k)
    return [1 + (s - q) / d for s in bundle_sizes]


def jensen_link(zeta: Sequence[Any], c: Any) -> BoundReport:
    """``sum_h exp(-c (3 + zeta_h)^2) >= k exp(-c (3 + mean zeta)^2)``.

    The function is convex on ``[0, inf)`` once ``c >= 1/18``; with
    ``sum zeta = k`` the right side is ``k exp(-16c)``.
    """
    k = len(zeta)
    with mpmath.workdps(DPS):
        cc = to_mpf(exact(c))
        z = [to_mpf(exact(x)) for x in zeta]
        mean = mpmath.fsum(z) / k
        terms = [-cc * (3 + x) ** 2 for x in z]
        top = max(terms)
        lhs = top + mpmath.log(mpmath.fsum(mpmath.exp(t - top) for t in terms))
        rhs = mpmath.log(k) - cc * (3 + mean) ** 2
        pre = exact(c) >= Fraction(1, 18) and all(x >= 0 for x in z)
        return BoundReport.compare("jensen: sum_h exp(-c(3+zeta_h)^2) >= k exp(-c(3+mean)^2)",
                                   rhs, lhs, preconditions_met=pre, kind="analytic",
                                   tolerance=ANALYTIC_TOL)


def propnew_event_chain_report(
    group_sizes: Sequence[int],
    m: int,
    bundle_sizes: Sequence[int] | None = None,
    d: Any = None,
    own: int = 0,
    exact_tails: bool = True,
) -> list[BoundReport]:
    """Links of the per-group proportionality chain with ``d = sqrt(m/k)`` by default."""
    k = len(group_sizes)
    d = Surd.sqrt(Fraction(m, k)) if d is None else Surd.lift(exact(d))
    sizes = _check_sizes(bundle_sizes or _even_split(m, k), m, k)
    q = Fraction(m, k)
    _require_lower(sizes, q - d)
    sg = sizes[own]
    rest = m - sg
    dd = _square(d)
    z = zetas(sizes, m, k, d)
    zg = z[own]
    ell = min(group_sizes) - 1
    ch = _Chain(exact_tails)
    with mpmath.workdps(DPS):
        e96 = mpmath.exp(96)
        lnk = mpmath.log(k)
        theorem = k >= 4 and min(group_sizes) >= 1 + 32 * e96 * k * k * lnk
        m_def = m <= ell * mpmath.mpf(k) / (2 * e96 * lnk)
        setup = k >= 4 and d <= Fraction(m, 4 * k * k)

        ch.algebra("setup: d <= m/(4k^2)", d, Fraction(m, 4 * k * k), pre=theorem)
        ch.algebra("setup: d <= m/(4k)", d, Fraction(m, 4 * k), pre=theorem)
        for h, zh in enumerate(z):
            ch.algebra(f"zeta: zeta_{h} >= 0", 0, zh)
            ch.algebra(f"zeta: zeta_{h} <= k", zh, k)
        ch.algebra("zeta: sum zeta_h = k", sum(z, Surd(0)), k, relation="==")
        ch.algebra("E1 threshold: m/(2k) - 2d = |A_g|/2 - (3+zeta_g)d/2",
                   q / 2 - 2 * d + (3 + zg) * d, Fraction(sg, 2) + (3 + zg) * d / 2 + Surd(0),
                   relation="==", note="both sides shifted by (3+zeta_g)d to keep them positive")

        a_g = Surd(q) + (zg - 1) * d
        eps_num = (3 + zg) * d
        ch.algebra("claim: eps(zeta_g) <= eps(k)", eps_num * (q + (k - 1) * d), (3 + k) * d * a_g,
                   pre=setup)
        ch.algebra("claim: (3+k)d/(m/k+(k-1)d) <= 2k^2 d/m", (3 + k) * d * m,
                   2 * k * k * d * (q + (k - 1) * d), pre=k >= 3)
        ch.algebra("claim: 2k^2 d/m <= 1/2", 4 * k * k * d, m, pre=setup)
        ch.algebra("claim: eps <= 1/2", 2 * eps_num, sg, pre=setup)
        ch.algebra("claim: eps^2 t is nondecreasing in zeta (2m/k - 5d >= 0)", 5 * d, 2 * q, pre=setup)
        ch.algebra("claim: 9d^2/(m/k-d) >= 9 d^2 k/m", 9 * dd * (q - d), 9 * dd * q, pre=setup,
                   note="replaces the printed 12 d^2 k/m step, which needs d >= m/(4k)")
        ch.algebra("claim: 9 d^2 k/m >= 6", 6, 9 * dd * k / m, pre=dd == q)
        ch.algebra("claim: eps^2 t >= 6", 6 * sg, eps_num * eps_num, pre=setup)
        ch.algebra("size: |A_g| >= 3m/(4k)", Fraction(3 * m, 4 * k), sg, pre=setup)

        bound1 = -9 * to_mpf(eps_num * eps_num) / (2 * sg)
        bound2 = -6 * to_mpf((3 + zg) * (3 + zg)) * to_mpf(dd) * k / m
        pr_e1 = pr_e2 = None
        if ch.tails_ok(sg, rest):
            pr_e1 = prob_at_most(sg, q / 2 - 2 * d)
            pr_e2 = prob_at_least(rest, Fraction(m * (k - 1), 2 * k) - Fraction(k - 1, 2) * d)
            ch.tail("E1: Pr >= exp(-9 (3+zeta_g)^2 d^2/(2|A_g|))", bound1, pr_e1, pre=setup)
            ch.algebra("E2: Pr >= 1/2", Fraction(1, 2), pr_e2)
        ch.analytic("E1: exp(-9(3+zeta)^2 d^2/(2|A_g|)) >= exp(-6(3+zeta)^2 d^2 k/m)", bound2, bound1,
                    pre=setup)
        ch.algebra("E2 threshold: m(k-1)/(2k) - (k-1)d/2 <= (m-|A_g|)/2",
                   Fraction(m * (k - 1), 2 * k) - Fraction(k - 1, 2) * d + k * d,
                   Fraction(rest, 2) + k * d, note="both sides shifted by kd to keep them positive")

        # deficit at the extreme values the two events allow
        target = Fraction(3 * (k - 1), 2 * k) * d
        ch.algebra("deficit: (3(k-1)/(2k)) d > d", d, target, relation="<", pre=k >= 4)
        v_own = floor_exact(q / 2 - 2 * d)
        v_rest = ceil_exact(Fraction(m * (k - 1), 2 * k) - Fraction(k - 1, 2) * d)
        if v_own >= 0:
            gap = Fraction(v_own + v_rest, k) - v_own
            ch.algebra("deficit: extreme event values give (1/k) v(all) - v(A_g) >= 3(k-1)d/(2k)",
                       target, Surd(gap) + 0, pre=k >= 4)
        if pr_e1 is not None:
            pr_e = prop_event_probability(sizes, own, d)
            ch.tail("E: Pr[E] <= 1 - Pr[E1] Pr[E2]", _log(1 - pr_e1 * pr_e2), pr_e, relation=">=")
            ch.tail("E: Pr[E] < exp(-(1/2) exp(-6(3+zeta)^2 d^2 k/m))",
                    -mpmath.exp(bound2) / 2, pr_e, relation=">=", pre=setup)

        c = 6 * to_mpf(dd) * k / m
        jl = jensen_link(z, Fraction(6) * dd * k / m)
        ch.reports.append(jl)
        sum_terms = mpmath.fsum(mpmath.exp(-c * (3 + to_mpf(x)) ** 2) for x in z)
        if dd == q:
            ch.identity("final: (k l/2) exp(-96 d^2 k/m) = k l/(2 e^96)",
                        mpmath.log(k * ell) - mpmath.log(2) - 96 * to_mpf(dd) * k / m,
                        mpmath.log(k * ell) - mpmath.log(2) - 96)
        ch.analytic("final: -(l/2) sum_h exp(-6(3+zeta_h)^2 d^2 k/m) <= -(k l/2) exp(-96 d^2 k/m)",
                    -ell * sum_terms / 2, -k * ell * mpmath.exp(-16 * c) / 2,
                    pre=c >= mpmath.mpf(1) / 18)
        prod_form, pow_form = _neg_log_k_pow(m, k)
        ch.analytic("final: exp(-k l/(2 e^96)) <= exp(-m ln k)", -k * ell / (2 * e96), prod_form,
                    pre=bool(m_def))
        ch.identity("identity: exp(-m ln k) = k^-m", prod_form, pow_form)
    return ch.reports


# ---------------------------------------------------------------------------
# Monte Carlo cross-checks


@dataclass(frozen=True)
class DiscEvent:
    """A random set (fair coin per element) meets a fixed color class of
    ``class_size`` elements below ``m/(2k) - d`` or above ``m/(2k) + d``."""

    m: int
    k: int
    d: Any
    class_size: int
    side: str

    def exact_probability(self) -> Fraction:
        return event_prob_disc(self.class_size, self.m, self.k, self.d, self.side)

    def occurs(self, coins: np.ndarray) -> np.ndarray:
        count = coins[:, : self.class_size].sum(axis=1)
        center = Fraction(self.m, 2 * self.k)
        d = exact(self.d)
        if self.side == "low":
            return count <= ceil_exact(center - d) - 1
        return count >= floor_exact(center + d) + 1

    @property
    def width(self) -> int:
        return self.m


@dataclass(frozen=True)
class FollowerEvent:
    """Events on a fair-coin follower's values for an allocation with contiguous
    bundles of the given sizes.

    ``construction`` is ``"ef"``, ``"prop"`` or ``"propnew"``; ``which`` is
    ``"E"`` (the fairness condition), ``"E1"`` or ``"E2"``.
    """

    construction: str
    which: str
    bundle_sizes: tuple[int, ...]
    d: Any
    own: int = 0
    other: int = 1

    @property
    def width(self) -> int:
        return sum(self.bundle_sizes)

    def _thresholds(self):
        sizes, own = self.bundle_sizes, self.own
        k, m = len(sizes), sum(sizes)
        d = exact(self.d)
        sg = sizes[own]
        if self.construction == "ef":
            sh = sizes[self.other]
            return {"E1": Fraction(sh, 2) - Fraction(3, 2) * d, "E2": Fraction(sh, 2)}
        if self.construction == "prop":
            return {"E1": Fraction(sg, 2) - 2 * k * d, "E2": Fraction(m - sg, 2)}
        return {"E1": Fraction(m, 2 * k) - 2 * d,
                "E2": Fraction(m * (k - 1), 2 * k) - Fraction(k - 1, 2) * d}

    def exact_probability(self) -> Fraction:
        sizes, own = self.bundle_sizes, self.own
        m = sum(sizes)
        th = self._thresholds()
        if self.which == "E1":
            return prob_at_most(sizes[own], th["E1"])
        if self.which == "E2":
            t = sizes[self.other] if self.construction == "ef" else m - sizes[own]
            return prob_at_least(t, th["E2"])
        if self.construction == "ef":
            return ef_event_probability(sizes, own, self.d)
        return prop_event_probability(sizes, own, self.d)

    def occurs(self, coins: np.ndarray) -> np.ndarray:
        sizes, own = self.bundle_sizes, self.own
        k = len(sizes)
        edges = np.cumsum((0,) + tuple(sizes))
        values = np.stack([coins[:, edges[h]:edges[h + 1]].sum(axis=1) for h in range(k)], axis=1)
        v_own = values[:, own]
        rest = values.sum(axis=1) - v_own
        d = exact(self.d)
        th = self._thresholds()
        if self.which == "E1":
            return v_own <= floor_exact(th["E1"])
        if self.which == "E2":
            target = values[:, self.other] if self.construction == "ef" else rest
            return target >= ceil_exact(th["E2"])
        if self.construction == "ef":
            slack = floor_exact(d)
            others = np.delete(values, own, axis=1)
            return (others <= (v_own + slack)[:, None]).all(axis=1)
        return rest <= (k - 1) * v_own + floor_exact(k * d)


def estimate_event_rate(event, trials: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo frequency of ``event`` over fresh fair-coin rows, with the
    normal-approximation 95% confidence half-width."""
    if trials < 100:
        raise PreconditionError("estimate_event_rate needs at least 100 trials")
    coins = substream(seed, 0).integers(0, 2, size=(trials, event.width), dtype=np.int64)
    hits = int(np.count_nonzero(event.occurs(coins)))
    rate = hits / trials
    return rate, 1.96 * math.sqrt(rate * (1 - rate) / trials)
