"""Seeded random hard instances: the discrepancy set system and the
leader/follower valuation profiles for EF, PROP and per-group PROP.

Every construction reads its proof constant from ``constant_c``; the default is
the theorem's own constant, which forces ``m = 0`` at any size a desk machine can
handle, so experiments pass something in ``[0.5, 4]`` instead.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath

from .core import GroupedInstance, ParameterError, SetSystem, Surd
from .rng import coin_row

CONSTRUCTIONS = ("disc", "ef", "prop", "propnew")


def default_constant(construction: str) -> mpmath.mpf:
    with mpmath.workdps(60):
        return {
            "disc": 3 * mpmath.exp(48),
            "ef": 2 * mpmath.exp(124),
            "prop": 2 * mpmath.exp(77),
            "propnew": 2 * mpmath.exp(96),
        }[construction]


class TheoremRangeWarning(UserWarning):
    """Parameters are outside the range the matching theorem covers."""


@dataclass(frozen=True)
class ConstructionParams:
    n: int | None = None
    k: int = 2
    constant_c: float | Fraction | None = None
    group_sizes: tuple[int, ...] | None = None
    seed: int = 0

    def constant(self, construction: str):
        if self.constant_c is None:
            return default_constant(construction)
        if not self.constant_c > 0:
            raise ParameterError("constant_c must be positive")
        c = self.constant_c
        if isinstance(c, Fraction):
            return mpmath.mpf(c.numerator) / c.denominator
        return mpmath.mpf(c)


def _floor_ratio(numer: int, c, k: int) -> int:
    with mpmath.workdps(80):
        return int(mpmath.floor(mpmath.mpf(numer) / (c * mpmath.log(k))))


def _ceil_ratio(c, k: int, divide_by: int) -> int:
    with mpmath.workdps(80):
        return int(mpmath.ceil(c * mpmath.log(k) / divide_by))


def construction_size(construction: str, p: ConstructionParams) -> tuple[int, Surd]:
    """Number of elements/items ``m`` and the threshold ``d`` for a construction."""
    if construction not in CONSTRUCTIONS:
        raise ParameterError(f"unknown construction {construction!r}")
    k = p.k
    if k < 2:
        raise ParameterError("k must be at least 2")
    c = p.constant(construction)
    if construction == "disc":
        n = _require_n(p)
        m = _floor_ratio((n - 1) * k, c, k)
        n_min = _ceil_ratio(c, k, k) + 1
        what = f"n >= {n_min}"
    elif construction in ("ef", "prop"):
        n = _group_sizes(p, required=False)[1]
        m = _floor_ratio(n - k, c, k)
        what = f"n >= {k + _ceil_ratio(c, k, 1)}"
    else:
        sizes, _ = _group_sizes(p, required=True)
        if min(sizes) < 2:
            raise ParameterError("every group needs at least 2 agents")
        m = _floor_ratio((min(sizes) - 1) * k, c, k)
        what = f"min group size >= {_ceil_ratio(c, k, k) + 1}"
    if m < 1:
        raise ParameterError(
            f"{construction} construction has m = {m} < 1 for k={k}, constant_c={mpmath.nstr(c, 6)}; "
            f"needs {what}"
        )
    power = 3 if construction == "prop" else 1
    return m, Surd.sqrt(Fraction(m, k**power))


def _require_n(p: ConstructionParams) -> int:
    if p.n is None:
        raise ParameterError("n is required")
    if p.n < 1:
        raise ParameterError("n must be positive")
    return p.n


def _group_sizes(p: ConstructionParams, required: bool) -> tuple[tuple[int, ...], int]:
    if p.group_sizes is not None:
        sizes = tuple(int(x) for x in p.group_sizes)
        if len(sizes) != p.k:
            raise ParameterError(f"expected {p.k} group sizes, got {len(sizes)}")
        if min(sizes) < 1:
            raise ParameterError("every group must be non-empty")
        if p.n is not None and p.n != sum(sizes):
            raise ParameterError(f"n={p.n} disagrees with group sizes summing to {sum(sizes)}")
        return sizes, sum(sizes)
    if required:
        raise ParameterError("group_sizes are required for this construction")
    n = _require_n(p)
    if n < p.k:
        raise ParameterError("need at least one agent per group")
    base, extra = divmod(n, p.k)
    return tuple(base + (h < extra) for h in range(p.k)), n


def gen_disc_system(p: ConstructionParams) -> tuple[SetSystem, Surd]:
    """``S_0`` is the whole universe; ``S_1..S_{n-1}`` take each element with probability 1/2.

    Set ``i`` is drawn from substream ``i`` of the seed.
    """
    m, d = construction_size("disc", p)
    sets = [frozenset(range(m))]
    for i in range(1, p.n):
        row = coin_row(p.seed, m, i)
        sets.append(frozenset(j for j, bit in enumerate(row) if bit))
    return SetSystem(m, tuple(sets)), d


def _leader_follower(p: ConstructionParams, m: int, sizes: Sequence[int]) -> GroupedInstance:
    groups, leaders, rows = [], [], []
    agent = 0
    for h, size in enumerate(sizes):
        for pos in range(size):
            groups.append(h)
            leaders.append(pos == 0)
            rows.append((1,) * m if pos == 0 else tuple(coin_row(p.seed, m, agent)))
            agent += 1
    return GroupedInstance(m, tuple(groups), tuple(leaders), tuple(rows))


def gen_ef_instance(p: ConstructionParams) -> tuple[GroupedInstance, Surd]:
    """Leader/follower profile with ``m = floor((n-k)/(c ln k))`` and ``d = sqrt(m/k)``.

    Agents are laid out group by group; the first agent of each group leads.
    Follower ``i`` draws her item values from substream ``i``.
    """
    m, d = construction_size("ef", p)
    sizes, _ = _group_sizes(p, required=False)
    return _leader_follower(p, m, sizes), d


def gen_prop_instance(p: ConstructionParams) -> tuple[GroupedInstance, Surd]:
    """As :func:`gen_ef_instance` with ``d = sqrt(m/k^3)``."""
    m, d = construction_size("prop", p)
    sizes, _ = _group_sizes(p, required=False)
    return _leader_follower(p, m, sizes), d


def gen_propnew_instance(p: ConstructionParams) -> tuple[GroupedInstance, Surd]:
    """Leader/follower profile sized by the smallest group:
    ``m = floor((min n_h - 1) k / (c ln k))``, ``d = sqrt(m/k)``.
    """
    m, d = construction_size("propnew", p)
    if p.k < 4:
        warnings.warn(f"per-group PROP bound is stated for k >= 4, got k={p.k}",
                      TheoremRangeWarning, stacklevel=2)
    sizes, _ = _group_sizes(p, required=True)
    return _leader_follower(p, m, sizes), d


def generate(construction: str, p: ConstructionParams):
    return {
        "disc": gen_disc_system,
        "ef": gen_ef_instance,
        "prop": gen_prop_instance,
        "propnew": gen_propnew_instance,
    }[construction](p)
