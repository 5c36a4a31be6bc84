"""CD-d, EF-d and PROP-d: per-allocation minimal d, exact instance optimum, and
the set-system to binary-valuation reduction.

For additive nonnegative values the fewest items whose removal closes a value
gap are the most valuable ones, so every minimal d is found greedily: remove
items in non-increasing value order (ties by ascending item index) until the
condition holds.
"""
from __future__ import annotations

import itertools
from typing import Iterable, Sequence, Union

from .core import (
    Allocation,
    CapacityError,
    DimensionError,
    GroupedInstance,
    SetSystem,
)
from .discrepancy import DEFAULT_STATE_CAP, canonical_count

Valuations = Sequence[Sequence[int]]
InstanceLike = Union[GroupedInstance, Valuations]

NOTIONS = ("CD", "EF", "PROP")


def _rows(inst: InstanceLike) -> Sequence[Sequence[int]]:
    if isinstance(inst, GroupedInstance):
        return inst.valuations
    rows = [tuple(r) for r in inst]
    if not rows or len({len(r) for r in rows}) != 1:
        raise DimensionError("valuation rows must be non-empty and equally long")
    return rows


def _check_items(rows: Sequence[Sequence[int]], a: Allocation) -> None:
    if a.num_items != len(rows[0]):
        raise DimensionError(
            f"allocation covers {a.num_items} items but the instance has {len(rows[0])}"
        )


def _check_groups(inst: GroupedInstance, a: Allocation) -> None:
    if not isinstance(inst, GroupedInstance):
        raise TypeError("EF and PROP need a GroupedInstance")
    _check_items(inst.valuations, a)
    if a.k != inst.num_groups:
        raise DimensionError(f"allocation has {a.k} bundles but there are {inst.num_groups} groups")


def greedy_removal(row: Sequence[int], items: Iterable[int], gap: int) -> tuple[int, ...]:
    """Items removed, in removal order, to lower the value of ``items`` by at least ``gap``."""
    if gap <= 0:
        return ()
    order = sorted(items, key=lambda j: (-row[j], j))
    removed, total = [], 0
    for j in order:
        removed.append(j)
        total += row[j]
        if total >= gap:
            return tuple(removed)
    raise ValueError("gap exceeds the value of the bundle")


def _removals(desc_values: Sequence[int], gap: int) -> int:
    if gap <= 0:
        return 0
    total = 0
    for count, v in enumerate(desc_values, start=1):
        total += v
        if total >= gap:
            return count
    raise ValueError("gap exceeds the value of the bundle")


def _bundle_profile(row: Sequence[int], bundles: Sequence[Iterable[int]]):
    values = [sorted((row[j] for j in b), reverse=True) for b in bundles]
    return values, [sum(v) for v in values]


def cd_min_d(inst: InstanceLike, a: Allocation) -> int:
    """Smallest d for which ``a`` is a consensus 1/k-division up to d items.

    Checked for every agent and every ordered pair of bundles ``(h, l)``: some
    ``B`` within ``A_l`` of at most d items leaves ``v(A_h) >= v(A_l \\ B)``.
    """
    rows = _rows(inst)
    _check_items(rows, a)
    worst = 0
    for row in rows:
        desc, totals = _bundle_profile(row, a.bundles)
        low = min(totals)
        for ell, v_ell in enumerate(totals):
            # the poorest bundle h gives the largest gap for this l
            worst = max(worst, _removals(desc[ell], v_ell - low))
    return worst


def ef_min_d(inst: GroupedInstance, a: Allocation) -> int:
    """Smallest d for which ``a`` is envy-free up to d items for every agent."""
    _check_groups(inst, a)
    worst = 0
    for i, row in enumerate(inst.valuations):
        desc, totals = _bundle_profile(row, a.bundles)
        own = totals[inst.group_of[i]]
        for h, v_h in enumerate(totals):
            worst = max(worst, _removals(desc[h], v_h - own))
    return worst


def prop_min_d(inst: GroupedInstance, a: Allocation) -> int:
    """Smallest d for which ``a`` is proportional up to d items.

    Agent i needs ``k*v(own) + k*v(B) >= v(all items)`` for some ``B`` of at most
    d items outside her group's bundle; everything stays in integers.
    """
    _check_groups(inst, a)
    k = a.k
    worst = 0
    for i, row in enumerate(inst.valuations):
        own_bundle = a.bundles[inst.group_of[i]]
        own = sum(row[j] for j in own_bundle)
        total = sum(row)
        outside = sorted((row[j] for j in range(len(row)) if j not in own_bundle), reverse=True)
        deficit = total - k * own
        if deficit <= 0:
            continue
        # each removed item of value v closes k*v of the scaled deficit
        worst = max(worst, _removals([k * v for v in outside], deficit))
    return worst


def min_d(inst: InstanceLike, a: Allocation, notion: str) -> int:
    notion = notion.upper()
    if notion == "CD":
        return cd_min_d(inst, a)
    if notion == "EF":
        return ef_min_d(inst, a)
    if notion == "PROP":
        return prop_min_d(inst, a)
    raise ValueError(f"unknown notion {notion!r}")


def is_cd(inst: InstanceLike, a: Allocation, d: int) -> bool:
    return cd_min_d(inst, a) <= d


def is_ef(inst: GroupedInstance, a: Allocation, d: int) -> bool:
    return ef_min_d(inst, a) <= d


def is_prop(inst: GroupedInstance, a: Allocation, d: int) -> bool:
    return prop_min_d(inst, a) <= d


def _restricted_growth(m: int, k: int):
    """Assignments in lexicographic order where colors appear in order of first use."""
    assignment = [0] * m

    def rec(j: int, used: int):
        if j == m:
            yield tuple(assignment)
            return
        for h in range(min(used + 1, k)):
            assignment[j] = h
            yield from rec(j + 1, max(used, h + 1))

    yield from rec(0, 0)


def exact_min_over_allocations(
    inst: InstanceLike,
    notion: str,
    state_cap: int = DEFAULT_STATE_CAP,
    k: int | None = None,
) -> tuple[Allocation, int]:
    """Allocation minimizing the notion's minimal d, by exhaustive enumeration.

    EF and PROP bundles are tied to groups, so all ``k**m`` ordered allocations
    are visited. CD treats bundles as unlabeled and visits one allocation per
    relabelling class. Ties go to the lexicographically smallest allocation
    (bundles compared as sorted item lists); for CD that is the class member
    with its bundles sorted.
    """
    notion = notion.upper()
    if notion not in NOTIONS:
        raise ValueError(f"unknown notion {notion!r}")
    rows = _rows(inst)
    m = len(rows[0])
    if notion == "CD":
        if k is None:
            k = inst.num_groups if isinstance(inst, GroupedInstance) else 0
        if k < 2:
            raise ValueError("CD needs an explicit number of bundles k >= 2")
        required = canonical_count(m, k)
        space = _restricted_growth(m, k)
    else:
        if not isinstance(inst, GroupedInstance):
            raise TypeError("EF and PROP need a GroupedInstance")
        if k is not None and k != inst.num_groups:
            raise DimensionError("k must equal the number of groups for EF and PROP")
        k = inst.num_groups
        required = k**m
        space = itertools.product(range(k), repeat=m)
    if required > state_cap:
        raise CapacityError(required, state_cap, "allocations")

    best_d, best_key = None, None
    for assignment in space:
        alloc = Allocation.from_assignment(assignment, k)
        value = min_d(inst, alloc, notion)
        key = alloc.sort_key()
        if notion == "CD":
            key = tuple(sorted(key))
        if best_d is None or value < best_d or (value == best_d and key < best_key):
            best_d, best_key = value, key
    return Allocation(tuple(frozenset(b) for b in best_key)), best_d


def set_system_to_instance(s: SetSystem) -> GroupedInstance:
    """One agent per set, valuing the items of her set at 1 and all others at 0.

    Agents are ungrouped (everyone in group 0, no leaders); the instance is meant
    for CD, where the number of bundles is supplied separately.
    """
    m = s.universe_size
    rows = tuple(tuple(1 if j in members else 0 for j in range(m)) for members in s.sets)
    return GroupedInstance(m, (0,) * s.n, (False,) * s.n, rows)
