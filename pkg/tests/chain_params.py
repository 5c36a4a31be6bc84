"""Random parameterizations that satisfy each chain's size hypotheses
(everything except the proof constant itself)."""
from __future__ import annotations

import random
from fractions import Fraction

from multidisc.core import Coloring, SetSystem, Surd


def _spread(rng: random.Random, k: int, total: int, low: int, high: int | None) -> tuple[int, ...]:
    sizes = [low] * k
    rest = total - k * low
    assert rest >= 0
    while rest:
        h = rng.randrange(k)
        if high is None or sizes[h] < high:
            step = rng.randint(1, rest)
            if high is not None:
                step = min(step, high - sizes[h])
            sizes[h] += step
            rest -= step
    return tuple(sizes)


def disc_params(rng: random.Random):
    k = rng.randint(2, 8)
    m = rng.randint(49 * k, 2000 * k)
    n = rng.randint(2, 10**6)
    return n, k, m


def ef_params(rng: random.Random):
    k = rng.randint(2, 8)
    m = rng.randint(121 * k, 1500 * k)
    q = Fraction(m, k)
    d = Surd.sqrt(q)
    sizes = _spread(rng, k, m, (q - d).ceil(), (q + d).floor())
    own, other = rng.sample(range(k), 2)
    return dict(n=rng.randint(k, 10**6), k=k, m=m, bundle_sizes=sizes, own=own, other=other)


def prop_params(rng: random.Random):
    k = rng.randint(2, 8)
    m = rng.randint(81 * k, 2000 * k)
    q = Fraction(m, k)
    d = Surd.sqrt(Fraction(m, k**3))
    sizes = _spread(rng, k, m, (q - d).ceil(), None)
    return dict(n=rng.randint(k, 10**6), k=k, m=m, bundle_sizes=sizes, own=rng.randrange(k))


def propnew_params(rng: random.Random):
    k = rng.randint(4, 8)
    m = rng.randint(16 * k**3, 40 * k**3)
    q = Fraction(m, k)
    d = Surd.sqrt(q)
    sizes = _spread(rng, k, m, (q - d).ceil(), None)
    groups = tuple(rng.randint(2, 50) for _ in range(k))
    return dict(group_sizes=groups, m=m, bundle_sizes=sizes, own=rng.randrange(k))


def random_zeta(rng: random.Random, k: int) -> list[Fraction]:
    """Nonnegative rationals summing to exactly ``k``."""
    cuts = sorted(Fraction(rng.randint(0, 10**6), 10**6) for _ in range(k - 1))
    points = [Fraction(0)] + cuts + [Fraction(1)]
    return [k * (b - a) for a, b in zip(points, points[1:])]


def lemma2_witness(rng: random.Random, m: int = 20, k: int = 4):
    """A coloring, set and ``d`` where a lower-half color is sparse and an
    upper-half color is dense in the chosen set, found by rejection sampling."""
    s = SetSystem(m, tuple(frozenset(j for j in range(m) if rng.random() < 0.5) for _ in range(3)))
    i = rng.randrange(3)
    center = Fraction(m, 2 * k)
    while True:
        chi = Coloring(k, tuple(rng.randrange(k) for _ in range(m)))
        h1, h2 = rng.randrange(k // 2), rng.randrange(k // 2, k)
        c1 = sum(1 for e in s.sets[i] if chi.assignment[e] == h1)
        c2 = sum(1 for e in s.sets[i] if chi.assignment[e] == h2)
        gap = min(center - c1, c2 - center)
        if gap > 0:
            d = gap * Fraction(rng.randint(0, 999), 1000)
            return chi, s, d, i, h1, h2
