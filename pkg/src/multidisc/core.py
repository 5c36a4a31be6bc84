"""Domain types, exact numbers and JSON serialization shared by every module.

Ids (elements, agents, groups, colors, bundles) are 0-based everywhere in the
library. All types are immutable once built.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, Sequence, Union

Rational = Fraction
Number = Union[int, Fraction, "Surd"]


class MultidiscError(Exception):
    """Base class for library errors."""


class ValidationError(MultidiscError, ValueError):
    pass


class ParseError(ValidationError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class DimensionError(MultidiscError, ValueError):
    pass


class ParameterError(MultidiscError, ValueError):
    pass


class PreconditionError(MultidiscError, ValueError):
    pass


class DomainError(PreconditionError):
    pass


class CapacityError(MultidiscError):
    def __init__(self, required: int, cap: int, what: str = "states"):
        super().__init__(f"search space needs {required} {what}, cap is {cap}")
        self.required = required
        self.cap = cap


# ---------------------------------------------------------------------------
# exact numbers


def _sign(x: Fraction) -> int:
    return (x > 0) - (x < 0)


def _is_square(x: Fraction) -> bool:
    if x < 0:
        return False
    p, q = x.numerator, x.denominator
    return math.isqrt(p) ** 2 == p and math.isqrt(q) ** 2 == q


def _floor_sqrt(x: Fraction) -> int:
    # floor(sqrt(p/q)) = floor(sqrt(p*q) / q)
    return math.isqrt(x.numerator * x.denominator) // x.denominator


class Surd:
    """Exact real number ``a + b*sqrt(q)`` with rational ``a``, ``b``, ``q >= 0``.

    Thresholds such as ``sqrt(m/k)`` are irrational in general; keeping them
    in this form lets every comparison against counts and rationals be exact.
    """

    __slots__ = ("a", "b", "q")

    def __init__(self, a: Any = 0, b: Any = 0, q: Any = 0):
        a, b, q = Fraction(a), Fraction(b), Fraction(q)
        if q < 0:
            raise ValueError("negative radicand")
        if b == 0 or q == 0:
            b, q = Fraction(0), Fraction(0)
        elif _is_square(q):
            a += b * Fraction(math.isqrt(q.numerator), math.isqrt(q.denominator))
            b, q = Fraction(0), Fraction(0)
        self.a, self.b, self.q = a, b, q

    @classmethod
    def sqrt(cls, q: Any) -> "Surd":
        return cls(0, 1, q)

    @staticmethod
    def lift(x: Any) -> "Surd":
        if isinstance(x, Surd):
            return x
        if isinstance(x, (int, Fraction)):
            return Surd(x)
        if isinstance(x, float):
            return Surd(Fraction(x))
        raise TypeError(f"cannot treat {type(x).__name__} as an exact number")

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def to_fraction(self) -> Fraction:
        if not self.is_rational:
            raise ValueError(f"{self!r} is irrational")
        return self.a

    def _align(self, other: Any) -> tuple["Surd", Fraction]:
        """Rewrite ``other`` over this number's radicand."""
        o = Surd.lift(other)
        if not (self.q and o.q) or self.q == o.q:
            return o, self.q or o.q
        ratio = self.q / o.q
        if not _is_square(ratio):
            raise ValueError("mixed radicands")
        s = Fraction(math.isqrt(ratio.numerator), math.isqrt(ratio.denominator))
        # sqrt(o.q) = sqrt(self.q) / s
        return Surd._raw(o.a, o.b / s, self.q), self.q

    @classmethod
    def _raw(cls, a: Fraction, b: Fraction, q: Fraction) -> "Surd":
        out = cls.__new__(cls)
        out.a, out.b, out.q = a, b, q
        return out

    def __add__(self, other: Any) -> "Surd":
        o, q = self._align(other)
        return Surd(self.a + o.a, self.b + o.b, q)

    __radd__ = __add__

    def __neg__(self) -> "Surd":
        return Surd(-self.a, -self.b, self.q)

    def __sub__(self, other: Any) -> "Surd":
        return self + (-Surd.lift(other))

    def __rsub__(self, other: Any) -> "Surd":
        return Surd.lift(other) - self

    def __mul__(self, other: Any) -> "Surd":
        o, q = self._align(other)
        return Surd(self.a * o.a + self.b * o.b * q, self.a * o.b + self.b * o.a, q)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "Surd":
        o = Surd.lift(other)
        if o.is_rational:
            return Surd(self.a / o.a, self.b / o.a, self.q)
        # rationalize: (x)/(c + e r) = x (c - e r) / (c^2 - e^2 q)
        conj = Surd(o.a, -o.b, o.q)
        denom = (o * conj).to_fraction()
        return (self * conj) / denom

    def __rtruediv__(self, other: Any) -> "Surd":
        return Surd.lift(other) / self

    def __pow__(self, e: int) -> "Surd":
        if not isinstance(e, int) or e < 0:
            return NotImplemented
        out = Surd(1)
        for _ in range(e):
            out = out * self
        return out

    def sign(self) -> int:
        sa, sb = _sign(self.a), _sign(self.b)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare a^2 with b^2 q
        return sa * _sign(self.a * self.a - self.b * self.b * self.q)

    def _cmp(self, other: Any) -> int:
        return (self - Surd.lift(other)).sign()

    def __eq__(self, other: object) -> bool:
        try:
            return self._cmp(other) == 0
        except (TypeError, ValueError):
            return NotImplemented

    def __lt__(self, other: Any) -> bool:
        return self._cmp(other) < 0

    def __le__(self, other: Any) -> bool:
        return self._cmp(other) <= 0

    def __gt__(self, other: Any) -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other: Any) -> bool:
        return self._cmp(other) >= 0

    def __hash__(self) -> int:
        if self.is_rational:
            return hash(self.a)
        return hash((self.a, self.b > 0, self.b * self.b * self.q))

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * math.sqrt(self.q)

    def floor(self) -> int:
        if self.is_rational:
            return math.floor(self.a)
        r = _floor_sqrt(self.b * self.b * self.q)
        guess = math.floor(self.a) + (r if self.b > 0 else -r - 1)
        while self < guess:
            guess -= 1
        while self >= guess + 1:
            guess += 1
        return guess

    def ceil(self) -> int:
        return -((-self).floor())

    def __repr__(self) -> str:
        if self.is_rational:
            return f"Surd({self.a})"
        return f"Surd({self.a} + {self.b}*sqrt({self.q}))"

    def __str__(self) -> str:
        if self.is_rational:
            return str(self.a)
        root = f"sqrt({self.q})" if self.b == 1 else f"{self.b}*sqrt({self.q})"
        return root if self.a == 0 else f"{self.a}+{root}"


def exact(x: Any) -> Union[Fraction, Surd]:
    """Convert ints, floats, ``"p/q"`` strings and Surds to an exact value."""
    if isinstance(x, Surd):
        return x.to_fraction() if x.is_rational else x
    if isinstance(x, bool):
        raise TypeError("bool is not a number")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot treat {type(x).__name__} as an exact number")


def floor_exact(x: Any) -> int:
    x = exact(x)
    return x.floor() if isinstance(x, Surd) else math.floor(x)


def ceil_exact(x: Any) -> int:
    x = exact(x)
    return x.ceil() if isinstance(x, Surd) else math.ceil(x)


def format_fraction(x: Fraction) -> str:
    return str(Fraction(x))


# ---------------------------------------------------------------------------
# domain types


def _require_int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{what} must be an integer, got {value!r}")
    return value


@dataclass(frozen=True)
class SetSystem:
    """A universe ``{0..universe_size-1}`` and an ordered list of subsets."""

    universe_size: int
    sets: tuple[frozenset[int], ...]

    def __post_init__(self):
        m = _require_int(self.universe_size, "universe_size")
        if m < 1:
            raise ValidationError("universe_size must be positive")
        sets = tuple(frozenset(s) for s in self.sets)
        if not sets:
            raise ValidationError("a set system needs at least one set")
        for i, s in enumerate(sets):
            for e in s:
                _require_int(e, f"element of set {i}")
                if not 0 <= e < m:
                    raise ValidationError(f"set {i} contains element {e} outside [0, {m})")
        object.__setattr__(self, "sets", sets)

    @property
    def n(self) -> int:
        return len(self.sets)

    @cached_property
    def masks(self) -> tuple[int, ...]:
        """Element-membership bitsets, bit ``j`` set iff element ``j`` is in the set."""
        return tuple(sum(1 << e for e in s) for s in self.sets)

    @cached_property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.sets)


@dataclass(frozen=True)
class Coloring:
    k: int
    assignment: tuple[int, ...]

    def __post_init__(self):
        k = _require_int(self.k, "k")
        if k < 2:
            raise ValidationError("a coloring needs k >= 2")
        assignment = tuple(self.assignment)
        for j, c in enumerate(assignment):
            _require_int(c, f"color of element {j}")
            if not 0 <= c < k:
                raise ValidationError(f"element {j} has color {c} outside [0, {k})")
        object.__setattr__(self, "assignment", assignment)

    def __len__(self) -> int:
        return len(self.assignment)

    def color_class(self, h: int) -> frozenset[int]:
        return frozenset(j for j, c in enumerate(self.assignment) if c == h)


@dataclass(frozen=True)
class GroupedInstance:
    """Agents with group labels, optional group leaders and integer item values."""

    num_items: int
    group_of: tuple[int, ...]
    is_leader: tuple[bool, ...]
    valuations: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        m = _require_int(self.num_items, "num_items")
        if m < 1:
            raise ValidationError("num_items must be positive")
        groups = tuple(self.group_of)
        leaders = tuple(bool(x) for x in self.is_leader)
        vals = tuple(tuple(row) for row in self.valuations)
        n = len(groups)
        if n < 1:
            raise ValidationError("an instance needs at least one agent")
        if len(leaders) != n or len(vals) != n:
            raise ValidationError("groups, leader flags and valuation rows disagree in length")
        for i, g in enumerate(groups):
            _require_int(g, f"group of agent {i}")
            if g < 0:
                raise ValidationError(f"agent {i} has negative group {g}")
        k = max(groups) + 1
        missing = sorted(set(range(k)) - set(groups))
        if missing:
            raise ValidationError(f"group {missing[0]} has no agents")
        for i, row in enumerate(vals):
            if len(row) != m:
                raise ValidationError(f"valuation row {i} has {len(row)} entries, expected {m}")
            for j, v in enumerate(row):
                _require_int(v, f"value of agent {i} for item {j}")
                if v < 0:
                    raise ValidationError(f"agent {i} has negative value for item {j}")
        seen: dict[int, int] = {}
        for i, lead in enumerate(leaders):
            if not lead:
                continue
            g = groups[i]
            if g in seen:
                raise ValidationError(f"group {g} has two leaders ({seen[g]} and {i})")
            seen[g] = i
            if any(v != 1 for v in vals[i]):
                raise ValidationError(f"leader {i} must value every item at 1")
        object.__setattr__(self, "group_of", groups)
        object.__setattr__(self, "is_leader", leaders)
        object.__setattr__(self, "valuations", vals)

    @property
    def num_agents(self) -> int:
        return len(self.group_of)

    @property
    def num_groups(self) -> int:
        return max(self.group_of) + 1

    @property
    def leaders(self) -> tuple[int, ...]:
        return tuple(i for i, lead in enumerate(self.is_leader) if lead)

    @property
    def followers(self) -> tuple[int, ...]:
        return tuple(i for i, lead in enumerate(self.is_leader) if not lead)

    def value(self, agent: int, items: Iterable[int]) -> int:
        row = self.valuations[agent]
        return sum(row[j] for j in items)


@dataclass(frozen=True)
class Allocation:
    """Ordered partition of the items ``{0..m-1}`` into bundles (empty ones allowed)."""

    bundles: tuple[frozenset[int], ...]

    def __post_init__(self):
        bundles = tuple(frozenset(b) for b in self.bundles)
        if not bundles:
            raise ValidationError("an allocation needs at least one bundle")
        seen: set[int] = set()
        for h, b in enumerate(bundles):
            for j in b:
                _require_int(j, f"item in bundle {h}")
                if j in seen:
                    raise ValidationError(f"item {j} appears in two bundles")
                seen.add(j)
        if seen != set(range(len(seen))):
            raise ValidationError("bundles must cover exactly the items 0..m-1")
        object.__setattr__(self, "bundles", bundles)

    @classmethod
    def from_assignment(cls, assignment: Sequence[int], k: int) -> "Allocation":
        bundles: list[set[int]] = [set() for _ in range(k)]
        for j, h in enumerate(assignment):
            bundles[h].add(j)
        return cls(tuple(frozenset(b) for b in bundles))

    @property
    def k(self) -> int:
        return len(self.bundles)

    @property
    def num_items(self) -> int:
        return sum(len(b) for b in self.bundles)

    def sort_key(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sorted(b)) for b in self.bundles)


@dataclass(frozen=True)
class BoundReport:
    """One evaluated link of an inequality chain, both sides as natural logs.

    ``relation`` is ``"<="``, ``"<"`` or ``"=="``; the sides are stored so the
    claimed relation always reads ``lhs relation rhs``. ``holds`` is derived
    from the logs unless an exact verdict is supplied (exact-rational links).
    """

    label: str
    lhs_log: Any
    rhs_log: Any
    holds: bool
    preconditions_met: bool = True
    relation: str = "<="
    kind: str = "analytic"
    tolerance: float = 0.0
    note: str = ""

    @classmethod
    def compare(
        cls,
        label: str,
        lhs_log: Any,
        rhs_log: Any,
        *,
        relation: str = "<=",
        preconditions_met: bool = True,
        kind: str = "analytic",
        tolerance: float = 0.0,
        exact_holds: bool | None = None,
        note: str = "",
    ) -> "BoundReport":
        if exact_holds is not None:
            holds = exact_holds
        elif relation == "<=":
            holds = lhs_log <= rhs_log + tolerance
        elif relation == "<":
            holds = lhs_log < rhs_log
        elif relation == "==":
            scale = max(abs(rhs_log), 1)
            holds = abs(lhs_log - rhs_log) <= tolerance * scale
        else:
            raise ValueError(f"unknown relation {relation!r}")
        return cls(label, lhs_log, rhs_log, bool(holds), preconditions_met, relation,
                   kind, tolerance, note)


# ---------------------------------------------------------------------------
# serialization


def _dumps(obj: Any) -> bytes:
    return json.dumps(obj, separators=(",", ":")).encode("utf-8")


def _loads(data: Union[bytes, str]) -> Any:
    if isinstance(data, (bytes, bytearray)):
        try:
            text = bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("invalid UTF-8", exc.start) from exc
    else:
        text = data
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed JSON: {exc.msg}", offset) from exc


def _field(obj: Any, key: str, kind: type, what: str) -> Any:
    if not isinstance(obj, dict):
        raise ValidationError(f"{what} must be a JSON object")
    if key not in obj:
        raise ValidationError(f"{what} is missing field {key!r}")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ValidationError(f"{what} field {key!r} has the wrong type")
    return value


def _int_list(value: Any, what: str) -> list[int]:
    if not isinstance(value, list):
        raise ValidationError(f"{what} must be a list")
    return [_require_int(v, what) for v in value]


def serialize_set_system(s: SetSystem) -> bytes:
    return _dumps({"universe_size": s.universe_size, "sets": [sorted(x) for x in s.sets]})


def parse_set_system(data: Union[bytes, str]) -> SetSystem:
    obj = _loads(data)
    m = _field(obj, "universe_size", int, "SetSystem")
    raw = _field(obj, "sets", list, "SetSystem")
    sets = [frozenset(_int_list(x, f"set {i}")) for i, x in enumerate(raw)]
    return SetSystem(m, tuple(sets))


def serialize_coloring(c: Coloring) -> bytes:
    return _dumps({"k": c.k, "assignment": list(c.assignment)})


def parse_coloring(data: Union[bytes, str]) -> Coloring:
    obj = _loads(data)
    k = _field(obj, "k", int, "Coloring")
    assignment = _int_list(_field(obj, "assignment", list, "Coloring"), "assignment")
    return Coloring(k, tuple(assignment))


def serialize_instance(inst: GroupedInstance) -> bytes:
    return _dumps({
        "num_items": inst.num_items,
        "groups": list(inst.group_of),
        "leaders": list(inst.leaders),
        "valuations": [list(r) for r in inst.valuations],
    })


def parse_instance(data: Union[bytes, str]) -> GroupedInstance:
    obj = _loads(data)
    m = _field(obj, "num_items", int, "GroupedInstance")
    groups = _int_list(_field(obj, "groups", list, "GroupedInstance"), "groups")
    leaders = _int_list(_field(obj, "leaders", list, "GroupedInstance"), "leaders")
    raw = _field(obj, "valuations", list, "GroupedInstance")
    vals = tuple(tuple(_int_list(r, f"valuation row {i}")) for i, r in enumerate(raw))
    for a in leaders:
        if not 0 <= a < len(groups):
            raise ValidationError(f"leader {a} is not an agent")
    if len(set(leaders)) != len(leaders):
        raise ValidationError("duplicate leader index")
    flags = tuple(i in set(leaders) for i in range(len(groups)))
    return GroupedInstance(m, tuple(groups), flags, vals)


def serialize_allocation(a: Allocation) -> bytes:
    return _dumps({"bundles": [sorted(b) for b in a.bundles]})


def parse_allocation(data: Union[bytes, str]) -> Allocation:
    obj = _loads(data)
    raw = _field(obj, "bundles", list, "Allocation")
    return Allocation(tuple(frozenset(_int_list(b, f"bundle {h}")) for h, b in enumerate(raw)))


def detect_kind(data: Union[bytes, str]) -> str:
    """Name of the schema a JSON document follows, judged by its keys."""
    obj = _loads(data)
    if not isinstance(obj, dict):
        raise ValidationError("expected a JSON object")
    for kind, key in (("set_system", "universe_size"), ("instance", "num_items"),
                      ("allocation", "bundles"), ("coloring", "assignment")):
        if key in obj:
            return kind
    raise ValidationError("unrecognised document")
