"""Dynamical systems: full shifts, subshifts of finite type, tent maps,
and piecewise-linear interval maps with fixed points only at the endpoints.

Shift states are eventually periodic symbol sequences stored as a finite
head plus a repeating cycle, so every operation on them is exact up to a
documented coordinate depth (and fully exact when no depth cap is given).
Interval states are plain floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

__all__ = [
    "Word",
    "ShiftSpace",
    "TentMap",
    "EndpointFixedMap",
    "State",
    "System",
    "full_shift",
    "golden_mean_shift",
    "apply_map",
    "dist",
    "dist_n",
    "orbit",
    "system_from_json",
    "KindMismatchError",
    "InteriorFixedPointError",
]


class KindMismatchError(TypeError):
    """State does not belong to the system it was used with."""


class InteriorFixedPointError(ValueError):
    """Piecewise-linear map has a fixed point away from the interval ends."""


@dataclass(frozen=True)
class Word:
    """Eventually periodic one-sided symbol sequence: head then cycle repeated."""

    head: tuple[int, ...]
    cycle: tuple[int, ...]

    def __post_init__(self):
        if len(self.cycle) == 0:
            raise ValueError("cycle must be nonempty")

    def symbol(self, i: int) -> int:
        if i < len(self.head):
            return self.head[i]
        return self.cycle[(i - len(self.head)) % len(self.cycle)]

    def prefix(self, n: int) -> tuple[int, ...]:
        return tuple(self.symbol(i) for i in range(n))

    def shift(self) -> "Word":
        if self.head:
            return Word(self.head[1:], self.cycle)
        return Word((), self.cycle[1:] + self.cycle[:1])

    @staticmethod
    def periodic(cycle) -> "Word":
        return Word((), tuple(cycle))

    @staticmethod
    def eventually(head, cycle) -> "Word":
        return Word(tuple(head), tuple(cycle))


def _exact_compare_depth(x: Word, y: Word) -> int:
    """Depth after which two eventually periodic words agreeing so far agree forever."""
    return len(x.head) + len(y.head) + math.lcm(len(x.cycle), len(y.cycle))


@dataclass(frozen=True)
class ShiftSpace:
    """Full shift or subshift of finite type on {0,...,k-1}.

    Metric: d(x,y) = 2^(-k) with k the first index of disagreement.
    """

    alphabet_size: int
    transition: tuple[tuple[int, ...], ...] = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.alphabet_size < 2:
            raise ValueError("alphabet_size must be >= 2")
        if self.transition is None:
            ones = tuple(tuple(1 for _ in range(self.alphabet_size))
                         for _ in range(self.alphabet_size))
            object.__setattr__(self, "transition", ones)
        t = self.transition
        if len(t) != self.alphabet_size or any(len(r) != self.alphabet_size for r in t):
            raise ValueError("transition matrix shape mismatch")
        if any(v not in (0, 1) for r in t for v in r):
            raise ValueError("transition entries must be 0/1")

    @property
    def is_full(self) -> bool:
        return all(v == 1 for r in self.transition for v in r)

    def allowed(self, a: int, b: int) -> bool:
        return self.transition[a][b] == 1

    def is_irreducible(self) -> bool:
        n = self.alphabet_size
        for s in range(n):
            seen = {s}
            stack = [s]
            while stack:
                u = stack.pop()
                for v in range(n):
                    if self.transition[u][v] and v not in seen:
                        seen.add(v)
                        stack.append(v)
            if len(seen) != n:
                return False
        return True

    def admissible(self, x: Word, depth: int | None = None) -> bool:
        """Check transition legality up to `depth` (full exactness if None)."""
        if depth is None:
            depth = len(x.head) + 2 * len(x.cycle)
        for i in range(depth):
            a, b = x.symbol(i), x.symbol(i + 1)
            if not (0 <= a < self.alphabet_size) or not self.allowed(a, b):
                return False
        return True

    def word_admissible(self, w) -> bool:
        return all(self.allowed(a, b) for a, b in zip(w, w[1:])) and all(
            0 <= a < self.alphabet_size for a in w)


@dataclass(frozen=True)
class TentMap:
    """f_s on [0,2]: s*x on [0,1], s*(2-x) on [1,2]; 1 < s <= 2."""

    slope: float

    def __post_init__(self):
        if not (1.0 < self.slope <= 2.0):
            raise ValueError("slope must be in (1, 2]")

    domain = (0.0, 2.0)

    def value(self, x: float) -> float:
        # ties at the kink resolve to the left branch; values coincide
        return self.slope * x if x <= 1.0 else self.slope * (2.0 - x)

    def pieces(self):
        """Linear pieces as (xlo, xhi, slope, intercept)."""
        s = self.slope
        return [(0.0, 1.0, s, 0.0), (1.0, 2.0, -s, 2.0 * s)]


@dataclass(frozen=True)
class EndpointFixedMap:
    """Continuous piecewise-linear self-map of [0,1] whose only fixed points
    are at the interval ends; construction rejects interior fixed points."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        bp, vals = tuple(self.breakpoints), tuple(self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(bp) != len(vals) or len(bp) < 2:
            raise ValueError("need matching breakpoint/value knot lists, length >= 2")
        if bp[0] != 0.0 or bp[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if any(b >= c for b, c in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(not (0.0 <= v <= 1.0) for v in vals):
            raise ValueError("values must lie in [0,1]")
        self._check_no_interior_fixed_point()

    domain = (0.0, 1.0)

    def _check_no_interior_fixed_point(self):
        bp, vals = self.breakpoints, self.values
        tol = 1e-12
        for (a, fa), (b, fb) in zip(zip(bp, vals), zip(bp[1:], vals[1:])):
            ga, gb = fa - a, fb - b
            if abs(ga) <= tol and a not in (0.0, 1.0):
                raise InteriorFixedPointError(f"fixed point at breakpoint {a}")
            if abs(ga) <= tol and abs(gb) <= tol:
                raise InteriorFixedPointError(f"segment [{a},{b}] fixed pointwise")
            if ga * gb < -tol * tol and not (abs(ga) <= tol or abs(gb) <= tol):
                raise InteriorFixedPointError(f"fixed point inside ({a},{b})")

    def value(self, x: float) -> float:
        bp, vals = self.breakpoints, self.values
        if x <= bp[0]:
            return vals[0]
        for a, b, fa, fb in zip(bp, bp[1:], vals, vals[1:]):
            if x <= b:
                t = (x - a) / (b - a)
                return fa + t * (fb - fa)
        return vals[-1]

    def pieces(self):
        out = []
        bp, vals = self.breakpoints, self.values
        for a, b, fa, fb in zip(bp, bp[1:], vals, vals[1:]):
            m = (fb - fa) / (b - a)
            out.append((a, b, m, fa - m * a))
        return out


State = Union[Word, float]
System = Union[ShiftSpace, TentMap, EndpointFixedMap]
IntervalMap = (TentMap, EndpointFixedMap)


def full_shift(k: int) -> ShiftSpace:
    return ShiftSpace(alphabet_size=k)


def golden_mean_shift() -> ShiftSpace:
    """2-shift forbidding the word 11."""
    return ShiftSpace(alphabet_size=2, transition=((1, 1), (1, 0)))


def _require_shift_state(system, x):
    if isinstance(system, ShiftSpace):
        if not isinstance(x, Word):
            raise KindMismatchError("shift system requires Word states")
    else:
        if isinstance(x, Word):
            raise KindMismatchError("interval system requires float states")


def _in_domain(system, x) -> bool:
    if isinstance(system, ShiftSpace):
        depth = len(x.head) + len(x.cycle)
        return all(0 <= x.symbol(i) < system.alphabet_size for i in range(depth))
    lo, hi = system.domain
    return lo <= x <= hi


def apply_map(system: System, x: State) -> State:
    """One step of the dynamics: left shift, or the interval map."""
    _require_shift_state(system, x)
    if isinstance(system, ShiftSpace):
        return x.shift()
    if not _in_domain(system, x):
        raise ValueError(f"point {x} outside domain {system.domain}")
    return system.value(float(x))


def dist(system: System, x: State, y: State, depth: int | None = None) -> float:
    """Native metric.  For shifts the result is exact when depth is None;
    a finite depth caps the scan and reports 0 for agreement to that depth."""
    _require_shift_state(system, x)
    _require_shift_state(system, y)
    if isinstance(system, ShiftSpace):
        if x.head == y.head and x.cycle == y.cycle:
            return 0.0
        bound = _exact_compare_depth(x, y) if depth is None else depth
        for i in range(bound):
            if x.symbol(i) != y.symbol(i):
                return 2.0 ** (-i)
        return 0.0
    return abs(float(x) - float(y))


def dist_n(system: System, x: State, y: State, n: int,
           depth: int | None = None) -> float:
    """Bowen metric d_n = max of dist along the first n steps."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(system, ShiftSpace):
        _require_shift_state(system, x)
        _require_shift_state(system, y)
        # max over shifted pairs = 2^-(m-i) for the first disagreement m < n+scan
        best = 0.0
        bound = (_exact_compare_depth(x, y) if depth is None else depth) + n
        for m in range(bound):
            if x.symbol(m) != y.symbol(m):
                i = min(m, n - 1)
                return 2.0 ** (-(m - i))
        return best
    best = 0.0
    for _ in range(n):
        best = max(best, dist(system, x, y))
        x = apply_map(system, x)
        y = apply_map(system, y)
    return best


def orbit(system: System, x: State, n: int) -> list:
    """[x, f(x), ..., f^(n-1)(x)]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = [x]
    for _ in range(n - 1):
        x = apply_map(system, x)
        out.append(x)
    return out


def system_from_json(doc: dict) -> System:
    """Build a system from its JSON description."""
    kind = doc.get("kind")
    if kind == "full_shift":
        return full_shift(int(doc["k"]))
    if kind == "sft":
        t = tuple(tuple(int(v) for v in row) for row in doc["transition"])
        return ShiftSpace(alphabet_size=len(t), transition=t)
    if kind == "tent":
        return TentMap(slope=float(doc["s"]))
    if kind == "plmap":
        return EndpointFixedMap(tuple(float(b) for b in doc["breakpoints"]),
                                tuple(float(v) for v in doc["values"]))
    raise ValueError(f"unknown system kind: {kind!r}")
