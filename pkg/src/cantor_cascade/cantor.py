"""Ternary Cantor set geometry with exact rational arithmetic.

Everything here works on ``fractions.Fraction``.  The Cantor set K is the
usual middle-thirds set in [0, 1]; its complement in the extended real line
splits into bounded gaps ``(p/3**l, (p+1)/3**l)`` and one unbounded gap
``R \\ [0, 1]``.  Each gap carries a decomposition into Whitney intervals whose
length is exactly twice their distance to K, except for the merged central
piece of every bounded gap and the piece containing infinity.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Union

Rational = Fraction

STANDARD = "standard"
CENTRAL = "central"
INFINITY = "infinity"


def pow3(e: int) -> Fraction:
    """Return 3**e as an exact rational for any integer e."""
    return Fraction(3**e) if e >= 0 else Fraction(1, 3 ** (-e))


def exact_log3(q: Fraction) -> int:
    """Integer e with 3**e == q; raises ValueError when q is not a power of 3."""
    q = Fraction(q)
    if q <= 0:
        raise ValueError(f"{q} is not a power of 3")
    num, den = q.numerator, q.denominator
    if num != 1 and den != 1:
        raise ValueError(f"{q} is not a power of 3")
    value, sign = (num, 1) if den == 1 else (den, -1)
    e = 0
    while value % 3 == 0:
        value //= 3
        e += 1
    if value != 1:
        raise ValueError(f"{q} is not a power of 3")
    return sign * e


@dataclass(frozen=True)
class RInterval:
    lo: Fraction
    hi: Fraction
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains_interval(self, other: "RInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def reflect(self, center: Fraction) -> "RInterval":
        return RInterval(2 * center - self.hi, 2 * center - self.lo, self.hi_closed, self.lo_closed)

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo}, {self.hi}{right}"


@dataclass(frozen=True)
class CofiniteInterval:
    """The closed set ``R u {inf}`` minus the open interval ``excluded``."""

    excluded: RInterval

    def __post_init__(self) -> None:
        if not self.excluded.lo < self.excluded.hi:
            raise ValueError("excluded interval must be non-degenerate")

    @property
    def contains_infinity(self) -> bool:
        return True

    def contains_interval(self, other: Union[RInterval, "CofiniteInterval"]) -> bool:
        if isinstance(other, CofiniteInterval):
            return other.excluded.contains_interval(self.excluded)
        return other.hi <= self.excluded.lo or other.lo >= self.excluded.hi

    def __str__(self) -> str:
        return f"Rbar \\ ({self.excluded.lo}, {self.excluded.hi})"


Geometry = Union[RInterval, CofiniteInterval]


@dataclass(frozen=True)
class WhitneyParams:
    N: int

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be a positive integer")

    @property
    def sigma(self) -> Fraction:
        return Fraction(1, 2 * 3 ** (self.N + 2))


@dataclass(frozen=True, order=True)
class Gap:
    """A complementary component of K.

    ``level == 0`` denotes the unbounded gap; otherwise the gap is the open
    interval ``(index/3**level, (index+1)/3**level)``.
    """

    level: int
    index: int = 0

    @property
    def bounded(self) -> bool:
        return self.level > 0

    @property
    def lo(self) -> Fraction:
        return Fraction(self.index, 3**self.level)

    @property
    def hi(self) -> Fraction:
        return Fraction(self.index + 1, 3**self.level)

    @property
    def length(self) -> Fraction:
        return Fraction(1, 3**self.level)

    @property
    def interval(self) -> RInterval:
        return RInterval(self.lo, self.hi, False, False)

    def is_valid(self) -> bool:
        if self.level == 0:
            return self.index == 0
        if not 0 <= self.index < 3**self.level or self.index % 3 != 1:
            return False
        q = self.index // 3
        while q:
            if q % 3 == 1:
                return False
            q //= 3
        return True


UNBOUNDED = Gap(0, 0)


@dataclass(frozen=True)
class WhitneyInterval:
    """One interval of the global Whitney decomposition of the complement of K.

    ``n`` is the signed index for standard intervals (0 for the merged central
    piece and for the piece at infinity).  In a bounded gap, positive indices
    sit at the right end; in the unbounded gap, positive indices sit on the
    negative half-line.
    """

    kind: str
    gap: Gap
    n: int
    N: int

    @property
    def log3_nominal(self) -> int:
        if self.kind == INFINITY:
            return -1
        if self.kind == CENTRAL:
            return -self.gap.level - 1
        return -self.gap.level - abs(self.n)

    @property
    def nominal_length(self) -> Fraction:
        return pow3(self.log3_nominal)

    @property
    def geometry(self) -> Geometry:
        N = self.N
        if self.kind == INFINITY:
            sigma = WhitneyParams(N).sigma
            return CofiniteInterval(RInterval(-sigma, 1 + sigma, False, False))
        if not self.gap.bounded:
            m = abs(self.n)
            if self.n > 0:
                return RInterval(-pow3(1 - m) / 2, -pow3(-m) / 2)
            return RInterval(1 + pow3(-m) / 2, 1 + pow3(1 - m) / 2)
        a, b, g = self.gap.lo, self.gap.hi, self.gap.length
        if self.kind == CENTRAL:
            return RInterval(a + pow3(-N) * g / 2, b - pow3(-N) * g / 2)
        m = abs(self.n)
        if self.n > 0:
            return RInterval(b - pow3(1 - m) * g / 2, b - pow3(-m) * g / 2)
        return RInterval(a + pow3(-m) * g / 2, a + pow3(1 - m) * g / 2)

    @property
    def euclidean_length(self) -> Optional[Fraction]:
        geom = self.geometry
        return None if isinstance(geom, CofiniteInterval) else geom.length

    def key(self) -> tuple:
        return (self.kind, self.gap.level, self.gap.index, self.n)

    def __str__(self) -> str:
        if self.kind == INFINITY:
            return "J_inf"
        host = "unbounded" if not self.gap.bounded else f"{self.gap.interval}"
        label = "c" if self.kind == CENTRAL else str(self.n)
        return f"J_{label}{host}"


def standard(gap: Gap, n: int, N: int) -> WhitneyInterval:
    low = N + 3 if not gap.bounded else N + 1
    if abs(n) < low:
        raise ValueError(f"standard index {n} below {low}")
    return WhitneyInterval(STANDARD, gap, n, N)


def central(gap: Gap, N: int) -> WhitneyInterval:
    if not gap.bounded:
        raise ValueError("the unbounded gap has no central interval")
    return WhitneyInterval(CENTRAL, gap, 0, N)


def infinity_interval(N: int) -> WhitneyInterval:
    return WhitneyInterval(INFINITY, UNBOUNDED, 0, N)


def first_standard_index(gap: Gap, N: int) -> int:
    return N + 1 if gap.bounded else N + 3


def gap_containing(x: Fraction) -> Optional[Gap]:
    """The gap of K containing x, or None when x lies in K.

    The ternary shift orbit of a rational is eventually periodic, so the loop
    terminates: either a middle-third digit appears or a state repeats.
    """
    x = Fraction(x)
    if x < 0 or x > 1:
        return UNBOUNDED
    # shift the numerator over the fixed denominator: y = r / den
    r, den = x.numerator, x.denominator
    level, q = 0, 0
    seen = set()
    while True:
        if r in seen:
            return None
        seen.add(r)
        r3 = 3 * r
        level += 1
        if den < r3 < 2 * den:
            return Gap(level, 3 * q + 1)
        if r3 <= den:
            r, q = r3, 3 * q
        else:
            r, q = r3 - 2 * den, 3 * q + 2


def dist_to_cantor(x: Fraction) -> Fraction:
    """Exact Euclidean distance from x to K."""
    x = Fraction(x)
    if x < 0:
        return -x
    if x > 1:
        return x - 1
    gap = gap_containing(x)
    if gap is None:
        return Fraction(0)
    return min(x - gap.lo, gap.hi - x)


def interval_dist_to_cantor(interval: RInterval) -> Fraction:
    """Distance from a closed interval to K (0 if they meet)."""
    gap = gap_containing(interval.midpoint)
    if gap is None:
        return Fraction(0)
    if not gap.bounded:
        if interval.hi < 0:
            return -interval.hi
        if interval.lo > 1:
            return interval.lo - 1
        return Fraction(0)
    if interval.lo <= gap.lo or interval.hi >= gap.hi:
        return Fraction(0)
    return min(interval.lo - gap.lo, gap.hi - interval.hi)


def construction_indices(level: int) -> Iterator[int]:
    """Indices q of the 2**level closed construction intervals [q, q+1]/3**level."""
    indices = [0]
    for _ in range(level):
        indices = [3 * q + d for q in indices for d in (0, 2)]
    yield from indices


def gaps(max_level: int) -> list[tuple[int, RInterval]]:
    """All bounded gaps of length at least 3**-max_level, tagged with their level."""
    if max_level < 1:
        raise ValueError("max_level must be at least 1")
    out: list[tuple[int, RInterval]] = []
    for level in range(1, max_level + 1):
        for q in construction_indices(level - 1):
            out.append((level, Gap(level, 3 * q + 1).interval))
    return out


def construction_interval_of(x: RInterval) -> Optional[int]:
    """Level l when x is exactly a closed construction interval of length 3**-l."""
    if not (x.lo_closed and x.hi_closed):
        return None
    try:
        level = -exact_log3(x.length)
    except ValueError:
        return None
    if level < 0:
        return None
    q = x.lo * 3**level
    if q.denominator != 1:
        return None
    q = int(q)
    if not 0 <= q < 3**level:
        return None
    while q:
        if q % 3 == 1:
            return None
        q //= 3
    return level


def gap_of_interval(L: RInterval) -> Gap:
    """Identify an open interval as a bounded gap of K, or raise."""
    try:
        level = -exact_log3(L.length)
    except ValueError as exc:
        raise ValueError(f"{L} is not a gap of K") from exc
    p = L.lo * 3**level
    gap = Gap(level, int(p)) if p.denominator == 1 and level >= 1 else None
    if gap is None or not gap.is_valid():
        raise ValueError(f"{L} is not a gap of K")
    return gap


def whitney_of_gap(L: RInterval, params: WhitneyParams, max_index: int) -> list[WhitneyInterval]:
    """Central interval plus J_{+-n}, N+1 <= n <= max_index, of the bounded gap L."""
    N = params.N
    if max_index < N + 1:
        raise ValueError("max_index must be at least N+1")
    gap = gap_of_interval(L)
    out = [central(gap, N)]
    for n in range(N + 1, max_index + 1):
        out.append(standard(gap, -n, N))
        out.append(standard(gap, n, N))
    return out


def raw_gap_interval(L: RInterval, n: int) -> RInterval:
    """Interval J_n of a gap from the index formula alone, for any n >= 1."""
    m = abs(n)
    g = L.length
    if n > 0:
        return RInterval(L.hi - pow3(1 - m) * g / 2, L.hi - pow3(-m) * g / 2)
    return RInterval(L.lo + pow3(-m) * g / 2, L.lo + pow3(1 - m) * g / 2)


def whitney_of_unbounded(params: WhitneyParams, max_index: int) -> list[WhitneyInterval]:
    """J_inf plus J_{+-n}, N+3 <= n <= max_index, of R \\ [0, 1]."""
    N = params.N
    if max_index < N + 3:
        raise ValueError("max_index must be at least N+3")
    out = [infinity_interval(N)]
    for n in range(N + 3, max_index + 1):
        out.append(standard(UNBOUNDED, n, N))
        out.append(standard(UNBOUNDED, -n, N))
    return out


def whitney_containing(x: Fraction, N: int) -> Optional[WhitneyInterval]:
    """The Whitney interval having x in its interior, or None.

    None is returned for points of K and for shared endpoints of two adjacent
    Whitney intervals.
    """
    x = Fraction(x)
    gap = gap_containing(x)
    if gap is None:
        return None
    if not gap.bounded:
        sigma = WhitneyParams(N).sigma
        if x < -sigma or x > 1 + sigma:
            return infinity_interval(N)
        if x in (-sigma, 1 + sigma):
            return None
        d, sign = (-x, 1) if x < 0 else (x - 1, -1)
        # d in (3**-n/2, 3**-(n-1)/2)
        n = 0
        while pow3(-n) / 2 >= d:
            n += 1
        if pow3(1 - n) / 2 == d:
            return None
        return standard(UNBOUNDED, sign * n, N)
    a, b, g = gap.lo, gap.hi, gap.length
    edge = pow3(-N) * g / 2
    if a + edge < x < b - edge:
        return central(gap, N)
    d, sign = (x - a, -1) if x - a < b - x else (b - x, 1)
    if d == edge:
        return None
    n = N
    while pow3(-n) * g / 2 > d:
        n += 1
    if pow3(-n) * g / 2 == d:
        return None
    return standard(gap, sign * (n), N) if pow3(-n) * g / 2 < d < pow3(1 - n) * g / 2 else None
