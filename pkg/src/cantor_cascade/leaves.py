"""Tips of the leaves attached to Whitney intervals, and their children.

Every Whitney interval J owns a tip E_J: a closed set made of whole pieces of
the complement of K.  The children of J are the Whitney intervals inside E_J.
Because there are infinitely many of them, tips are described lazily by
*pieces*: a single child, a whole gap, the tail of a gap's standard sequence,
or a closed construction interval.  Pieces expand into smaller pieces in
left-to-right order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Union

from .cantor import (
    CENTRAL,
    INFINITY,
    STANDARD,
    UNBOUNDED,
    CofiniteInterval,
    Gap,
    Geometry,
    RInterval,
    WhitneyInterval,
    WhitneyParams,
    central,
    exact_log3,
    interval_dist_to_cantor,
    raw_gap_interval,
    first_standard_index,
    infinity_interval,
    pow3,
    standard,
)


# ---------------------------------------------------------------------------
# pieces


@dataclass(frozen=True)
class ChildPiece:
    child: WhitneyInterval

    def extent(self) -> Optional[RInterval]:
        geom = self.child.geometry
        return None if isinstance(geom, CofiniteInterval) else geom

    def max_child_length(self) -> Optional[Fraction]:
        return self.child.euclidean_length

    def expand(self) -> list["Piece"]:
        return [self]


@dataclass(frozen=True)
class GapPiece:
    gap: Gap
    N: int

    def extent(self) -> Optional[RInterval]:
        return RInterval(self.gap.lo, self.gap.hi) if self.gap.bounded else None

    def max_child_length(self) -> Optional[Fraction]:
        if not self.gap.bounded:
            return None
        return (1 - pow3(-self.N)) * self.gap.length

    def expand(self) -> list["Piece"]:
        start = first_standard_index(self.gap, self.N)
        if self.gap.bounded:
            return [
                TailPiece(self.gap, -1, start, self.N),
                ChildPiece(central(self.gap, self.N)),
                TailPiece(self.gap, 1, start, self.N),
            ]
        return [
            TailPiece(self.gap, 1, start, self.N),
            ChildPiece(infinity_interval(self.N)),
            TailPiece(self.gap, -1, start, self.N),
        ]


@dataclass(frozen=True)
class TailPiece:
    """Standard intervals J_{sign*n}, n >= start, of one gap."""

    gap: Gap
    sign: int
    start: int
    N: int

    def extent(self) -> RInterval:
        reach = pow3(1 - self.start) / 2
        if self.gap.bounded:
            g = self.gap.length
            if self.sign > 0:
                return RInterval(self.gap.hi - reach * g, self.gap.hi)
            return RInterval(self.gap.lo, self.gap.lo + reach * g)
        if self.sign > 0:
            return RInterval(-reach, 0)
        return RInterval(1, 1 + reach)

    def max_child_length(self) -> Fraction:
        g = self.gap.length if self.gap.bounded else Fraction(1)
        return pow3(-self.start) * g

    def head(self) -> WhitneyInterval:
        return standard(self.gap, self.sign * self.start, self.N)

    def rest(self) -> "TailPiece":
        return TailPiece(self.gap, self.sign, self.start + 1, self.N)

    def expand(self) -> list["Piece"]:
        # increasing order; positive tails accumulate on their right end
        head, rest = ChildPiece(self.head()), self.rest()
        return [head, rest] if self.sign > 0 else [rest, head]


@dataclass(frozen=True)
class ConsPiece:
    """The closed construction interval [index, index+1] / 3**level."""

    level: int
    index: int
    N: int

    def extent(self) -> RInterval:
        return RInterval(Fraction(self.index, 3**self.level), Fraction(self.index + 1, 3**self.level))

    def max_child_length(self) -> Fraction:
        return (1 - pow3(-self.N)) * pow3(-self.level - 1)

    def expand(self) -> list["Piece"]:
        lv, q = self.level + 1, 3 * self.index
        return [ConsPiece(lv, q, self.N), GapPiece(Gap(lv, q + 1), self.N), ConsPiece(lv, q + 2, self.N)]


Piece = Union[ChildPiece, GapPiece, TailPiece, ConsPiece]


def iter_children(pieces: Iterable[Piece], size_floor: Fraction) -> Iterator[WhitneyInterval]:
    """Whitney intervals inside the pieces with Euclidean length >= size_floor.

    Unbounded children (J_inf) are always emitted.
    """
    stack = list(reversed(list(pieces)))
    while stack:
        piece = stack.pop()
        top = piece.max_child_length()
        if top is not None and top < size_floor:
            continue
        if isinstance(piece, ChildPiece):
            yield piece.child
            continue
        stack.extend(reversed(piece.expand()))


# ---------------------------------------------------------------------------
# tips


@dataclass(frozen=True)
class PalmTip:
    """Tip E_J of the leaf owned by a Whitney interval.

    For standard owners ``gap_part`` is the closed gap and ``construction_part``
    the construction interval; ``gap_first`` says whether the gap is the left
    half.
    """

    owner: WhitneyInterval
    geometry: Geometry
    gap_part: Optional[RInterval] = None
    construction_part: Optional[RInterval] = None
    tip_gap: Optional[Gap] = None
    gap_first: bool = True

    @property
    def is_standard(self) -> bool:
        return self.owner.kind == STANDARD

    @property
    def length(self) -> Optional[Fraction]:
        return None if isinstance(self.geometry, CofiniteInterval) else self.geometry.length

    def pieces(self) -> list[Piece]:
        N = self.owner.N
        if self.is_standard:
            lv, idx = self.tip_gap.level, self.tip_gap.index
            gap_piece = GapPiece(self.tip_gap, N)
            if self.gap_first:
                return [gap_piece, ConsPiece(lv, idx + 1, N)]
            return [ConsPiece(lv, idx - 1, N), gap_piece]
        if self.owner.kind == INFINITY:
            return [
                GapPiece(Gap(2, 1), N),
                ConsPiece(2, 2, N),
                GapPiece(Gap(1, 1), N),
                ConsPiece(2, 6, N),
                GapPiece(Gap(2, 7), N),
            ]
        # circle order: right of K_r out to infinity, then back in from the left
        left, right = central_side_pieces(self.owner.gap, N)
        neg, inf, pos = GapPiece(UNBOUNDED, N).expand()
        return right + [pos, inf, neg] + list(reversed(left))


def central_side_pieces(gap: Gap, N: int) -> tuple[list[Piece], list[Piece]]:
    """Pieces of [0, a-s] and [b+s, 1] around K_l u L u K_r, nearest first."""
    level, p = gap.level, gap.index
    right: list[Piece] = []
    q = p + 1
    for lv in range(level, 0, -1):
        parent, digit = divmod(q, 3)
        if digit == 0:
            right.append(GapPiece(Gap(lv, 3 * parent + 1), N))
            right.append(ConsPiece(lv, 3 * parent + 2, N))
        q = parent
    left: list[Piece] = []
    q = p - 1
    for lv in range(level, 0, -1):
        parent, digit = divmod(q, 3)
        if digit == 2:
            left.append(GapPiece(Gap(lv, 3 * parent + 1), N))
            left.append(ConsPiece(lv, 3 * parent, N))
        q = parent
    return left, right


def tip(J: WhitneyInterval, params: WhitneyParams) -> PalmTip:
    """The tip E_J of the leaf based at J."""
    N = params.N
    if J.N != N:
        raise ValueError("interval was built with a different N")
    if not J.gap.is_valid():
        raise ValueError(f"{J} does not belong to the decomposition")
    if J.kind == INFINITY:
        return PalmTip(J, RInterval(Fraction(1, 9), Fraction(8, 9)))
    if J.kind == CENTRAL:
        a, b, s = J.gap.lo, J.gap.hi, J.gap.length
        return PalmTip(J, CofiniteInterval(RInterval(a - s, b + s, False, False)))
    m = abs(J.n)
    if J.gap.bounded:
        k = m - N
        if k < 1:
            raise ValueError(f"{J} is not standard")
        lv, p = J.gap.level + k, J.gap.index
        if J.n > 0:
            g_idx, gap_first = (p + 1) * 3**k + 1, True
        else:
            g_idx, gap_first = p * 3**k - 2, False
    else:
        k = m - N
        if k < 3:
            raise ValueError(f"{J} is not standard")
        lv = k
        g_idx, gap_first = (1, True) if J.n > 0 else (3**k - 2, False)
    tg = Gap(lv, g_idx)
    h = tg.length
    gap_part = RInterval(tg.lo, tg.hi)
    if gap_first:
        cons = RInterval(tg.hi, tg.hi + h)
        geom = RInterval(tg.lo, tg.hi + h)
    else:
        cons = RInterval(tg.lo - h, tg.lo)
        geom = RInterval(tg.lo - h, tg.hi)
    return PalmTip(J, geom, gap_part, cons, tg, gap_first)


def children(J: WhitneyInterval, params: WhitneyParams, size_floor: Fraction) -> tuple[list[WhitneyInterval], Fraction]:
    """Whitney intervals in E_J of length >= size_floor, plus the exact total
    Euclidean length of the bounded children left out."""
    t = tip(J, params)
    kids = list(iter_children(t.pieces(), Fraction(size_floor)))
    kept = sum((w.euclidean_length for w in kids if w.kind != INFINITY), Fraction(0))
    if isinstance(t.geometry, CofiniteInterval):
        sigma = params.sigma
        ex = t.geometry.excluded
        total = (ex.lo + sigma) + (1 + sigma - ex.hi)
    else:
        total = t.geometry.length
    return kids, total - kept


# ---------------------------------------------------------------------------
# counting with the central intervals split back into their 2N pieces


def split_intervals(
    pieces: Iterable[Piece], target: Fraction, window: Optional[RInterval] = None
) -> list[RInterval]:
    """Split Whitney intervals of Euclidean length ``target`` inside bounded
    gap and construction pieces, optionally only those meeting ``window``.

    Split means every gap carries J_{+-n} for all n >= 1, as if no central
    interval had been merged.
    """
    out: list[RInterval] = []
    stack = list(pieces)
    while stack:
        piece = stack.pop()
        ext = piece.extent()
        if window is not None and (ext.hi <= window.lo or ext.lo >= window.hi):
            continue
        if isinstance(piece, ConsPiece):
            if ext.length / 3 > target:
                stack.extend(piece.expand())
            continue
        if not isinstance(piece, GapPiece):
            raise TypeError(f"unsupported piece {piece!r}")
        g = piece.gap.length
        n = 1
        while pow3(-n) * g > target:
            n += 1
        if pow3(-n) * g == target:
            for r in (raw_gap_interval(piece.gap.interval, -n), raw_gap_interval(piece.gap.interval, n)):
                if window is None or (r.hi > window.lo and r.lo < window.hi):
                    out.append(r)
    return sorted(out, key=lambda r: r.lo)


def count_children_of_size(J: WhitneyInterval, k: int) -> int:
    """Closed form: E_J holds 2**k split Whitney intervals of length |E_J|/(2*3**k)."""
    if J.kind != STANDARD:
        raise ValueError("closed form only holds for standard owners")
    if k < 1:
        raise ValueError("k must be at least 1")
    return 2**k


def enumerate_children_of_size(J: WhitneyInterval, params: WhitneyParams, k: int) -> list[RInterval]:
    t = tip(J, params)
    return split_intervals(t.pieces(), t.length / (2 * 3**k))


@dataclass(frozen=True)
class EndSegments:
    """The two flat end segments of a standard tip: the run of small Whitney
    intervals at the open end of the gap, and the far construction interval."""

    first: RInterval
    last: RInterval


def end_segments(J: WhitneyInterval, params: WhitneyParams, Q: int) -> EndSegments:
    t = tip(J, params)
    h = t.tip_gap.length
    K = Q + params.N
    run = Fraction(3, 2) * pow3(-K) * h
    tail = pow3(-K) * h
    lo, hi = t.geometry.lo, t.geometry.hi
    if t.gap_first:
        return EndSegments(RInterval(lo, lo + run), RInterval(hi - tail, hi))
    return EndSegments(RInterval(hi - run, hi), RInterval(lo, lo + tail))


def count_in_end_segments(J: WhitneyInterval, k: int, Q: int) -> tuple[int, int]:
    """Closed-form counts of split Whitney intervals of length |E_J|/(2*3**k)
    inside the first and last end segments."""
    if J.kind != STANDARD:
        raise ValueError("end segments exist for standard owners only")
    K = Q + J.N
    first = 1 if k >= K else 0
    last = 2 ** (k - K - 1) if k >= K + 2 else 0
    return first, last


def enumerate_in_end_segments(J: WhitneyInterval, params: WhitneyParams, k: int, Q: int) -> tuple[int, int]:
    seg = end_segments(J, params, Q)
    found = enumerate_children_of_size(J, params, k)
    first = sum(1 for r in found if seg.first.contains_interval(r))
    last = sum(1 for r in found if seg.last.contains_interval(r))
    return first, last


def last_segment_count(k: int, Q: int, N: int) -> int:
    """Count in the last segment obtained by summing over gaps of relative depth
    m >= 1 and indices n >= 1 with m + n = k - Q - N."""
    r = k - Q - N
    return 2**r - 2 if r >= 2 else 0


# ---------------------------------------------------------------------------
# bands around a central interval


@dataclass(frozen=True)
class VjBand:
    j: int
    left: RInterval
    right: RInterval

    @property
    def length(self) -> Fraction:
        return self.left.length + self.right.length


def band_reach(s: Fraction, j: int) -> Fraction:
    """Distance from the outer edge of K_l u L u K_r to the outer edge of band j."""
    return s * 3**10 * (3**j - 1) / 4


def vj_bands(Jc: WhitneyInterval, max_j: int) -> list[VjBand]:
    """Bands 1..max_j with total length 3**(j+10) times the nominal length of
    J_c, placed symmetrically outward from K_l u L u K_r."""
    if Jc.kind != CENTRAL:
        raise ValueError("bands are defined for central intervals only")
    a, b, s = Jc.gap.lo, Jc.gap.hi, Jc.gap.length
    out = []
    for j in range(1, max_j + 1):
        inner, outer = band_reach(s, j - 1), band_reach(s, j)
        out.append(VjBand(j, RInterval(a - s - outer, a - s - inner), RInterval(b + s + inner, b + s + outer)))
    return out


# ---------------------------------------------------------------------------
# intervals of length 3**-l inside [0, 1]


def largest_split_inside(A: RInterval, max_extra: int) -> Fraction:
    """Length of the largest split Whitney interval contained in A, searching
    lengths |A| / 3**e for e <= max_extra (0 when none is found)."""
    root = [ConsPiece(0, 0, 1)]
    for extra in range(max_extra + 1):
        target = A.length * pow3(-extra)
        if any(A.contains_interval(r) for r in split_intervals(root, target, A)):
            return target
    return Fraction(0)


def whitney_scale_check(A: RInterval, max_k: int = 8) -> tuple[Fraction, dict[int, int]]:
    """Largest contained split Whitney interval as a fraction of |A|, and for
    each k the number of split Whitney intervals of length |A|/3**k meeting A."""
    if A.lo < 0 or A.hi > 1:
        raise ValueError("A must lie in [0, 1]")
    exact_log3(A.length)
    root = [ConsPiece(0, 0, 1)]
    largest = largest_split_inside(A, max_extra=max_k + 2)
    counts = {k: len(split_intervals(root, A.length * pow3(-k), A)) for k in range(1, max_k + 1)}
    return largest / A.length, counts


def meets_cantor(A: RInterval) -> bool:
    """Whether the closed interval A intersects K."""
    return interval_dist_to_cantor(A) == 0


def triadic_interval(level: int, index: int) -> RInterval:
    return RInterval(Fraction(index, 3**level), Fraction(index + 1, 3**level))
