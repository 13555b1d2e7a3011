from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantor_cascade.cantor import (
    CENTRAL,
    INFINITY,
    STANDARD,
    CofiniteInterval,
    Gap,
    RInterval,
    WhitneyParams,
    central,
    construction_interval_of,
    dist_to_cantor,
    infinity_interval,
    standard,
)
from cantor_cascade.leaves import (
    children,
    count_children_of_size,
    count_in_end_segments,
    end_segments,
    enumerate_children_of_size,
    enumerate_in_end_segments,
    last_segment_count,
    meets_cantor,
    tip,
    triadic_interval,
    vj_bands,
    whitney_scale_check,
)

MIDDLE = Gap(1, 1)


def test_tip_examples():
    for N in (2, 3, 6):
        wp = WhitneyParams(N)
        g = tip(standard(MIDDLE, N + 1, N), wp).geometry
        assert (g.lo, g.hi) == (Fraction(7, 9), Fraction(1))
    g = tip(central(MIDDLE, 2), WhitneyParams(2)).geometry
    assert isinstance(g, CofiniteInterval)
    assert (g.excluded.lo, g.excluded.hi) == (0, 1)
    g = tip(infinity_interval(2), WhitneyParams(2)).geometry
    assert (g.lo, g.hi) == (Fraction(1, 9), Fraction(8, 9))


def test_tip_rejects_foreign_interval():
    with pytest.raises(ValueError):
        tip(standard(MIDDLE, 4, 3), WhitneyParams(2))
    with pytest.raises(ValueError):
        tip(standard(Gap(2, 4), 4, 3), WhitneyParams(3))


standard_intervals = st.builds(
    lambda N, level, pick, n, sign: (N, standard(_gap_at(level, pick), sign * (N + n), N)),
    st.integers(2, 6),
    st.integers(1, 6),
    st.integers(0, 10**6),
    st.integers(1, 8),
    st.sampled_from([1, -1]),
)


def _gap_at(level: int, pick: int) -> Gap:
    # the pick-th gap of a level, by its binary address
    idx = 0
    for b in range(level - 1):
        idx = 3 * idx + (2 if (pick >> b) & 1 else 0)
    return Gap(level, 3 * idx + 1)


@settings(max_examples=200, deadline=None)
@given(standard_intervals)
def test_standard_tip_shape(case):
    N, J = case
    t = tip(J, WhitneyParams(N))
    g = t.geometry
    assert g.length == 2 * 3**N * J.geometry.length
    assert dist_to_cantor(g.lo) == 0 and dist_to_cantor(g.hi) == 0
    assert construction_interval_of(t.construction_part) is not None
    assert t.gap_part.length == t.construction_part.length == 3**N * J.geometry.length


def test_tips_of_one_gap_tile_the_complement():
    N = 2
    wp = WhitneyParams(N)
    for gap in (MIDDLE, Gap(2, 7), Gap(3, 19)):
        a, b, s = gap.lo, gap.hi, gap.length
        for sign, edge, outer in ((1, b, b + s), (-1, a, a - s)):
            geoms = [tip(standard(gap, sign * n, N), wp).geometry for n in range(N + 1, N + 12)]
            # consecutive tips abut and march toward the gap edge
            near = [g.lo if sign > 0 else g.hi for g in geoms]
            far = [g.hi if sign > 0 else g.lo for g in geoms]
            assert far[0] == outer
            assert all(f == n for f, n in zip(far[1:], near)) and abs(near[-1] - edge) < abs(near[0] - edge)
        ex = tip(central(gap, N), wp).geometry.excluded
        assert (ex.lo, ex.hi) == (a - s, b + s)


def test_children_examples():
    N = 3
    wp = WhitneyParams(N)
    J = standard(MIDDLE, N + 2, N)
    kids, rest = children(J, wp, J.geometry.length * Fraction(1, 3**6))
    lengths = {w.geometry.length for w in kids if w.kind == STANDARD}
    # central children are merged; every standard length is 3**(N-k)|J|
    for ln in lengths:
        ratio = ln / J.geometry.length
        k = 0
        while ratio * 3**k < 3**N:
            k += 1
        assert ratio * 3**k == 3**N and k >= 1
    assert rest > 0
    kids, _ = children(central(Gap(2, 1), N), wp, Fraction(1, 3**4))
    assert any(w.kind == INFINITY for w in kids)
    kids, _ = children(infinity_interval(N), wp, Fraction(1, 3**3))
    assert central(MIDDLE, N) in kids


def test_children_remainder_is_exact():
    N = 3
    wp = WhitneyParams(N)
    J = standard(MIDDLE, -(N + 1), N)
    total = tip(J, wp).length
    for e in range(4, 9):
        kids, rest = children(J, wp, Fraction(1, 3**e))
        assert sum(w.geometry.length for w in kids) + rest == total


def test_count_children_examples():
    J = standard(MIDDLE, 4, 3)
    assert count_children_of_size(J, 1) == 2
    assert count_children_of_size(J, 3) == 8
    for k in range(1, 9):
        assert len(enumerate_children_of_size(J, WhitneyParams(3), k)) == 2**k


def test_length_identity():
    J = standard(MIDDLE, 5, 3)
    E = tip(J, WhitneyParams(3)).length
    terms = 40
    partial = sum(2**k * Fraction(1, 2) * Fraction(1, 3**k) * E for k in range(1, terms + 1))
    tail = 2 * Fraction(2, 3) ** terms * Fraction(1, 2) * E  # sum over k > terms of (1/2)(2/3)^k
    assert partial + tail == E


def test_end_segment_counts_at_the_edges():
    J = standard(MIDDLE, 5, 4)
    Q, N = 4, 4
    assert count_in_end_segments(J, Q + N, Q) == (1, 0)
    assert count_in_end_segments(J, Q + N + 2, Q) == (1, 2)
    assert count_in_end_segments(J, Q + N - 1, Q) == (0, 0)


def test_end_segment_enumeration():
    """The first segment matches its closed form for every k; the last one
    matches 2**(k-Q-N) - 2, which coincides with the other stated form only
    at k = Q+N+2."""
    Q, N = 4, 4
    wp = WhitneyParams(N)
    for J in (standard(MIDDLE, 5, N), standard(Gap(2, 1), -6, N)):
        seg = end_segments(J, wp, Q)
        assert seg.first.length == Fraction(3, 2) * Fraction(1, 3**Q) * J.geometry.length
        assert seg.last.length == Fraction(1, 3**Q) * J.geometry.length
        assert construction_interval_of(seg.last) is not None
        for k in range(1, 15):
            first, last = enumerate_in_end_segments(J, wp, k, Q)
            assert first == count_in_end_segments(J, k, Q)[0]
            assert last == last_segment_count(k, Q, N)
        assert last_segment_count(Q + N + 2, Q, N) == count_in_end_segments(J, Q + N + 2, Q)[1]


def test_vj_bands():
    for N, gap in ((2, MIDDLE), (6, Gap(3, 4))):
        Jc = central(gap, N)
        bands = vj_bands(Jc, 6)
        s = gap.length
        assert bands[0].length == 3**11 * s / 3
        assert bands[0].left.hi == gap.lo - s and bands[0].right.lo == gap.hi + s
        for b in bands:
            assert b.left.length == b.right.length
            assert b.length == 3 ** (b.j + 10) * Jc.nominal_length
        for b1, b2 in zip(bands, bands[1:]):
            assert b1.left.lo == b2.left.hi and b1.right.hi == b2.right.lo
    assert vj_bands(central(MIDDLE, 2), 1)[0].left.lo < 0


def test_whitney_scale_examples():
    frac, counts = whitney_scale_check(RInterval(Fraction(1, 3), Fraction(2, 3)))
    assert frac == Fraction(1, 3)
    assert all(c <= 2**k for k, c in counts.items())
    frac, counts = whitney_scale_check(RInterval(Fraction(0), Fraction(1, 3)))
    assert frac >= Fraction(1, 9)
    assert all(c <= 2**k for k, c in counts.items())


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 7), st.integers(0, 10**9))
def test_whitney_scale_on_intervals_meeting_the_set(level, pick):
    A = triadic_interval(level, pick % 3**level)
    frac, counts = whitney_scale_check(A, max_k=6)
    assert all(c <= 2**k for k, c in counts.items())
    if meets_cantor(A):
        assert frac >= Fraction(1, 9)


def test_interval_inside_a_gap_has_no_large_split_piece():
    frac, _ = whitney_scale_check(RInterval(Fraction(4, 9), Fraction(5, 9)))
    assert frac == 0
