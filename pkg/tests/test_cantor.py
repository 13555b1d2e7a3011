import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantor_cascade.cantor import (
    CENTRAL,
    INFINITY,
    STANDARD,
    Gap,
    RInterval,
    WhitneyParams,
    construction_interval_of,
    dist_to_cantor,
    gaps,
    interval_dist_to_cantor,
    raw_gap_interval,
    whitney_of_gap,
    whitney_of_unbounded,
)


def brute_force_distance(x: Fraction, level: int) -> Fraction:
    """Minimum distance from x to the union of the construction intervals of
    a given level.  Intervals farther than the best endpoint seen so far are
    pruned, which cannot change the minimum."""
    if x <= 0:
        return -x
    if x >= 1:
        return x - 1
    intervals = [(Fraction(0), Fraction(1))]
    best = Fraction(1)
    for _ in range(level):
        nxt = []
        for a, b in intervals:
            w = (b - a) / 3
            nxt += [(a, a + w), (b - w, b)]
        dists = [Fraction(0) if a <= x <= b else min(abs(x - a), abs(x - b)) for a, b in nxt]
        best = min(dists)
        intervals = [iv for iv, d in zip(nxt, dists) if d <= best]
    return best


def check_against_brute_force(x: Fraction) -> None:
    # K lies inside the level-25 union, so its distance bounds d from below;
    # a positive value means x sits in a gap of level <= 25 and is exact
    b = brute_force_distance(x, 25)
    d = dist_to_cantor(x)
    if b > 0:
        assert d == b
    else:
        assert 0 <= d <= Fraction(1, 2 * 3**25)


def test_dist_examples():
    assert dist_to_cantor(Fraction(0)) == 0
    assert dist_to_cantor(Fraction(2)) == 1
    assert dist_to_cantor(Fraction(1, 2)) == Fraction(1, 6)
    assert brute_force_distance(Fraction(1, 2), 20) == Fraction(1, 6)


@settings(max_examples=300, deadline=None)
@given(st.integers(-10**6, 2 * 10**6), st.integers(1, 10**6))
def test_dist_matches_brute_force(num, den):
    check_against_brute_force(Fraction(num, den))


def test_dist_random_rationals():
    rng = random.Random(11)
    for _ in range(10**4):
        den = rng.randint(1, 10**5)
        check_against_brute_force(Fraction(rng.randint(0, den), den))


def test_dist_of_points_in_cantor_set():
    for x in (Fraction(1, 4), Fraction(3, 4), Fraction(1, 3), Fraction(2, 9), Fraction(1, 10)):
        assert dist_to_cantor(x) == 0


def test_gaps():
    assert [(lv, (r.lo, r.hi)) for lv, r in gaps(1)] == [(1, (Fraction(1, 3), Fraction(2, 3)))]
    two = {(r.lo, r.hi) for lv, r in gaps(2) if lv == 2}
    assert two == {(Fraction(1, 9), Fraction(2, 9)), (Fraction(7, 9), Fraction(8, 9))}
    assert sum(1 for lv, _ in gaps(5) if lv == 5) == 16


def test_construction_interval_of():
    assert construction_interval_of(RInterval(Fraction(0), Fraction(1))) == 0
    assert construction_interval_of(RInterval(Fraction(2, 3), Fraction(1))) == 1
    assert construction_interval_of(RInterval(Fraction(1, 3), Fraction(2, 3))) is None


def test_raw_gap_formula():
    J1 = raw_gap_interval(RInterval(Fraction(1, 3), Fraction(2, 3)), 1)
    assert (J1.lo, J1.hi) == (Fraction(1, 2), Fraction(11, 18))


def test_whitney_of_gap():
    L = RInterval(Fraction(1, 3), Fraction(2, 3), False, False)
    ws = whitney_of_gap(L, WhitneyParams(2), 8)
    (jc,) = [w for w in ws if w.kind == CENTRAL]
    g = jc.geometry
    assert (g.lo, g.hi) == (Fraction(1, 3) + Fraction(1, 54), Fraction(2, 3) - Fraction(1, 54))
    assert g.length == Fraction(8, 27)
    assert jc.nominal_length == Fraction(1, 9)
    for w in ws:
        if w.kind == STANDARD:
            assert w.geometry.length == Fraction(1, 3) * Fraction(1, 3 ** abs(w.n))
            assert w.geometry.length == 2 * interval_dist_to_cantor(w.geometry)
    sizes = [abs(w.n) for w in ws if w.kind == STANDARD]
    assert all(sizes.count(n) == 2 for n in range(3, 9))


def test_whitney_of_gap_rejects_non_gap():
    with pytest.raises(ValueError):
        whitney_of_gap(RInterval(Fraction(0), Fraction(1, 3)), WhitneyParams(2), 5)


def test_whitney_of_unbounded():
    wp = WhitneyParams(2)
    assert wp.sigma == Fraction(1, 162)
    ws = whitney_of_unbounded(wp, 10)
    (inf,) = [w for w in ws if w.kind == INFINITY]
    ex = inf.geometry.excluded
    assert (ex.lo, ex.hi) == (-Fraction(1, 162), 1 + Fraction(1, 162))
    assert inf.nominal_length == Fraction(1, 3)
    by_n = {w.n: w.geometry for w in ws if w.kind == STANDARD}
    assert by_n[5].length == 2 * wp.sigma / 3 == Fraction(1, 3**5)
    for n in range(5, 11):
        a, b = by_n[n], by_n[-n]
        assert (a.lo + b.hi, a.hi + b.lo) == (1, 1)
        assert a.length == 2 * interval_dist_to_cantor(a)


def test_gap_validity():
    assert Gap(1, 1).is_valid()
    assert Gap(2, 7).is_valid()
    assert not Gap(2, 4).is_valid()
    assert not Gap(3, 13).is_valid()
