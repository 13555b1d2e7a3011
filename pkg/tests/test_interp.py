from fractions import Fraction
from itertools import accumulate

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantor_cascade.interp import InterpMeasure, cross_ratio, nu_doubling_scan, nu_mass, qs_map, qs_ratio_scan, write_map_csv
from cantor_cascade.kahane import five_ary_measure

P = (Fraction(1, 5), Fraction(1, 10), Fraction(2, 5), Fraction(1, 10), Fraction(1, 5))


def test_lambda_zero_is_identity():
    f = qs_map(InterpMeasure(Fraction(0), five_ary_measure(3)), 3)
    assert all(f(Fraction(i, 125)) == Fraction(i, 125) for i in range(126))
    assert f(Fraction(7, 5)) == Fraction(7, 5)


def test_lambda_one_is_the_cumulative_of_mu():
    f = qs_map(InterpMeasure(Fraction(1), five_ary_measure(1)), 1)
    assert [f(Fraction(i, 5)) for i in range(6)] == [Fraction(0)] + list(accumulate(P))
    assert f.bounds(Fraction(1, 2)) == (Fraction(3, 10), Fraction(7, 10))


def test_lambda_range():
    with pytest.raises(ValueError):
        InterpMeasure(Fraction(3, 2), five_ary_measure(1))


def test_nu_mass_of_half_circle():
    # mu[0, 1/2] is bracketed at depth 3 by the full cells 3/10 + (2/5)(3/10 + (2/5) 3/10)
    # and the one straddling cell of mass (2/5)^3
    inner = Fraction(3, 10) + Fraction(2, 5) * (Fraction(3, 10) + Fraction(2, 5) * Fraction(3, 10))
    outer = inner + Fraction(2, 5) ** 3
    half = Fraction(1, 2)
    expected = (half * inner + half * half, half * outer + half * half)
    assert expected == (Fraction(121, 250), Fraction(129, 250))
    assert nu_mass(InterpMeasure(half, five_ary_measure(3)), Fraction(0), half, 3) == expected


@settings(max_examples=30, deadline=None)
@given(st.fractions(0, 1, max_denominator=30))
def test_map_is_strictly_increasing(lam):
    f = qs_map(InterpMeasure(lam, five_ary_measure(3)), 3)
    assert all(a < b for a, b in zip(f.numerators, f.numerators[1:]))
    assert f.numerators[-1] == f.denominator


def test_qs_ratio_examples():
    mu = five_ary_measure(3)
    assert qs_ratio_scan(qs_map(InterpMeasure(Fraction(1), mu), 3), align=1).ratio == 4
    # nu_{1/2} fifths are 1/5, 3/20, 3/10, 3/20, 1/5
    assert qs_ratio_scan(qs_map(InterpMeasure(Fraction(1, 2), mu), 3), align=1).ratio == 2
    assert qs_ratio_scan(qs_map(InterpMeasure(Fraction(0), mu), 3)).ratio == 1
    with pytest.raises(ValueError):
        qs_ratio_scan(qs_map(InterpMeasure(Fraction(1), mu), 2), align=3)


def test_nu_doubling_is_bounded():
    for lam in (Fraction(0), Fraction(1, 2), Fraction(1)):
        res = nu_doubling_scan(InterpMeasure(lam, five_ary_measure(4)), 4)
        assert res.ok
        assert res.bound == max(res.mu_constant, 2)
    leb = nu_doubling_scan(InterpMeasure(Fraction(0), five_ary_measure(3)), 3)
    assert leb.nu_ratio == 2


def test_cross_ratio_examples():
    z = [Fraction(0), Fraction(1), Fraction(2), Fraction(3)]
    assert cross_ratio(*z) == Fraction(4, 3)
    assert cross_ratio(None, Fraction(0), Fraction(1), Fraction(2)) == 2
    with pytest.raises(ValueError):
        cross_ratio(Fraction(0), Fraction(0), Fraction(1), Fraction(2))


finite = st.fractions(-10, 10, max_denominator=20)


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, finite, st.fractions(Fraction(1, 10), 10), finite)
def test_cross_ratio_invariances(a, b, c, d, s, t):
    if len({a, b, c, d}) < 4:
        return
    r = cross_ratio(a, b, c, d)
    assert cross_ratio(b, a, d, c) == r
    assert cross_ratio(s * a + t, s * b + t, s * c + t, s * d + t) == r
    if 0 not in (a, b, c, d):
        assert cross_ratio(1 / a, 1 / b, 1 / c, 1 / d) == r


def test_map_csv(tmp_path):
    f = qs_map(InterpMeasure(Fraction(1, 2), five_ary_measure(2)), 2)
    out = tmp_path / "map.csv"
    write_map_csv(out, f)
    lines = out.read_text().splitlines()
    assert lines[0] == "x_num,x_den,f_num,f_den" and len(lines) == 27
