import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantor_cascade.cantor import Gap, central, standard
from cantor_cascade.chartgrid import Params
from cantor_cascade.halfplane import (
    BasePoint,
    base_point,
    expected_standard_certificate,
    harmonic_measure_interval,
    harmonic_measure_set,
    hyperbolic_distance_origin,
    leaf_certificate,
    standard_leaf_invariance,
    tangent,
    tangent_sum,
    vj_angle_decay,
)

P = Params()
ALPHA = Fraction(1, 8)


def test_harmonic_examples():
    z = BasePoint(Fraction(0), Fraction(1))
    assert harmonic_measure_interval(z, Fraction(-1), Fraction(1)).omega == pytest.approx(0.5, abs=1e-15)
    assert harmonic_measure_interval(z, Fraction(0), None).omega == pytest.approx(0.5, abs=1e-15)
    h = harmonic_measure_interval(BasePoint(Fraction(1, 2), Fraction(1, 2)), Fraction(0), Fraction(1))
    assert h.omega == pytest.approx(0.5, abs=1e-15)
    assert h.slopes == (Fraction(1), Fraction(-1))
    assert harmonic_measure_interval(z, Fraction(2), Fraction(2)).omega == 0
    assert harmonic_measure_interval(z, None, None).omega == 1
    with pytest.raises(ValueError):
        BasePoint(Fraction(0), Fraction(0))


def test_angle_against_atan_oracle():
    z = BasePoint(Fraction(3, 7), Fraction(2, 9))
    for a, b in ((Fraction(-5), Fraction(1, 3)), (Fraction(1), Fraction(4)), (Fraction(-1, 2), Fraction(3, 7))):
        direct = (math.atan2(float(z.height), float(a - z.w)) - math.atan2(float(z.height), float(b - z.w))) / math.pi
        assert harmonic_measure_interval(z, a, b).omega == pytest.approx(abs(direct), abs=1e-14)


rationals = st.fractions(-20, 20, max_denominator=50)


@settings(max_examples=200, deadline=None)
@given(rationals, st.fractions(Fraction(1, 50), 10, max_denominator=50), rationals, rationals, rationals)
def test_additivity_and_total(x, y, p, q, r):
    a, b, c = sorted((p, q, r))
    if a == b or b == c:
        return
    z = BasePoint(x, y)
    ab = harmonic_measure_interval(z, a, b)
    bc = harmonic_measure_interval(z, b, c)
    ac = harmonic_measure_interval(z, a, c)
    assert ab.omega + bc.omega == pytest.approx(ac.omega, abs=1e-12)
    assert tangent_sum(tangent(ab.slopes), tangent(bc.slopes)) == tangent(ac.slopes)
    parts = [(None, a), (a, b), (b, c), (c, None)]
    assert harmonic_measure_set(z, parts) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(rationals, st.fractions(Fraction(1, 50), 10, max_denominator=50), rationals, rationals, st.fractions(Fraction(1, 10), 10))
def test_scale_invariance(x, y, p, q, lam):
    a, b = sorted((p, q))
    if a == b:
        return
    h1 = harmonic_measure_interval(BasePoint(x, y), a, b)
    h2 = harmonic_measure_interval(BasePoint(lam * x, lam * y), lam * a, lam * b)
    assert h1.slopes == h2.slopes
    assert h1.omega == h2.omega


def test_standard_certificates():
    J1 = standard(Gap(1, 1), P.N + 1, P.N)
    J2 = standard(Gap(1, 1), P.N + 2, P.N)
    J3 = standard(Gap(4, 19), -(P.N + 5), P.N)
    assert leaf_certificate(J1, P, ALPHA) == leaf_certificate(J2, P, ALPHA) == leaf_certificate(J3, P, ALPHA)
    assert leaf_certificate(J1, P, ALPHA) == expected_standard_certificate(P, ALPHA)
    assert standard_leaf_invariance(P, [J1, J2, J3], ALPHA)
    Jc = central(Gap(1, 1), P.N)
    assert leaf_certificate(Jc, P, ALPHA) != leaf_certificate(J1, P, ALPHA)
    assert not standard_leaf_invariance(P, [J1, Jc], ALPHA)


def test_base_point():
    J = standard(Gap(1, 1), P.N + 1, P.N)
    z = base_point(J, ALPHA)
    assert z.height == ALPHA * J.geometry.length and z.w == J.geometry.midpoint
    with pytest.raises(ValueError):
        base_point(J, Fraction(3, 4))


def test_vj_decay():
    for gap in (Gap(1, 1), Gap(3, 19), Gap(12, 1)):
        dec = vj_angle_decay(central(gap, P.N), ALPHA, 24, P)
        assert dec.ok(3, 0.4)
        assert abs(dec.ratios[-1] - 1 / 3) < 0.01
        assert dec.total <= dec.tip_omega * (1 + 1e-12)


def test_hyperbolic_distance():
    assert hyperbolic_distance_origin(0) == 0
    assert hyperbolic_distance_origin(Fraction(1, 2)) == pytest.approx(math.log(3), abs=1e-15)
    values = [hyperbolic_distance_origin(Fraction(k, 10)) for k in range(10)]
    assert values == sorted(values) and len(set(values)) == 10
    with pytest.raises(ValueError):
        hyperbolic_distance_origin(1)
