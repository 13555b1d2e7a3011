import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantor_cascade.kahane import (
    RegularGrid,
    SuitabilityError,
    SuitableStep,
    build_measure,
    doubling_scan,
    entropy_dimension,
    five_ary_cascade,
    five_ary_measure,
    five_ary_step,
    flat_run_bound,
    flat_run_bound_check,
    is_suitable,
    lebesgue_cascade,
    lebesgue_densities,
    local_dimension_estimate,
    mass_of,
    measure_rows,
    model_five_ary,
)

P = (Fraction(1, 5), Fraction(1, 10), Fraction(2, 5), Fraction(1, 10), Fraction(1, 5))


def digit_product_mass(depth: int, index: int) -> Fraction:
    """Mass of a 5-ary interval as the product of the fifth-masses of its digits."""
    m = Fraction(1)
    for _ in range(depth):
        index, d = divmod(index, 5)
        m *= P[d]
    return m


def test_suitability_examples():
    one = SuitableStep.constant(Fraction(0), Fraction(1), Fraction(1), Fraction(1, 2))
    assert is_suitable(one)
    F1 = five_ary_step(1, 0)
    cert = is_suitable(F1)
    assert cert and cert.delta_witness == Fraction(1, 2) and cert.eta_witness == Fraction(1, 5)
    bad = SuitableStep((0, Fraction(1, 2), 1), (Fraction(4, 5), 1), Fraction(1, 2), Fraction(1, 5))
    assert bad.mean() == Fraction(9, 10)
    assert not is_suitable(bad)


def test_step_rejects_unordered_breaks():
    with pytest.raises(ValueError):
        SuitableStep((0, Fraction(1, 2), Fraction(1, 3)), (1, 1), 1, Fraction(1, 2))


def test_five_ary_masses():
    m = five_ary_measure(3)
    assert m.masses(1) == list(P)
    assert m.mass(2, 12) == Fraction(2, 5) ** 2
    for i in range(125):
        assert m.mass(3, i) == digit_product_mass(3, i)


def test_lebesgue_measure():
    grid = RegularGrid(5)
    m = build_measure(grid, lebesgue_densities(grid), 3)
    assert all(v == Fraction(1, 125) for v in m.masses(3))


def test_build_measure_reports_offending_interval():
    grid = RegularGrid(5)

    def dens(n, i):
        if n == 2 and i == 3:
            lo, hi = grid.interval(1, 3)
            w = (hi - lo) / 5
            return SuitableStep(tuple(lo + k * w for k in range(6)), (1, 1, 2, 1, 1), Fraction(1, 2), Fraction(1, 5))
        return lebesgue_densities(grid)(n, i)

    with pytest.raises(SuitabilityError) as err:
        build_measure(grid, dens, 3)
    assert (err.value.layer, err.value.index) == (2, 3)


def test_mass_conservation_and_stability():
    m = five_ary_measure(6)
    for d in range(7):
        assert m.total(d) == 1
    for d in range(1, 6):
        for i in range(0, 5**d, 7):
            kids = sum(m.mass(d + 1, 5 * i + c) for c in range(5))
            assert kids == m.mass(d, i)


def test_mass_of_examples():
    m = five_ary_measure(4)
    assert mass_of(m, Fraction(2, 25), Fraction(3, 25), 2) == (m.mass(2, 2), m.mass(2, 2))
    assert mass_of(m, Fraction(0), Fraction(1, 2), 1) == (Fraction(3, 10), Fraction(7, 10))
    lo2, hi2 = mass_of(m, Fraction(0), Fraction(1, 2), 2)
    assert Fraction(3, 10) <= lo2 and hi2 <= Fraction(7, 10) and hi2 - lo2 < Fraction(2, 5)
    assert mass_of(m, Fraction(0), Fraction(1), 4) == (1, 1)


@settings(max_examples=100, deadline=None)
@given(st.fractions(0, 1), st.fractions(0, 1))
def test_mass_of_refines_monotonically(x, y):
    a, b = min(x, y), max(x, y)
    m = five_ary_measure(6)
    prev = (Fraction(0), Fraction(1))
    for d in range(7):
        lo, hi = mass_of(m, a, b, d)
        assert prev[0] <= lo <= hi <= prev[1]
        prev = (lo, hi)


def test_doubling_examples():
    for depth in (1, 3, 5):
        res = doubling_scan(five_ary_measure(depth), depth)
        assert res.ratio == 4
    assert doubling_scan(five_ary_measure(1), 1).pair == ((1, 1), (1, 2))
    grid = RegularGrid(5)
    assert doubling_scan(build_measure(grid, lebesgue_densities(grid), 3), 3).ratio == 1
    shifted = doubling_scan(five_ary_measure(3), 3, "shifted")
    assert 4 <= shifted.ratio < 100


def test_model_structure():
    grid, dens = model_five_ary(3)
    F1 = dens(1, 0)
    assert F1.value_at(Fraction(1, 2)) == 2
    F2 = dens(2, 2)
    assert [(b - Fraction(2, 5)) * 5 for b in F2.breaks] == list(F1.breaks) and F2.values == F1.values
    for n in range(1, 4):
        for i in range(0, 5 ** (n - 1), 3):
            assert dens(n, i).mean() == 1
    with pytest.raises(ValueError):
        model_five_ary(0)


def test_dimension_oracles():
    h = -sum(float(p) * math.log(float(p)) for p in P) / math.log(5)
    assert entropy_dimension(P, 5) == pytest.approx(h, abs=1e-15)
    assert h == pytest.approx(0.91386, abs=1e-5)
    assert h == pytest.approx(1 - math.log(2) / (5 * math.log(5)), abs=1e-12)
    assert local_dimension_estimate(lebesgue_cascade(), 8, 50, 1).mean == pytest.approx(1.0, abs=1e-12)


def test_dimension_estimate_is_deterministic():
    a = local_dimension_estimate(five_ary_cascade(), 8, 200, 3)
    b = local_dimension_estimate(five_ary_cascade(), 8, 200, 3)
    assert a == b


def test_flat_runs():
    assert flat_run_bound(Fraction(1, 5)) == pytest.approx(math.log(1 / 5) / math.log(3 / 5))
    assert 3 < flat_run_bound(Fraction(1, 5)) < 4
    grid = RegularGrid(5)
    leb = build_measure(grid, lebesgue_densities(grid), 3)
    assert flat_run_bound_check(leb).max_count == 0
    rep = flat_run_bound_check(five_ary_measure(5))
    assert rep.ok and rep.pairs_checked > 0


def test_measure_rows():
    rows = list(measure_rows(five_ary_measure(1)))
    assert rows[0] == (0, 0, 1, 1, 1)
    assert rows[3] == (1, Fraction(2, 5), Fraction(3, 5), 2, 5)
