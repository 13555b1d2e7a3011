"""Harmonic measure of real intervals seen from points of the upper half plane.

The harmonic measure of [a, b] at z = x + iy is the angle the interval
subtends at z, divided by pi.  The pair of slopes ((x - a)/y, (x - b)/y)
determines that angle and is unchanged by real similarities, so invariance
statements are checked exactly on slopes; angles are evaluated from the exact
tangent (s_a - s_b) / (1 + s_a s_b) only for reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .cantor import CENTRAL, STANDARD, RInterval, WhitneyInterval
from .chartgrid import Params, band_fractions
from .leaves import tip, vj_bands

DEFAULT_ALPHA = Fraction(1, 8)

# Right end of [a, +inf); a left end of None means -inf.
Endpoint = Optional[Fraction]


@dataclass(frozen=True)
class BasePoint:
    w: Fraction
    height: Fraction

    def __post_init__(self) -> None:
        if self.height <= 0:
            raise ValueError("base point must lie in the upper half plane")


def base_point(J: WhitneyInterval, alpha: Fraction = DEFAULT_ALPHA) -> BasePoint:
    """z_J above the midpoint of J at height alpha |J| (nominal length for
    central intervals)."""
    if not 0 < alpha <= Fraction(1, 2):
        raise ValueError("alpha must lie in (0, 1/2]")
    if J.kind == STANDARD:
        g = J.geometry
        return BasePoint((g.lo + g.hi) / 2, alpha * g.length)
    if J.kind == CENTRAL:
        return BasePoint((J.gap.lo + J.gap.hi) / 2, alpha * J.nominal_length)
    raise ValueError("J_inf has no base point in the half plane")


Slope = Optional[Fraction]  # None stands for -inf (right end at +inf) or +inf (left end at -inf)


@dataclass(frozen=True)
class HarmonicValue:
    omega: float
    slopes: tuple[Slope, Slope]


def _slope(z: BasePoint, t: Endpoint) -> Slope:
    return None if t is None else (z.w - t) / z.height


def subtended_angle(s_lo: Slope, s_hi: Slope) -> float:
    """Angle between the rays to the two ends, from their slopes."""
    if s_lo is None and s_hi is None:
        return math.pi
    if s_lo is None:
        return math.pi / 2 + math.atan(-s_hi)
    if s_hi is None:
        return math.pi / 2 + math.atan(s_lo)
    num = s_lo - s_hi
    den = 1 + s_lo * s_hi
    return math.atan2(float(num), float(den)) if num else 0.0


def harmonic_measure_interval(z: BasePoint, a: Endpoint, b: Endpoint) -> HarmonicValue:
    """omega(z, [a, b]); a = None means -inf and b = None means +inf."""
    if a is not None and b is not None and a >= b:
        if a == b:
            return HarmonicValue(0.0, (_slope(z, a), _slope(z, b)))
        raise ValueError("interval ends out of order")
    s = (_slope(z, a), _slope(z, b))
    return HarmonicValue(subtended_angle(*s) / math.pi, s)


def harmonic_measure_set(z: BasePoint, parts: Iterable[tuple[Endpoint, Endpoint]]) -> float:
    return sum(harmonic_measure_interval(z, a, b).omega for a, b in parts)


def tangent(slopes: tuple[Fraction, Fraction]) -> Optional[Fraction]:
    """Exact tan of the subtended angle; None when the angle is pi/2."""
    s_lo, s_hi = slopes
    den = 1 + s_lo * s_hi
    return None if den == 0 else (s_lo - s_hi) / den


def tangent_sum(t1: Optional[Fraction], t2: Optional[Fraction]) -> Optional[Fraction]:
    """tan(x + y) from tan x and tan y (None is infinity)."""
    if t1 is None and t2 is None:
        return Fraction(0)
    if t1 is None:
        return -1 / t2 if t2 else None
    if t2 is None:
        return -1 / t1 if t1 else None
    den = 1 - t1 * t2
    return None if den == 0 else (t1 + t2) / den


def leaf_certificate(J: WhitneyInterval, params: Params, alpha: Fraction = DEFAULT_ALPHA) -> tuple[str, Fraction, Fraction]:
    """Slopes of the tip E_J seen from z_J, oriented so the tip lies to the
    right; the first entry names the leaf shape."""
    t = tip(J, params.whitney)
    z = base_point(J, alpha)
    if J.kind == CENTRAL:
        ex = t.geometry.excluded
        return ("cofinite", _slope(z, ex.lo), _slope(z, ex.hi))
    g = t.geometry
    s_lo, s_hi = _slope(z, g.lo), _slope(z, g.hi)
    if g.lo >= J.geometry.hi:
        return ("bounded", s_lo, s_hi)
    return ("bounded", -s_hi, -s_lo)


def standard_leaf_invariance(params: Params, sample: Sequence[WhitneyInterval], alpha: Fraction = DEFAULT_ALPHA) -> bool:
    """Every sampled standard leaf carries the same certificate."""
    certs = {leaf_certificate(J, params, alpha) for J in sample if J.kind == STANDARD}
    if len(certs) != 1 or any(J.kind != STANDARD for J in sample):
        return False
    return True


def expected_standard_certificate(params: Params, alpha: Fraction = DEFAULT_ALPHA) -> tuple[str, Fraction, Fraction]:
    """Closed form: a standard tip lies between (1 + 3**N)|J| and
    (1 + 3**(N+1))|J| beyond the midpoint of J, and z_J sits alpha |J| high."""
    N = params.N
    return ("bounded", -Fraction(1 + 3**N) / alpha, -Fraction(1 + 3 ** (N + 1)) / alpha)


@dataclass(frozen=True)
class VjDecay:
    omegas: tuple[float, ...]
    ratios: tuple[float, ...]
    total: float
    tip_omega: float

    def ok(self, from_j: int = 3, bound: float = 0.4) -> bool:
        return all(r <= bound for r in self.ratios[from_j - 1 :])


def vj_angle_decay(Jc: WhitneyInterval, alpha: Fraction, max_j: int, params: Optional[Params] = None) -> VjDecay:
    """omega(z_J, V_j) for j = 1..max_j; ratios[j-1] = omega_{j+1}/omega_j."""
    if Jc.kind != CENTRAL:
        raise ValueError("V_j bands belong to central intervals")
    z = base_point(Jc, alpha)
    omegas = []
    for band in vj_bands(Jc, max_j):
        omegas.append(
            harmonic_measure_interval(z, band.left.lo, band.left.hi).omega
            + harmonic_measure_interval(z, band.right.lo, band.right.hi).omega
        )
    ratios = tuple(omegas[i + 1] / omegas[i] for i in range(len(omegas) - 1))
    N = params.N if params else Jc.N
    ex = tip(Jc, Params(N=N).whitney if params is None else params.whitney).geometry.excluded
    tip_omega = 1 - harmonic_measure_interval(z, ex.lo, ex.hi).omega
    return VjDecay(tuple(omegas), ratios, sum(omegas), tip_omega)


def band_angle_comparison(Jc: WhitneyInterval, params: Params, alpha: Fraction = DEFAULT_ALPHA) -> list[tuple[int, float, float]]:
    """(j, |T_j|/|I|, omega_j) for bands that the chart grid populates."""
    fr = band_fractions(Jc, params)
    top = max(fr)
    dec = vj_angle_decay(Jc, alpha, top, params)
    return [(j, float(fr[j]), dec.omegas[j - 1]) for j in sorted(fr)]


def hyperbolic_distance_origin(a: float) -> float:
    """log((1 + |a|)/(1 - |a|)), the distance from 0 to a in the unit disc."""
    r = abs(float(a))
    if r >= 1:
        raise ValueError("point must lie inside the unit disc")
    return math.log((1 + r) / (1 - r))
