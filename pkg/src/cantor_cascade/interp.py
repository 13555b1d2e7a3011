"""The interpolated measure nu = lam * mu + (1 - lam) * Lebesgue on the circle,
its cumulative map f, quasisymmetry ratios and cross ratios."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .kahane import LayeredMeasure, mass_of


@dataclass(frozen=True)
class InterpMeasure:
    lam: Fraction
    base: LayeredMeasure

    def __post_init__(self) -> None:
        object.__setattr__(self, "lam", Fraction(self.lam))
        if not 0 <= self.lam <= 1:
            raise ValueError("lambda must lie in [0, 1]")

    def cell_numerators(self, depth: int) -> tuple[list[int], int]:
        """Integer masses of the depth-d cells over a common denominator."""
        lam = self.lam
        den_mu = self.base.denominators[depth]
        cells = self.base.grid.size(depth)
        width = self.base.grid.width(depth)
        den = lam.denominator * den_mu * width.denominator
        a = lam.numerator * width.denominator
        b = (lam.denominator - lam.numerator) * den_mu * width.numerator
        nums = [a * int(v) + b for v in self.base.numerators[depth].tolist()]
        assert len(nums) == cells
        return nums, den


def nu_mass(nu: InterpMeasure, a: Fraction, b: Fraction, depth: int) -> tuple[Fraction, Fraction]:
    lo, hi = mass_of(nu.base, a, b, depth)
    leb = (1 - nu.lam) * (Fraction(b) - Fraction(a))
    return nu.lam * lo + leb, nu.lam * hi + leb


@dataclass(frozen=True)
class MonotoneMap:
    """f on the depth-d grid points, extended to the circle by f(x + 1) = f(x) + 1."""

    depth: int
    arity: int
    numerators: tuple[int, ...]  # f(i / arity**depth) * denominator, i = 0..cells
    denominator: int

    @property
    def cells(self) -> int:
        return len(self.numerators) - 1

    def at_index(self, i: int) -> Fraction:
        q, r = divmod(i, self.cells)
        return q + Fraction(self.numerators[r], self.denominator)

    def __call__(self, x: Fraction) -> Fraction:
        i = Fraction(x) * self.cells
        if i.denominator != 1:
            raise ValueError("x is not a breakpoint")
        return self.at_index(int(i))

    def bounds(self, x: Fraction) -> tuple[Fraction, Fraction]:
        """f(x) for any x lies between the values at the surrounding breakpoints."""
        i = Fraction(x) * self.cells
        lo = i.numerator // i.denominator
        return self.at_index(lo), self.at_index(lo if i.denominator == 1 else lo + 1)

    def table(self) -> list[tuple[Fraction, Fraction]]:
        return [(Fraction(i, self.cells), Fraction(v, self.denominator)) for i, v in enumerate(self.numerators)]


def qs_map(nu: InterpMeasure, depth: int) -> MonotoneMap:
    if depth < 1:
        raise ValueError("depth must be at least 1")
    nums, den = nu.cell_numerators(depth)
    pre = [0]
    for v in nums:
        pre.append(pre[-1] + v)
    if pre[-1] != den:
        raise AssertionError("nu does not have total mass one")
    return MonotoneMap(depth, nu.base.grid.arity, tuple(pre), den)


@dataclass(frozen=True)
class RatioScan:
    ratio: Fraction
    x: Fraction
    t: Fraction
    checked: int


def qs_ratio_scan(f: MonotoneMap, align: Optional[int] = None, max_t: Optional[Fraction] = None) -> RatioScan:
    """Largest [f(x+t) - f(x)] / [f(x) - f(x-t)] or its reciprocal over x, t
    that are multiples of arity**-align (default: the map's own depth),
    0 < t <= max_t (default 1/2), x around the whole circle."""
    align = f.depth if align is None else align
    if align > f.depth:
        raise ValueError("alignment finer than the map")
    step = f.arity ** (f.depth - align)
    cells = f.cells
    pre = list(f.numerators)
    total = pre[-1]
    # F on [-cells, 2 cells] so every lag difference is a plain slice
    ext = [v - total for v in pre[:-1]] + pre + [total + v for v in pre[1:]]
    # float screening is exact while the table stays below 2**53; ties are
    # settled with exact integers
    arr = np.array(ext, dtype=float if 2 * total < 2**53 else object)
    limit = Fraction(1, 2) if max_t is None else Fraction(max_t)
    t_max = int(limit * cells)
    best, where, checked = Fraction(0), (0, 0), 0
    best_f = 0.0
    for t in range(step, t_max + 1, step):
        lag = arr[t:] - arr[:-t]  # lag[i] = F(i - cells + t) - F(i - cells)
        right = lag[cells : 2 * cells : step]
        left = lag[cells - t : 2 * cells - t : step]
        r = right / left
        top = max(float(r.max()), 1 / float(r.min()))
        checked += len(r)
        if top < best_f * (1 - 1e-9):
            continue
        ratios = np.maximum(r, 1 / r)
        for c in np.nonzero(ratios >= top * (1 - 1e-9))[0]:
            a, b = int(right[c]), int(left[c])
            q = Fraction(max(a, b), min(a, b))
            if q > best:
                best, where = q, (int(c) * step, t)
        best_f = max(best_f, float(best))
    return RatioScan(best, Fraction(where[0], cells), Fraction(where[1], cells), checked)


def _periodic_diff(arr: np.ndarray, start: np.ndarray, t: int, cells: int) -> np.ndarray:
    """F(start + t) - F(start) for the periodic cumulative table ``arr``."""
    s = np.mod(start, cells)
    return arr[s + t] - arr[s]


@dataclass(frozen=True)
class DoublingBound:
    mu_constant: Fraction
    nu_ratio: Fraction
    bound: Fraction

    @property
    def ok(self) -> bool:
        return self.nu_ratio <= self.bound


def _concentric_max(nums: list[int], step: int, cells: int) -> Fraction:
    pre = [0]
    for v in nums:
        pre.append(pre[-1] + v)
    arr = np.array(pre + [pre[-1] + v for v in pre[1:]], dtype=np.int64 if pre[-1] * 2 < 2**62 else object)
    xs = np.arange(0, cells, step, dtype=np.int64)
    best = Fraction(0)
    for h in range(step, cells // 4 + 1, step):
        inner = _periodic_diff(arr, xs, 2 * h, cells)
        outer = _periodic_diff(arr, xs - h, 4 * h, cells)
        ratios = outer.astype(float) / inner.astype(float)
        i = int(np.argmax(ratios))
        for c in np.nonzero(ratios >= ratios[i] * (1 - 1e-9))[0]:
            best = max(best, Fraction(int(outer[c]), int(inner[c])))
    return best


def nu_doubling_scan(nu: InterpMeasure, depth: int, align: Optional[int] = None) -> DoublingBound:
    """max nu(2I)/nu(I) over arcs I = [x, x + 2h] with 2I = [x - h, x + 3h],
    x, h multiples of arity**-align, against max(c, 2) where c is the same
    maximum for mu."""
    align = depth if align is None else align
    grid = nu.base.grid
    step = grid.arity ** (depth - align)
    cells = grid.size(depth)
    mu_nums = [int(v) for v in nu.base.numerators[depth].tolist()]
    c = _concentric_max(mu_nums, step, cells)
    nums, _ = nu.cell_numerators(depth)
    r = _concentric_max(nums, step, cells)
    return DoublingBound(c, r, max(c, Fraction(2)))


Point = Optional[Fraction]  # None is the point at infinity


def cross_ratio(a: Point, b: Point, c: Point, d: Point) -> Fraction:
    """|a - c| / |a - d| * |b - d| / |b - c|; a factor pair containing
    infinity cancels to 1."""
    pts = [a, b, c, d]
    finite = [p for p in pts if p is not None]
    if len(set(finite)) != len(finite) or len(finite) < 3:
        raise ValueError("points must be distinct")
    if a is None:
        return abs(b - d) / abs(b - c)
    if b is None:
        return abs(a - c) / abs(a - d)
    if c is None:
        return abs(b - d) / abs(a - d)
    if d is None:
        return abs(a - c) / abs(b - c)
    return abs(a - c) / abs(a - d) * abs(b - d) / abs(b - c)


def write_map_csv(path, f: MonotoneMap) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["x_num", "x_den", "f_num", "f_den"])
        for x, y in f.table():
            out.writerow([x.numerator, x.denominator, y.numerator, y.denominator])
