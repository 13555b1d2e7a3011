"""Multiplicative cascades on regular grids.

A cascade measure is built layer by layer: each interval of layer n-1 carries
a mean-one step function, constant on its children, and the mass of a child
is the parent's mass times the child's value divided by the arity.  Masses are
kept as exact integers over one common denominator per layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Callable, Iterator, Optional, Sequence

import numpy as np


class SuitabilityError(ValueError):
    def __init__(self, layer: int, index: int, reasons: Sequence[str]):
        super().__init__(f"density at layer {layer}, interval {index} is not suitable: {'; '.join(reasons)}")
        self.layer = layer
        self.index = index
        self.reasons = tuple(reasons)


# ---------------------------------------------------------------------------
# step functions


@dataclass(frozen=True)
class SuitableStep:
    """Step function on [breaks[0], breaks[-1]] taking values[i] on
    [breaks[i], breaks[i+1]], together with the (delta, eta) it claims."""

    breaks: tuple[Fraction, ...]
    values: tuple[Fraction, ...]
    delta: Fraction
    eta: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "breaks", tuple(Fraction(b) for b in self.breaks))
        object.__setattr__(self, "values", tuple(Fraction(v) for v in self.values))
        object.__setattr__(self, "delta", Fraction(self.delta))
        object.__setattr__(self, "eta", Fraction(self.eta))
        if len(self.breaks) < 2 or len(self.values) != len(self.breaks) - 1:
            raise ValueError("need one value per step")
        if any(b1 >= b2 for b1, b2 in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    @property
    def lo(self) -> Fraction:
        return self.breaks[0]

    @property
    def hi(self) -> Fraction:
        return self.breaks[-1]

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    def integral(self) -> Fraction:
        return sum((v * (b2 - b1) for v, b1, b2 in zip(self.values, self.breaks, self.breaks[1:])), Fraction(0))

    def mean(self) -> Fraction:
        return self.integral() / self.length

    def value_at(self, x: Fraction) -> Fraction:
        """Value at x (right-continuous, last step closed)."""
        if not self.lo <= x <= self.hi:
            raise ValueError(f"{x} outside the host interval")
        for v, b2 in zip(self.values, self.breaks[1:]):
            if x < b2:
                return v
        return self.values[-1]

    def flat_ends(self) -> tuple[Fraction, Fraction]:
        """Lengths of the maximal runs with value 1 at each end."""
        left = Fraction(0)
        for v, b1, b2 in zip(self.values, self.breaks, self.breaks[1:]):
            if v != 1:
                break
            left += b2 - b1
        right = Fraction(0)
        for v, b1, b2 in zip(reversed(self.values), reversed(self.breaks[:-1]), reversed(self.breaks[1:])):
            if v != 1:
                break
            right += b2 - b1
        return left, right

    def merged(self) -> "SuitableStep":
        """Same function with equal neighbouring steps joined."""
        breaks, values = [self.breaks[0]], []
        for v, b2 in zip(self.values, self.breaks[1:]):
            if values and values[-1] == v:
                breaks[-1] = b2
            else:
                values.append(v)
                breaks.append(b2)
        return SuitableStep(tuple(breaks), tuple(values), self.delta, self.eta)

    @classmethod
    def constant(cls, lo: Fraction, hi: Fraction, delta: Fraction = Fraction(1), eta: Fraction = Fraction(1, 2)) -> "SuitableStep":
        return cls((Fraction(lo), Fraction(hi)), (Fraction(1),), delta, eta)


@dataclass(frozen=True)
class SuitabilityCertificate:
    ok: bool
    mean: Fraction
    min_value: Fraction
    max_value: Fraction
    delta_witness: Fraction
    eta_witness: Fraction
    reasons: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def is_suitable(F: SuitableStep) -> SuitabilityCertificate:
    """Check mean one, delta <= F <= 1/delta and F == 1 on both end segments of
    relative length eta, exactly.  The certificate records the best delta and
    eta the function actually satisfies."""
    reasons = []
    mean = F.mean()
    lo_v, hi_v = min(F.values), max(F.values)
    if mean != 1:
        reasons.append(f"mean is {mean}, not 1")
    if F.delta <= 0 or F.delta > 1:
        reasons.append("delta must lie in (0, 1]")
    elif lo_v < F.delta or hi_v > 1 / F.delta:
        reasons.append(f"values in [{lo_v}, {hi_v}] escape [{F.delta}, {1 / F.delta}]")
    left, right = F.flat_ends()
    eta_w = min(left, right) / F.length
    if F.eta <= 0 or eta_w < F.eta:
        reasons.append(f"flat ends cover {eta_w} of the host, need {F.eta}")
    delta_w = min(lo_v, 1 / hi_v) if lo_v > 0 else Fraction(0)
    return SuitabilityCertificate(not reasons, mean, lo_v, hi_v, delta_w, eta_w, tuple(reasons))


# ---------------------------------------------------------------------------
# grids and measures


@dataclass(frozen=True)
class RegularGrid:
    """Layer n splits [lo, hi] into arity**n equal intervals."""

    arity: int
    lo: Fraction = Fraction(0)
    hi: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        if self.arity < 2:
            raise ValueError("arity must be at least 2")

    def width(self, depth: int) -> Fraction:
        return (self.hi - self.lo) / self.arity**depth

    def interval(self, depth: int, index: int) -> tuple[Fraction, Fraction]:
        w = self.width(depth)
        return self.lo + index * w, self.lo + (index + 1) * w

    def parent(self, depth: int, index: int) -> tuple[int, int]:
        return depth - 1, index // self.arity

    def size(self, depth: int) -> int:
        return self.arity**depth


Densities = Callable[[int, int], SuitableStep]


@dataclass
class LayeredMeasure:
    """Exact masses on every grid interval down to ``depth``.

    ``numerators[n][i] / denominators[n]`` is the mass of interval i of layer n.
    """

    grid: RegularGrid
    depth: int
    numerators: list[np.ndarray]
    denominators: list[int]
    densities: Optional[Densities] = field(default=None, repr=False)

    def mass(self, depth: int, index: int) -> Fraction:
        return Fraction(int(self.numerators[depth][index]), self.denominators[depth])

    def total(self, depth: int) -> Fraction:
        return Fraction(int(sum(self.numerators[depth].tolist())), self.denominators[depth])

    def masses(self, depth: int) -> list[Fraction]:
        d = self.denominators[depth]
        return [Fraction(int(v), d) for v in self.numerators[depth]]

    def int_masses(self, depth: int) -> np.ndarray:
        """Numerators as int64 when they fit, else as Python ints."""
        arr = self.numerators[depth]
        if max(arr.tolist()) < 2**62:
            return arr.astype(np.int64)
        return arr

    def prefix(self, depth: int) -> list[int]:
        """Cumulative numerators, starting with 0."""
        out = [0]
        for v in self.numerators[depth].tolist():
            out.append(out[-1] + v)
        return out


def _child_weights(step: SuitableStep, grid: RegularGrid, depth: int, index: int) -> list[Fraction]:
    """Value of ``step`` on each child, divided by the arity."""
    lo, hi = grid.interval(depth - 1, index)
    if step.lo != lo or step.hi != hi:
        raise ValueError(f"density host [{step.lo}, {step.hi}] is not interval {index} of layer {depth - 1}")
    w = grid.width(depth)
    out = []
    for c in range(grid.arity):
        a, b = lo + c * w, lo + (c + 1) * w
        inside = [v for v, b1, b2 in zip(step.values, step.breaks, step.breaks[1:]) if b1 < b and b2 > a]
        if len(set(inside)) != 1:
            raise ValueError("density is not constant on a child interval")
        out.append(inside[0] / grid.arity)
    return out


def relative_step(step: SuitableStep) -> SuitableStep:
    """The same step function rescaled onto [0, 1]."""
    lo, L = step.lo, step.length
    return SuitableStep(tuple((b - lo) / L for b in step.breaks), step.values, step.delta, step.eta)


def build_measure(grid: RegularGrid, densities: Densities, depth: int, self_similar: bool = False) -> LayeredMeasure:
    """Cascade masses to the given depth; every density is checked for
    suitability and the first failure aborts with its (layer, index).

    With ``self_similar`` every density is promised to be a dilation of one
    relative step; that step is checked once, a spread of intervals per layer
    is compared against it, and the layers are built by broadcasting.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    numerators = [np.array([1], dtype=object)]
    denominators = [1]
    shape = None
    if self_similar and depth >= 1:
        first = densities(1, 0)
        cert = is_suitable(first)
        if not cert:
            raise SuitabilityError(1, 0, cert.reasons)
        shape = relative_step(first)
    checked: dict[SuitableStep, list[Fraction]] = {}
    for n in range(1, depth + 1):
        parents = numerators[-1]
        if shape is not None:
            size = len(parents)
            for i in sorted({0, size // 3, size // 2, size - 1}):
                if relative_step(densities(n, i)) != shape:
                    raise ValueError(f"density at layer {n}, interval {i} is not a dilation of the first")
            weights = _child_weights(densities(n, 0), grid, n, 0)
            scale = lcm(*(w.denominator for w in weights))
            ints = np.array([int(w * scale) for w in weights], dtype=object)
            numerators.append((parents[:, None] * ints[None, :]).reshape(-1))
            denominators.append(denominators[-1] * scale)
            continue
        groups: dict[SuitableStep, list[int]] = {}
        for i in range(len(parents)):
            step = densities(n, i)
            if step not in checked:
                cert = is_suitable(step)
                if not cert:
                    raise SuitabilityError(n, i, cert.reasons)
                checked[step] = _child_weights(step, grid, n, i)
            groups.setdefault(step, []).append(i)
        scale = lcm(*(w.denominator for st in groups for w in checked[st]))
        out = np.empty((len(parents), grid.arity), dtype=object)
        for step, idx in groups.items():
            ints = np.array([int(w * scale) for w in checked[step]], dtype=object)
            out[idx] = parents[idx][:, None] * ints[None, :]
        numerators.append(out.reshape(-1))
        denominators.append(denominators[-1] * scale)
    return LayeredMeasure(grid, depth, numerators, denominators, densities)


def mass_of(measure: LayeredMeasure, a: Fraction, b: Fraction, depth: int) -> tuple[Fraction, Fraction]:
    """Exact bounds on the mass of [a, b] from the depth-``depth`` layer.

    Whole grid intervals inside [a, b] count fully; the at most two intervals
    straddling an endpoint contribute between nothing and all of their mass.
    """
    grid = measure.grid
    a, b = Fraction(a), Fraction(b)
    if not grid.lo <= a <= b <= grid.hi:
        raise ValueError("[a, b] must lie inside the root interval")
    if depth > measure.depth:
        raise ValueError("measure not built that deep")
    w = grid.width(depth)
    first = math.floor((a - grid.lo) / w)
    last = math.ceil((b - grid.lo) / w)  # exclusive
    inner_lo = math.ceil((a - grid.lo) / w)
    inner_hi = math.floor((b - grid.lo) / w)
    pre = measure.prefix(depth)
    den = measure.denominators[depth]
    lower = Fraction(pre[inner_hi] - pre[inner_lo], den) if inner_hi > inner_lo else Fraction(0)
    upper = Fraction(pre[min(last, grid.size(depth))] - pre[max(first, 0)], den) if last > first else Fraction(0)
    return lower, upper


@dataclass(frozen=True)
class DoublingResult:
    ratio: Fraction
    pair: tuple[tuple[int, int], tuple[int, int]]
    pairs_checked: int


def _max_adjacent_ratio(nums: Sequence[int]) -> tuple[Fraction, int]:
    """Largest m[i]/m[i+1] or m[i+1]/m[i] over consecutive entries; returns
    the ratio and the left index of an attaining pair."""
    best, arg = Fraction(0), -1
    for i, (x, y) in enumerate(zip(nums, nums[1:])):
        if y == 0 or x == 0:
            raise ZeroDivisionError("zero mass on a grid interval")
        r = Fraction(x, y) if x >= y else Fraction(y, x)
        if r > best:
            best, arg = r, i
    return best, arg


def doubling_scan(measure: LayeredMeasure, depth: int, pair_source: str = "aligned") -> DoublingResult:
    """Maximum mass ratio over adjacent equal-length pairs.

    ``aligned``: pairs of neighbouring grid intervals of one layer, for every
    layer 1..depth, wrapping around the circle.  ``shifted``: pairs
    [x, x+t], [x+t, x+2t] with x and t multiples of the depth-``depth`` width.
    """
    if depth > measure.depth:
        raise ValueError("measure not built that deep")
    best, where, count = Fraction(0), ((0, 0), (0, 0)), 0
    if pair_source == "aligned":
        for d in range(1, depth + 1):
            nums = measure.numerators[d].tolist()
            circ = nums + nums[:1]
            r, i = _max_adjacent_ratio(circ)
            count += len(nums)
            if r > best:
                best, where = r, ((d, i), (d, (i + 1) % len(nums)))
        return DoublingResult(best, where, count)
    if pair_source == "shifted":
        pre = measure.prefix(depth)
        size = measure.grid.size(depth)
        total = pre[-1]
        ext = pre + [total + v for v in pre[1:]]
        arr = np.array(ext, dtype=object) if total >= 2**40 else np.array(ext, dtype=np.int64)
        for t in range(1, size // 2 + 1):
            x = np.arange(size)
            m1 = arr[x + t] - arr[x]
            m2 = arr[x + 2 * t] - arr[x + t]
            hi = np.maximum(m1, m2)
            lo = np.minimum(m1, m2)
            ratios = hi.astype(float) / lo.astype(float)
            i = int(np.argmax(ratios))
            r = Fraction(int(hi[i]), int(lo[i]))
            count += size
            if r > best:
                best, where = r, ((depth, i), (depth, t))
        return DoublingResult(best, where, count)
    raise ValueError(f"unknown pair source {pair_source!r}")


# ---------------------------------------------------------------------------
# the five-interval model

FIVE_ARY_VALUES = (Fraction(1), Fraction(1, 2), Fraction(2), Fraction(1, 2), Fraction(1))


def five_ary_step(depth: int, index: int) -> SuitableStep:
    grid = RegularGrid(5)
    lo, _ = grid.interval(depth - 1, index)
    w = grid.width(depth)
    return SuitableStep(tuple(lo + k * w for k in range(6)), FIVE_ARY_VALUES, Fraction(1, 2), Fraction(1, 5))


@dataclass(frozen=True)
class Cascade:
    """Grid plus densities, queried lazily; ``probabilities`` gives the
    conditional child masses of interval ``index`` of layer ``depth - 1``."""

    grid: RegularGrid
    densities: Densities
    self_similar: bool = False

    def probabilities(self, depth: int, index: int) -> tuple[Fraction, ...]:
        return tuple(_child_weights(self.densities(depth, index), self.grid, depth, index))


def model_five_ary(depth: int) -> tuple[RegularGrid, Densities]:
    """The five-interval cascade on [0, 1]: every interval is split into fifths
    with values 1, 1/2, 2, 1/2, 1."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    return RegularGrid(5), five_ary_step


def lebesgue_densities(grid: RegularGrid) -> Densities:
    def step(depth: int, index: int) -> SuitableStep:
        lo, hi = grid.interval(depth - 1, index)
        return SuitableStep.constant(lo, hi)

    return step


def five_ary_cascade() -> Cascade:
    return Cascade(RegularGrid(5), five_ary_step, self_similar=True)


def lebesgue_cascade(arity: int = 5) -> Cascade:
    grid = RegularGrid(arity)
    return Cascade(grid, lebesgue_densities(grid), self_similar=True)


def entropy_dimension(probs: Sequence[Fraction], arity: int) -> float:
    """Dimension of a self-similar cascade measure: H(p) / log(arity)."""
    return -sum(float(p) * math.log(float(p)) for p in probs if p) / math.log(arity)


@dataclass(frozen=True)
class DimensionEstimate:
    mean: float
    std: float
    stderr: float
    samples: int
    depth: int


def local_dimension_estimate(cascade: Cascade, depth: int, sample_count: int, seed: int) -> DimensionEstimate:
    """Mean of log mu(I_d(x)) / log |I_d(x)| over points x drawn from mu.

    Each sample descends the grid choosing children by their conditional mass;
    sample i uses its own generator seeded by (seed, i).
    """
    if depth < 1 or sample_count < 1:
        raise ValueError("depth and sample_count must be positive")
    arity = cascade.grid.arity
    log_width = depth * math.log(1 / arity) + math.log(float(cascade.grid.hi - cascade.grid.lo))
    probs_cache: dict[tuple[int, int], np.ndarray] = {}

    def probs(n: int, i: int) -> np.ndarray:
        key = (n, i)
        if key not in probs_cache:
            probs_cache[key] = np.array([float(p) for p in cascade.probabilities(n, i)])
        return probs_cache[key]

    uniform = np.array([float(p) for p in cascade.probabilities(1, 0)]) if cascade.self_similar else None
    values = np.empty(sample_count)
    for s in range(sample_count):
        rng = np.random.default_rng([seed, s])
        if uniform is not None:
            digits = rng.choice(arity, size=depth, p=uniform)
            logm = float(np.log(uniform[digits]).sum())
        else:
            idx, logm = 0, 0.0
            for n in range(1, depth + 1):
                p = probs(n, idx)
                c = int(rng.choice(arity, p=p))
                logm += math.log(p[c])
                idx = idx * arity + c
        values[s] = logm / log_width
    std = float(values.std(ddof=1)) if sample_count > 1 else 0.0
    return DimensionEstimate(float(values.mean()), std, std / math.sqrt(sample_count), sample_count, depth)


def flat_run_bound(eta: Fraction) -> float:
    """log(eta) / log(1 - 2 eta); unbounded once the flat ends cover everything."""
    if 2 * eta >= 1:
        return math.inf
    return math.log(eta) / math.log(1 - 2 * eta)


@dataclass(frozen=True)
class FlatRunReport:
    max_count: int
    bound: float
    eta: Fraction
    pairs_checked: int
    worst_pair: Optional[tuple[int, int, int]]

    @property
    def ok(self) -> bool:
        return self.max_count <= self.bound


def _layer_values(measure: LayeredMeasure, n: int, depth: int, index: int) -> set[Fraction]:
    """Values F_n takes on interval ``index`` of layer ``depth``."""
    grid = measure.grid
    if n <= depth:
        anc = index // grid.arity ** (depth - n)
        lo, _ = grid.interval(n, anc)
        step = measure.densities(n, anc // grid.arity)
        return {step.value_at(lo)}
    out: set[Fraction] = set()
    span = grid.arity ** (n - 1 - depth)
    for p in range(index * span, (index + 1) * span):
        out.update(measure.densities(n, p).values)
    return out


def flat_run_bound_check(measure: LayeredMeasure, pairs: Optional[Iterator[tuple[int, int, int]]] = None, depth: Optional[int] = None) -> FlatRunReport:
    """For adjacent equal pairs (J, K), count the layers after the first one
    that separates them on which F_n is constant on K but not equal to 1.

    ``pairs`` yields (layer, i, i+1); by default every neighbouring pair of
    every layer up to ``depth``.
    """
    if measure.densities is None:
        raise ValueError("measure carries no densities")
    depth = measure.depth if depth is None else depth
    if pairs is None:
        pairs = ((d, i, i + 1) for d in range(1, depth + 1) for i in range(measure.grid.size(d) - 1))
    eta = min(measure.densities(n, 0).eta for n in range(1, depth + 1))
    bound = flat_run_bound(eta)
    worst, worst_pair, checked = 0, None, 0
    for d, i, k in pairs:
        checked += 1
        m = None
        for n in range(1, measure.depth + 1):
            if len(_layer_values(measure, n, d, i) | _layer_values(measure, n, d, k)) > 1:
                m = n
                break
        if m is None:
            continue
        count = 0
        for n in range(m + 1, measure.depth + 1):
            vals = _layer_values(measure, n, d, k)
            if len(vals) == 1 and vals != {Fraction(1)}:
                count += 1
        if count > worst:
            worst, worst_pair = count, (d, i, k)
    return FlatRunReport(worst, bound, eta, checked, worst_pair)


@lru_cache(maxsize=None)
def five_ary_measure(depth: int) -> LayeredMeasure:
    grid, dens = model_five_ary(depth)
    return build_measure(grid, dens, depth, self_similar=True)


def measure_rows(measure: LayeredMeasure, max_depth: Optional[int] = None) -> Iterator[tuple[int, Fraction, Fraction, int, int]]:
    """(depth, lo, hi, mass numerator, mass denominator) for every grid interval."""
    top = measure.depth if max_depth is None else max_depth
    for d in range(top + 1):
        for i, v in enumerate(measure.numerators[d].tolist()):
            m = Fraction(int(v), measure.denominators[d])
            lo, hi = measure.grid.interval(d, i)
            yield d, lo, hi, m.numerator, m.denominator
