"""The random walk on the chart grid and its statistics.

A particle at vertex J jumps to child J' with probability mu(arc J')/mu(arc J).
X_i is the log3 ratio of nominal lengths for each jump, and 1 once the particle
has reached an infinity vertex; S_k is the running sum.

Sampling is exact in distribution: a zone is drawn by its probability, then a
child inside the zone's tip piece is drawn by Euclidean length (which is the
arc length under affine charts).  Under the inversion chart the draw is
corrected by rejection using the chart derivative, which is bracketed exactly
on each piece.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import count
from typing import Iterable, Optional, Union

import numpy as np

from .cantor import CENTRAL, INFINITY, STANDARD, WhitneyInterval, central, pow3, standard
from .chartgrid import (
    AffineChart,
    GridNode,
    Params,
    Pending,
    _refined_zones,
    expand,
    layout,
    open_pending,
    pending_of,
    root_node,
    vertex_moments,
)
from .kahane import FIVE_ARY_VALUES, five_ary_measure
from .leaves import ChildPiece, ConsPiece, GapPiece, Piece, TailPiece

TAIL = "tail"


# ---------------------------------------------------------------------------
# exact jump law


def jump_probabilities(node: GridNode, params: Params, size_floor: Fraction) -> list[tuple[Union[GridNode, str], Fraction]]:
    """Children of Euclidean length >= size_floor with exact probabilities;
    the rest is one pseudo-child ``"tail"`` carrying the remaining mass."""
    ex = expand(node, params, size_floor)
    A = node.arc_length
    out: list[tuple[Union[GridNode, str], Fraction]] = [(c, c.value * c.arc_length / A) for c in ex.children]
    out.append((TAIL, ex.remainder_probability))
    return out


def x_increment(source: WhitneyInterval, target: WhitneyInterval, already_hit: bool = False) -> int:
    """log3 of the nominal-length ratio target/source, or 1 after a hit."""
    if already_hit:
        return 1
    return target.log3_nominal - source.log3_nominal


# ---------------------------------------------------------------------------
# sampler


@dataclass(frozen=True)
class ZoneSampler:
    pieces: tuple[Piece, ...]
    cumulative: np.ndarray
    # (c, rho-scale) for inversion charts; None for affine
    center: Optional[float]
    near: tuple[float, ...]


def _float_center_offset(lo: Fraction, c: Fraction) -> float:
    return float(lo - c)


@lru_cache(maxsize=65536)
def zone_sampler(owner: WhitneyInterval, params: Params) -> ZoneSampler:
    lay = layout(owner, params)
    if isinstance(lay.chart, AffineChart):
        zones = list(lay.zones)
        center = None
    else:
        # split pieces until the chart derivative varies by at most 2x
        zones = _refined_zones(lay, Fraction(1), 100000)
        center = lay.chart.center
    probs = [z.probability for z in zones]
    total = sum(probs, Fraction(0))
    if total != 1:
        raise AssertionError(f"zone probabilities of {owner} sum to {total}")
    acc = np.cumsum([float(p) for p in probs])
    acc[-1] = 1.0
    near = []
    for z in zones:
        if center is None or isinstance(z.piece, ChildPiece):
            near.append(0.0)
        else:
            e = z.piece.extent()
            near.append(float(min(abs(e.lo - center), abs(e.hi - center))))
    return ZoneSampler(tuple(z.piece for z in zones), acc, center, tuple(near))


def _geometric(rng: np.random.Generator) -> int:
    """k >= 0 with P(k) = (2/3)(1/3)**k."""
    return int(rng.geometric(2 / 3)) - 1


def descend(piece: Piece, rng: np.random.Generator, N: int) -> WhitneyInterval:
    """A child of ``piece`` drawn with probability proportional to its length."""
    while True:
        if isinstance(piece, ChildPiece):
            return piece.child
        if isinstance(piece, TailPiece):
            return standard(piece.gap, piece.sign * (piece.start + _geometric(rng)), N)
        if isinstance(piece, ConsPiece):
            piece = piece.expand()[int(rng.integers(3))]
            continue
        if isinstance(piece, GapPiece):
            if not piece.gap.bounded:
                raise ValueError("the unbounded gap has infinite length")
            if rng.random() < 1 - 3.0**-N:
                return central(piece.gap, N)
            sign = 1 if rng.random() < 0.5 else -1
            return standard(piece.gap, sign * (N + 1 + _geometric(rng)), N)
        raise TypeError(f"unknown piece {piece!r}")


def sample_child(owner: WhitneyInterval, params: Params, rng: np.random.Generator) -> WhitneyInterval:
    zs = zone_sampler(owner, params)
    i = int(np.searchsorted(zs.cumulative, rng.random(), side="right"))
    i = min(i, len(zs.pieces) - 1)
    piece = zs.pieces[i]
    if zs.center is None or isinstance(piece, ChildPiece):
        return descend(piece, rng, params.N)
    near = zs.near[i]
    while True:
        w = descend(piece, rng, params.N)
        g = w.geometry
        d = _float_center_offset(g.lo, zs.center) + rng.random() * float(g.hi - g.lo)
        if rng.random() * d * d <= near * near:
            return w


# ---------------------------------------------------------------------------
# simulation


def classify(w: WhitneyInterval) -> str:
    return w.kind


@dataclass
class ClassStats:
    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, x: float) -> None:
        self.count += 1
        self.total += x
        self.total_sq += x * x

    def merge(self, other: "ClassStats") -> None:
        self.count += other.count
        self.total += other.total
        self.total_sq += other.total_sq

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else math.nan

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return math.inf
        var = (self.total_sq - self.count * self.mean**2) / (self.count - 1)
        return math.sqrt(max(var, 0.0) / self.count)


@dataclass
class WalkStats:
    paths: int
    max_steps: int
    seed: int
    hits: int
    hit_steps: np.ndarray
    mean_sk_over_k: np.ndarray
    var_sk_over_k: np.ndarray
    per_class: dict[str, ClassStats]
    per_vertex: dict[WhitneyInterval, ClassStats] = field(repr=False, default_factory=dict)

    @property
    def hit_fraction(self) -> float:
        return self.hits / self.paths

    def summary(self) -> dict:
        return {
            "paths": self.paths,
            "max_steps": self.max_steps,
            "seed": self.seed,
            "hit_fraction": self.hit_fraction,
            "mean_hit_step": float(self.hit_steps[self.hit_steps >= 0].mean()) if self.hits else None,
            "min_mean_sk_over_k_50_300": float(self.mean_sk_over_k[50:].min()) if self.max_steps >= 50 else None,
            "per_class": {k: {"count": v.count, "mean": v.mean, "stderr": v.stderr} for k, v in self.per_class.items()},
        }


@dataclass
class Trajectory:
    path: int
    kinds: list[str]
    increments: list[int]


def run_path(
    start: WhitneyInterval,
    params: Params,
    max_steps: int,
    rng: np.random.Generator,
    stop_at_infinity: bool = True,
    start_counts: bool = False,
) -> tuple[list[int], list[WhitneyInterval], int]:
    """Increments X_1..X_max_steps, the vertices visited before each jump, and
    the step at which an infinity vertex was first reached (-1 if never).
    An infinity start is a hit at step 0 only when ``start_counts``."""
    xs: list[int] = []
    visited: list[WhitneyInterval] = []
    hit_step = 0 if start.kind == INFINITY and start_counts else -1
    here = start
    for k in range(1, max_steps + 1):
        if hit_step >= 0:
            if stop_at_infinity:
                xs.extend([1] * (max_steps - k + 1))
                break
            visited.append(here)
            here = sample_child(here, params, rng)
            xs.append(1)
            continue
        visited.append(here)
        nxt = sample_child(here, params, rng)
        xs.append(x_increment(here, nxt))
        here = nxt
        if here.kind == INFINITY:
            hit_step = k
    return xs, visited, hit_step


def path_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([seed, i])


def simulate(
    start: Optional[GridNode],
    params: Params,
    paths: int,
    max_steps: int = 300,
    stop_at_infinity: bool = True,
    seed: int = 0,
    track_vertices: bool = False,
    trajectories: Optional[list] = None,
) -> WalkStats:
    """Run ``paths`` independent walks; path i uses the stream (seed, i)."""
    if paths < 1:
        raise ValueError("paths must be at least 1")
    node = start or root_node(params)
    origin = node.whitney
    # the root is where every walk begins, not a hit
    start_counts = node.depth > 0
    sums = np.zeros(max_steps + 1)
    sums_sq = np.zeros(max_steps + 1)
    ks = np.arange(max_steps + 1, dtype=float)
    ks[0] = 1.0
    per_class: dict[str, ClassStats] = {}
    per_vertex: dict[WhitneyInterval, ClassStats] = {}
    hit_steps = np.full(paths, -1, dtype=np.int64)
    for i in range(paths):
        xs, visited, hit = run_path(origin, params, max_steps, path_rng(seed, i), stop_at_infinity, start_counts)
        hit_steps[i] = hit
        s = np.concatenate([[0], np.cumsum(xs)]) / ks
        sums += s
        sums_sq += s * s
        for k, (v, x) in enumerate(zip(visited, xs), start=1):
            if hit >= 0 and k > hit:
                break
            per_class.setdefault(classify(v), ClassStats()).add(x)
            if track_vertices:
                per_vertex.setdefault(v, ClassStats()).add(x)
        if trajectories is not None:
            kinds = [v.kind for v in visited]
            trajectories.append(Trajectory(i, kinds, xs))
    mean = sums / paths
    var = sums_sq / paths - mean**2
    return WalkStats(paths, max_steps, seed, int((hit_steps >= 0).sum()), hit_steps, mean, var, per_class, per_vertex)


def write_trajectories(path, trajectories: Iterable[Trajectory]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["path", "step", "node_kind", "x", "s"])
        for t in trajectories:
            s = 0
            for k, x in enumerate(t.increments, start=1):
                s += x
                kind = t.kinds[k - 1] if k - 1 < len(t.kinds) else INFINITY
                out.writerow([t.path, k, kind, x, s])


# ---------------------------------------------------------------------------
# per-class expectation check


@dataclass(frozen=True)
class ClassCheck:
    name: str
    count: int
    empirical: float
    stderr: float
    exact_lo: float
    exact_hi: float

    @property
    def z_score(self) -> float:
        if self.exact_lo <= self.empirical <= self.exact_hi:
            return 0.0
        gap = self.exact_lo - self.empirical if self.empirical < self.exact_lo else self.empirical - self.exact_hi
        return gap / self.stderr if self.stderr > 0 else math.inf

    @property
    def ok(self) -> bool:
        return self.z_score <= 4


def class_checks(stats: WalkStats, params: Params, central_budget: int = 200) -> list[ClassCheck]:
    """Empirical mean increments per vertex class against the exact values.

    Central vertices differ from gap to gap, so their expected value is the
    visit-weighted average of the per-vertex enclosures, computed for the
    ``central_budget`` most visited central vertices (requires
    ``track_vertices``)."""
    out = []
    for name, cs in sorted(stats.per_class.items()):
        if name == CENTRAL:
            continue
        if name == STANDARD:
            w = standard(_unit_gap(), params.N + 1, params.N)
        else:
            w = root_node(params).whitney
        m = vertex_moments(w, params).first
        out.append(ClassCheck(name, cs.count, cs.mean, cs.stderr, float(m.lo), float(m.hi)))
    if stats.per_vertex:
        top = sorted(
            ((v, cs) for v, cs in stats.per_vertex.items() if v.kind == CENTRAL),
            key=lambda t: (-t[1].count, t[0].key()),
        )[:central_budget]
        agg = ClassStats()
        lo = hi = 0.0
        for v, cs in top:
            agg.merge(cs)
            m = vertex_moments(v, params, Fraction(1, 20), 2000).first
            lo += cs.count * float(m.lo)
            hi += cs.count * float(m.hi)
        if agg.count:
            out.append(ClassCheck("central", agg.count, agg.mean, agg.stderr, lo / agg.count, hi / agg.count))
    return out


def _unit_gap():
    from .cantor import Gap

    return Gap(1, 1)


# ---------------------------------------------------------------------------
# hitting measure


@dataclass(frozen=True)
class HittingReport:
    cells: int
    max_relative_deviation: float
    max_z: float


def hitting_measure_check_five_ary(paths: int, depth: int, seed: int) -> HittingReport:
    """Landing frequencies of the 5-ary walk in depth-d cells against their
    exact masses."""
    rng = np.random.default_rng(seed)
    p = np.array([float(v) / 5 for v in FIVE_ARY_VALUES])
    digits = rng.choice(5, size=(paths, depth), p=p) if depth else np.zeros((paths, 0), dtype=int)
    cells = np.zeros(paths, dtype=np.int64)
    for d in range(depth):
        cells = cells * 5 + digits[:, d]
    freq = np.bincount(cells, minlength=5**depth) / paths
    masses = np.array([float(m) for m in five_ary_measure(depth).masses(depth)]) if depth else np.array([1.0])
    return _compare(freq, masses, paths)


def _compare(freq: np.ndarray, masses: np.ndarray, paths: int) -> HittingReport:
    keep = masses * paths >= 10
    se = np.sqrt(masses * (1 - masses) / paths)
    dev = np.abs(freq - masses)
    rel = dev[keep] / masses[keep]
    z = np.where(se[keep] > 0, dev[keep] / np.where(se[keep] > 0, se[keep], 1), 0.0)
    return HittingReport(int(keep.sum()), float(rel.max()), float(z.max()))


def hitting_measure_check(
    start: Optional[GridNode], params: Params, paths: int, depth: int, seed: int, size_floor: Fraction = Fraction(1, 3**14)
) -> HittingReport:
    """Walk ``depth`` steps from ``start``; compare how often each depth-d
    vertex is reached against its exact mass.  Vertices below the size floor
    are pooled into the exact complementary mass."""
    origin = start or root_node(params)
    counts: dict[tuple, int] = {}
    for i in range(paths):
        rng = path_rng(seed, i)
        here = origin.whitney
        trail = []
        for _ in range(depth):
            here = sample_child(here, params, rng)
            trail.append(here)
        counts[tuple(trail)] = counts.get(tuple(trail), 0) + 1
    masses: dict[tuple, Fraction] = {(): origin.mass}
    frontier = [((), origin)]
    for _ in range(depth):
        nxt = []
        for trail, node in frontier:
            for child in expand(node, params, size_floor).children:
                if child.mass * paths >= 10 * origin.mass:
                    t = trail + (child.whitney,)
                    masses[t] = child.mass
                    nxt.append((t, child))
        frontier = nxt
    keys = [t for t, _ in frontier]
    freq = np.array([counts.get(t, 0) / paths for t in keys])
    mass = np.array([float(masses[t] / origin.mass) for t in keys])
    return _compare(freq, mass, paths)


# ---------------------------------------------------------------------------
# support masses


@dataclass(frozen=True)
class SupportRow:
    depth: int
    mu_lower: Fraction
    mu_upper: Fraction
    lebesgue: Fraction
    nu: Fraction

    def as_dict(self) -> dict:
        return {
            "depth": self.depth,
            "mu_lower": str(self.mu_lower),
            "mu_upper": str(self.mu_upper),
            "lebesgue": str(self.lebesgue),
            "nu": str(self.nu),
        }


def support_mass(
    max_depth: int,
    params: Params,
    lam: Fraction = Fraction(1, 2),
    mass_floor: Fraction = Fraction(1, 10**4),
    budget: int = 200000,
) -> list[SupportRow]:
    """Exact masses of S_d, the union of maximal infinity vertices (other than
    the root) of depth <= d.

    Vertices and unexpanded tip pieces are explored largest mass first; the
    mass still unexplored when the search stops bounds what is missing, so
    mu(S_d) lies in [found(d), found(d) + unexplored].  ``lebesgue`` and ``nu``
    are computed from the vertices found.
    """
    root = root_node(params)
    tick = count()
    heap: list = []

    def push(item: Union[GridNode, Pending]) -> None:
        heapq.heappush(heap, (-float(item.mass), next(tick), item))

    for p in pending_of(root, params):
        push(p)
    found: dict[int, tuple[Fraction, Fraction]] = {}
    steps = 0
    while heap and steps < budget:
        negm, _, item = heap[0]
        if -negm < float(mass_floor):
            break
        heapq.heappop(heap)
        steps += 1
        if isinstance(item, Pending):
            for sub in open_pending(item, params):
                push(sub)
            continue
        if item.kind == INFINITY:
            m, a = found.get(item.depth, (Fraction(0), Fraction(0)))
            found[item.depth] = (m + item.mass, a + item.arc_length)
            continue
        if item.depth < max_depth:
            for p in pending_of(item, params):
                push(p)
    unexplored = sum((it.mass for _, _, it in heap if not (isinstance(it, GridNode) and it.kind == INFINITY)), Fraction(0))
    for _, _, it in heap:
        if isinstance(it, GridNode) and it.kind == INFINITY:
            m, a = found.get(it.depth, (Fraction(0), Fraction(0)))
            found[it.depth] = (m + it.mass, a + it.arc_length)
    rows = []
    mu = leb = Fraction(0)
    for d in range(1, max_depth + 1):
        m, a = found.get(d, (Fraction(0), Fraction(0)))
        mu += m
        leb += a
        rows.append(SupportRow(d, mu, min(Fraction(1), mu + unexplored), leb, lam * mu + (1 - lam) * leb))
    return rows


def first_depth_reaching(rows: list[SupportRow], level: Fraction) -> Optional[SupportRow]:
    for r in rows:
        if r.mu_lower >= level:
            return r
    return None
