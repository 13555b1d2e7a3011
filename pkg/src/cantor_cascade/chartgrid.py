"""The Whitney-tree grid on the unit circle.

Each vertex is a Whitney interval J.  Its tip E_J is carried onto the vertex's
arc by a chart: affine for the bounded tips (reflected for tips lying to the
left of their owner, so every standard vertex looks the same), and
``w -> 1/(w - c)`` followed by an affine map for the cofinite tips of central
intervals.  Children of a vertex are the Whitney intervals inside its tip;
their arcs are the chart images.

A vertex's density is described by *zones*: tip pieces (see ``leaves``) on
which the density is constant, listed in arc order.  All zone data is computed
on a normalised arc [0, 1] and rescaled per vertex, since both chart families
commute with affine changes of the arc.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterator, Optional, Union

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
    infinity_interval,
    pow3,
    standard,
)
from .kahane import SuitableStep, is_suitable
from .leaves import (
    ChildPiece,
    ConsPiece,
    GapPiece,
    PalmTip,
    Piece,
    TailPiece,
    band_reach,
    central_side_pieces,
    enumerate_children_of_size,
    iter_children,
    tip,
)

DEFAULT_N = 6
DEFAULT_Q = 8
DEFAULT_EPS = Fraction(1, 20)


class ParamsError(ValueError):
    def __init__(self, invariant: str, detail: str):
        super().__init__(f"{invariant}: {detail}")
        self.invariant = invariant


@dataclass(frozen=True)
class Params:
    N: int = DEFAULT_N
    Q: int = DEFAULT_Q
    eps: Fraction = DEFAULT_EPS

    def __post_init__(self) -> None:
        object.__setattr__(self, "eps", Fraction(self.eps))
        if self.N < 2:
            raise ParamsError("N >= 2", f"got N={self.N}")
        if self.Q < 1:
            raise ParamsError("Q >= 1", f"got Q={self.Q}")
        if not 0 < self.eps < 1:
            raise ParamsError("0 < eps < 1", f"got eps={self.eps}")
        if not 1 - self.eps > (1 - pow3(-self.N)) / 2:
            raise ParamsError("(1 - eps) > (1 - 3^-N)/2", f"fails for N={self.N}, eps={self.eps}")
        if Fraction(5, 4) * pow3(-self.Q - self.N) > self.eps / 2:
            raise ParamsError("(5/4) 3^(-Q-N) <= eps/2", f"fails for N={self.N}, Q={self.Q}, eps={self.eps}")

    @property
    def whitney(self) -> WhitneyParams:
        return WhitneyParams(self.N)

    @property
    def K(self) -> int:
        return self.Q + self.N


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class AffineChart:
    """[lo, hi] onto the arc [u, u + length]; ``reflect`` sends hi to u."""

    lo: Fraction
    hi: Fraction
    u: Fraction = Fraction(0)
    length: Fraction = Fraction(1)
    reflect: bool = False

    @property
    def scale(self) -> Fraction:
        return self.length / (self.hi - self.lo)

    def point(self, w: Fraction) -> Fraction:
        t = self.hi - w if self.reflect else w - self.lo
        return self.u + self.scale * t

    def arc(self, geom: Geometry) -> tuple[Fraction, Fraction]:
        if isinstance(geom, CofiniteInterval):
            raise ValueError("affine charts only carry bounded sets")
        y0, y1 = self.point(geom.lo), self.point(geom.hi)
        return (y1, y0) if self.reflect else (y0, y1)

    def arc_length(self, geom: RInterval) -> Fraction:
        return self.scale * geom.length

    def derivative_range(self, geom: RInterval) -> tuple[Fraction, Fraction]:
        return self.scale, self.scale

    def derivative(self, w: float) -> float:
        return float(self.scale)

    def moved(self, u: Fraction, length: Fraction) -> "AffineChart":
        return AffineChart(self.lo, self.hi, u, length, self.reflect)


@dataclass(frozen=True)
class InversionChart:
    """Cofinite tip R u {inf} minus (c - rho, c + rho) onto [u, u + length]:
    w -> u + length * (1 - rho / (w - c)) / 2.  The point c + rho goes to u,
    infinity to the midpoint, c - rho to the far end."""

    center: Fraction
    rho: Fraction
    u: Fraction = Fraction(0)
    length: Fraction = Fraction(1)

    def point(self, w: Optional[Fraction]) -> Fraction:
        if w is None:
            return self.u + self.length / 2
        return self.u + self.length * (1 - self.rho / (w - self.center)) / 2

    def arc(self, geom: Geometry) -> tuple[Fraction, Fraction]:
        if isinstance(geom, CofiniteInterval):
            return self.point(geom.excluded.hi), self.point(geom.excluded.lo)
        return self.point(geom.lo), self.point(geom.hi)

    def arc_length(self, geom: Geometry) -> Fraction:
        y0, y1 = self.arc(geom)
        return y1 - y0

    def derivative_range(self, geom: RInterval) -> tuple[Fraction, Fraction]:
        k = self.length * self.rho / 2
        d1, d2 = abs(geom.lo - self.center), abs(geom.hi - self.center)
        near, far = min(d1, d2), max(d1, d2)
        return k / far**2, k / near**2

    def derivative(self, w: float) -> float:
        return float(self.length * self.rho / 2) / (w - float(self.center)) ** 2

    def moved(self, u: Fraction, length: Fraction) -> "InversionChart":
        return InversionChart(self.center, self.rho, u, length)


Chart = Union[AffineChart, InversionChart]


def normalized_chart(t: PalmTip) -> Chart:
    """Chart of a tip onto the arc [0, 1]."""
    if t.owner.kind == STANDARD:
        return AffineChart(t.geometry.lo, t.geometry.hi, reflect=not t.gap_first)
    if t.owner.kind == INFINITY:
        return AffineChart(t.geometry.lo, t.geometry.hi)
    gap = t.owner.gap
    return InversionChart((gap.lo + gap.hi) / 2, Fraction(3, 2) * gap.length)


def _extent(piece: Piece) -> Geometry:
    if isinstance(piece, ChildPiece):
        return piece.child.geometry
    return piece.extent()


# ---------------------------------------------------------------------------
# zones


@dataclass(frozen=True)
class Zone:
    """A tip piece with constant density, with its arc on the normalised arc."""

    piece: Piece
    value: Fraction
    arc: tuple[Fraction, Fraction]
    label: str
    band: int = 0

    @property
    def arc_length(self) -> Fraction:
        return self.arc[1] - self.arc[0]

    @property
    def probability(self) -> Fraction:
        return self.value * self.arc_length


@dataclass(frozen=True)
class BandInfo:
    j: int
    total: Fraction
    big: Fraction
    flat: Fraction
    big_value: Fraction
    low_value: Fraction
    fallback: bool
    big_log3: tuple[int, ...]


@dataclass(frozen=True)
class Layout:
    owner: WhitneyInterval
    tip: PalmTip
    chart: Chart
    zones: tuple[Zone, ...]
    bands: tuple[BandInfo, ...] = ()

    def density(self) -> SuitableStep:
        """Density on the normalised arc, with the delta and eta it witnesses."""
        breaks = [Fraction(0)]
        values = []
        for z in self.zones:
            if z.arc[0] != breaks[-1]:
                raise AssertionError("zones do not tile the arc")
            breaks.append(z.arc[1])
            values.append(z.value)
        raw = SuitableStep(tuple(breaks), tuple(values), Fraction(1), Fraction(1, 2)).merged()
        cert = is_suitable(SuitableStep(raw.breaks, raw.values, Fraction(1), Fraction(1)))
        return SuitableStep(raw.breaks, raw.values, cert.delta_witness, cert.eta_witness)

    def by_label(self, prefix: str) -> list[Zone]:
        return [z for z in self.zones if z.label == prefix or z.label.startswith(prefix + ":")]


def _zones_in_order(chart: Chart, items: list[tuple[Piece, Fraction, str, int]]) -> tuple[Zone, ...]:
    out = []
    for piece, value, label, band in items:
        y0, y1 = chart.arc(_extent(piece))
        out.append(Zone(piece, value, (y0, y1), label, band))
    return tuple(out)


def _standard_items(t: PalmTip, params: Params) -> list[tuple[Piece, str]]:
    N, K = params.N, params.K
    g = t.tip_gap
    away, toward = (-1, 1) if t.gap_first else (1, -1)
    items: list[tuple[Piece, str]] = [(TailPiece(g, away, K, N), "S1")]
    items += [(ChildPiece(standard(g, away * n, N)), "S2") for n in range(K - 1, N, -1)]
    items.append((ChildPiece(central(g, N)), "S3"))
    items.append((TailPiece(g, toward, N + 1, N), "S4"))
    cons = ConsPiece(g.level, g.index + 1 if t.gap_first else g.index - 1, N)
    for _ in range(K):
        c0, mid, c2 = cons.expand()
        near, far = (c0, c2) if t.gap_first else (c2, c0)
        items += [(near, "S4"), (mid, "S4")]
        cons = far
    items.append((cons, "S5"))
    return items


def _standard_layout(t: PalmTip, params: Params) -> Layout:
    chart = normalized_chart(t)
    items = _standard_items(t, params)
    arcs = {}
    for piece, label in items:
        arcs[label] = arcs.get(label, Fraction(0)) + chart.arc_length(_extent(piece))
    # S_2 is empty when Q = 1
    r3 = arcs["S3"]
    flat = arcs["S1"] + arcs["S5"]
    rest = arcs.get("S2", Fraction(0)) + arcs["S4"]
    delta = (params.eps - flat) / rest
    if delta <= 0:
        raise ParamsError("(5/4) 3^(-Q-N) <= eps/2", "flat ends leave no mass for the rest")
    value = {"S1": Fraction(1), "S5": Fraction(1), "S3": (1 - params.eps) / r3, "S2": delta, "S4": delta}
    return Layout(t.owner, t, chart, _zones_in_order(chart, [(p, value[lb], lb, 0) for p, lb in items]))


def _infinity_layout(t: PalmTip) -> Layout:
    chart = normalized_chart(t)
    return Layout(t.owner, t, chart, _zones_in_order(chart, [(p, Fraction(1), "flat", 0) for p in t.pieces()]))


# central vertices ---------------------------------------------------------


def _outward(pieces: list[Piece], direction: int) -> list[Piece]:
    return pieces if direction > 0 else pieces[::-1]


def _isolate_flat_run(seq: list[Piece], direction: int, gap: Gap, params: Params) -> tuple[list[Piece], Piece]:
    """Split off the whole Whitney intervals accumulating at the edge of
    K_l u L u K_r whose total length is 3**-Q |L| / 2."""
    N, Q = params.N, params.Q
    first = seq[0]
    inner = -direction  # sign of the tail pointing back at the edge
    if isinstance(first, GapPiece):
        g = first.gap
        m = gap.level - g.level
        n0 = max(Q + 1 + m, N + 1)
        run = TailPiece(g, inner, n0, N)
        heads = [ChildPiece(standard(g, inner * n, N)) for n in range(n0 - 1, N, -1)]
        rest = [ChildPiece(central(g, N)), TailPiece(g, -inner, N + 1, N)]
        return [run] + heads + rest + seq[1:], run
    if isinstance(first, TailPiece) and not first.gap.bounded:
        n0 = max(Q + 1 + gap.level, N + 3)
        run = TailPiece(UNBOUNDED, first.sign, n0, N)
        heads = [ChildPiece(standard(UNBOUNDED, first.sign * n, N)) for n in range(n0 - 1, N + 2, -1)]
        return [run] + heads + seq[1:], run
    raise AssertionError(f"unexpected piece next to the edge: {first!r}")


def _assign_bands(seq: list[Piece], edge: Fraction, direction: int, s: Fraction, snap: Fraction) -> list[tuple[Piece, int]]:
    """Give every piece the band holding its inner end, expanding pieces that
    cross a band boundary until the crossing piece is a single Whitney
    interval (or a construction interval shorter than ``snap``)."""
    out = []
    stack = list(reversed(seq))
    j = 1
    while stack:
        p = stack.pop()
        ext = p.extent()
        din, dout = (ext.lo - edge, ext.hi - edge) if direction > 0 else (edge - ext.hi, edge - ext.lo)
        while din >= band_reach(s, j):
            j += 1
        if dout <= band_reach(s, j) or isinstance(p, ChildPiece) or (isinstance(p, ConsPiece) and ext.length <= snap):
            out.append((p, j))
            continue
        stack.extend(reversed(_outward(p.expand(), direction)))
    return out


def _refine(seq: list[Piece], direction: int, keep: frozenset, threshold: Fraction) -> list[Piece]:
    """Expand every piece (other than those in ``keep``) that may hold a child
    of Euclidean length >= threshold."""
    out = []
    stack = list(reversed(seq))
    while stack:
        p = stack.pop()
        if isinstance(p, ChildPiece) or p in keep or p.max_child_length() < threshold:
            out.append(p)
            continue
        stack.extend(reversed(_outward(p.expand(), direction)))
    return out


def _band_of_distance(s: Fraction, d: Fraction) -> int:
    j = 1
    while band_reach(s, j) < d:
        j += 1
    return j


def _central_layout(t: PalmTip, params: Params) -> Layout:
    N, eps = params.N, params.eps
    gap = t.owner.gap
    a, b, s = gap.lo, gap.hi, gap.length
    chart = normalized_chart(t)
    sigma = params.whitney.sigma
    left, right = central_side_pieces(gap, N)
    right_seq, run_r = _isolate_flat_run(right + [TailPiece(UNBOUNDED, -1, N + 3, N)], 1, gap, params)
    left_seq, run_l = _isolate_flat_run(left + [TailPiece(UNBOUNDED, 1, N + 3, N)], -1, gap, params)
    snap = s * pow3(-6)
    sides = {
        1: _assign_bands(right_seq, b + s, 1, s, snap),
        -1: _assign_bands(left_seq, a - s, -1, s, snap),
    }
    j_inf = min(_band_of_distance(s, 1 + sigma - b - s), _band_of_distance(s, a - s + sigma))
    runs = frozenset({run_l, run_r})
    inf_child = ChildPiece(infinity_interval(N))
    top = max([j for side in sides.values() for _, j in side] + [j_inf])
    bands: list[BandInfo] = []
    labelled: dict[int, dict[Piece, str]] = {1: {}, -1: {}}
    final: dict[int, list[tuple[Piece, int]]] = {1: [], -1: []}
    inf_label = ""
    inf_value = Fraction(1)
    values: dict[tuple[int, str], Fraction] = {}
    for j in range(1, top + 1):
        per_side = {d: [p for p, jj in sides[d] if jj == j] for d in (1, -1)}
        has_inf = j == j_inf
        if not per_side[1] and not per_side[-1] and not has_inf:
            continue
        nominal_big = pow3(j + 8) * s
        classes = {nominal_big, nominal_big / 3}
        for d in (1, -1):
            per_side[d] = _refine(per_side[d], d, runs, nominal_big / 3)

        def kids() -> list[Piece]:
            out = [p for d in (1, -1) for p in per_side[d] if isinstance(p, ChildPiece)]
            return out + ([inf_child] if has_inf else [])

        big = [p for p in kids() if p.child.nominal_length in classes]
        fallback = not big
        if fallback:
            while True:
                present = [p.child.nominal_length for p in kids()]
                best = max(present) if present else None
                pending = [
                    p.max_child_length()
                    for d in (1, -1)
                    for p in per_side[d]
                    if not isinstance(p, ChildPiece) and p not in runs
                ]
                if best is not None and all(m < best for m in pending):
                    break
                threshold = best if best is not None else max(pending)
                for d in (1, -1):
                    per_side[d] = _refine(per_side[d], d, runs, threshold)
            big = [p for p in kids() if p.child.nominal_length == best]
        big_set = set(big)
        arc_of = lambda p: chart.arc_length(_extent(p))  # noqa: E731
        every = [p for d in (1, -1) for p in per_side[d]] + ([inf_child] if has_inf else [])
        total = sum((arc_of(p) for p in every), Fraction(0))
        big_arc = sum((arc_of(p) for p in big_set), Fraction(0))
        flat_arc = sum((arc_of(p) for p in every if p in runs), Fraction(0))
        rest = total - big_arc - flat_arc
        if rest == 0:
            big_value = low_value = Fraction(1)
        else:
            big_value = (1 - eps) * total / big_arc
            low_value = (eps * total - flat_arc) / rest
            if low_value <= 0:
                raise ParamsError("(5/4) 3^(-Q-N) <= eps/2", f"flat runs exhaust band {j}")
        bands.append(
            BandInfo(j, total, big_arc, flat_arc, big_value, low_value, fallback,
                     tuple(sorted({-p.child.log3_nominal for p in big_set})))
        )
        for d in (1, -1):
            for p in per_side[d]:
                if p in runs:
                    lb, v = f"T{j}:I", Fraction(1)
                elif p in big_set:
                    lb, v = f"T{j}:B", big_value
                else:
                    lb, v = f"T{j}", low_value
                labelled[d][p] = lb
                values[(id(p), lb)] = v
                final[d].append((p, j))
        if has_inf:
            inf_label = f"T{j}:B" if inf_child in big_set else f"T{j}"
            inf_value = big_value if inf_child in big_set else low_value
    items = []
    for p, j in final[1]:
        lb = labelled[1][p]
        items.append((p, values[(id(p), lb)], lb, j))
    items.append((inf_child, inf_value, inf_label, j_inf))
    for p, j in reversed(final[-1]):
        lb = labelled[-1][p]
        items.append((p, values[(id(p), lb)], lb, j))
    return Layout(t.owner, t, chart, _zones_in_order(chart, items), tuple(bands))


@lru_cache(maxsize=65536)
def layout(owner: WhitneyInterval, params: Params) -> Layout:
    """Zones of the vertex owned by ``owner`` on the normalised arc."""
    t = tip(owner, params.whitney)
    if owner.kind == STANDARD:
        return _standard_layout(t, params)
    if owner.kind == INFINITY:
        return _infinity_layout(t)
    return _central_layout(t, params)


# ---------------------------------------------------------------------------
# grid vertices


@dataclass(frozen=True)
class GridNode:
    whitney: WhitneyInterval
    arc_lo: Fraction
    arc_hi: Fraction
    depth: int = 0
    value: Fraction = Fraction(1)
    cumulative: Fraction = Fraction(1)

    @property
    def kind(self) -> str:
        return self.whitney.kind

    @property
    def arc_length(self) -> Fraction:
        return self.arc_hi - self.arc_lo

    @property
    def mass(self) -> Fraction:
        return self.cumulative * self.arc_length

    def chart(self, params: Params) -> Chart:
        return layout(self.whitney, params).chart.moved(self.arc_lo, self.arc_length)

    def tip(self, params: Params) -> PalmTip:
        return layout(self.whitney, params).tip

    def child(self, w: WhitneyInterval, arc: tuple[Fraction, Fraction], value: Fraction) -> "GridNode":
        A = self.arc_length
        return GridNode(w, self.arc_lo + A * arc[0], self.arc_lo + A * arc[1], self.depth + 1, value, self.cumulative * value)


def root_node(params: Params = Params()) -> GridNode:
    """J_inf on the whole circle [0, 1)."""
    return GridNode(infinity_interval(params.N), Fraction(0), Fraction(1))


@dataclass(frozen=True)
class Expansion:
    children: tuple[GridNode, ...]
    remainder_probability: Fraction
    remainder_arc: Fraction


def expand(node: GridNode, params: Params, size_floor: Fraction) -> Expansion:
    """Children of ``node`` of Euclidean length >= size_floor (J_inf always),
    with the exact probability and arc length of those left out."""
    lay = layout(node.whitney, params)
    kids = []
    for z in lay.zones:
        for w in iter_children([z.piece], Fraction(size_floor)):
            kids.append(node.child(w, lay.chart.arc(w.geometry), z.value))
    A = node.arc_length
    prob = sum((k.value * k.arc_length for k in kids), Fraction(0)) / A
    arc = sum((k.arc_length for k in kids), Fraction(0))
    return Expansion(tuple(kids), 1 - prob, A - arc)


@dataclass(frozen=True)
class Pending:
    """Unexpanded tip piece of a vertex, with its exact mass."""

    node: GridNode
    piece: Piece
    value: Fraction
    arc: tuple[Fraction, Fraction]

    @property
    def mass(self) -> Fraction:
        return self.node.cumulative * self.value * self.node.arc_length * (self.arc[1] - self.arc[0])

    @property
    def arc_length(self) -> Fraction:
        return self.node.arc_length * (self.arc[1] - self.arc[0])


def pending_of(node: GridNode, params: Params) -> list[Pending]:
    lay = layout(node.whitney, params)
    return [Pending(node, z.piece, z.value, z.arc) for z in lay.zones]


def open_pending(p: Pending, params: Params) -> list[Union[GridNode, Pending]]:
    """One expansion step of a pending piece: a vertex or smaller pieces."""
    if isinstance(p.piece, ChildPiece):
        return [p.node.child(p.piece.child, p.arc, p.value)]
    chart = layout(p.node.whitney, params).chart
    out: list[Union[GridNode, Pending]] = []
    for sub in p.piece.expand():
        arc = chart.arc(_extent(sub))
        if isinstance(sub, ChildPiece):
            out.append(p.node.child(sub.child, arc, p.value))
        else:
            out.append(Pending(p.node, sub, p.value, arc))
    return out


# ---------------------------------------------------------------------------
# densities


def density(node: GridNode, params: Params) -> SuitableStep:
    """Density of the next layer on the vertex's arc."""
    rel = layout(node.whitney, params).density()
    u, A = node.arc_lo, node.arc_length
    return SuitableStep(tuple(u + A * b for b in rel.breaks), rel.values, rel.delta, rel.eta)


def density_standard(node: GridNode, params: Params) -> SuitableStep:
    if node.kind != STANDARD:
        raise ValueError("not a standard vertex")
    return density(node, params)


def density_central(node: GridNode, params: Params) -> SuitableStep:
    if node.kind != CENTRAL:
        raise ValueError("not a central vertex")
    return density(node, params)


def density_infinity(node: GridNode, params: Params = Params()) -> SuitableStep:
    if node.kind != INFINITY:
        raise ValueError("not an infinity vertex")
    return density(node, params)


def standard_delta(params: Params) -> Fraction:
    """Closed form of the low density value of standard vertices."""
    e = pow3(-params.K)
    return (2 * params.eps - Fraction(5, 2) * e) / (1 + pow3(-params.N) - Fraction(5, 2) * e)


@dataclass(frozen=True)
class SegmentFamily:
    S: tuple[RInterval, ...]
    R: tuple[tuple[Fraction, Fraction], ...]


def segments(node: GridNode, params: Params) -> SegmentFamily:
    """S_1..S_5 in the tip and their arcs R_1..R_5 on the vertex's arc."""
    if node.kind != STANDARD:
        raise ValueError("segments exist for standard vertices only")
    lay = layout(node.whitney, params)
    chart = node.chart(params)
    S, R = [], []
    for k in range(1, 6):
        exts = [_extent(z.piece) for z in lay.by_label(f"S{k}")]
        hull = RInterval(min(e.lo for e in exts), max(e.hi for e in exts))
        S.append(hull)
        R.append(chart.arc(hull))
    return SegmentFamily(tuple(S), tuple(R))


def band_fractions(owner: WhitneyInterval, params: Params) -> dict[int, Fraction]:
    """|T_j| / |I| for the bands of a central vertex.  J_inf is a single
    special child rather than part of a band, so its arc is left out even
    though it shares a density value with the band of its nearer side."""
    lay = layout(owner, params)
    out = {b.j: Fraction(0) for b in lay.bands}
    for z in lay.zones:
        if isinstance(z.piece, ChildPiece) and z.piece.child.kind == INFINITY:
            continue
        out[z.band] += z.arc_length
    return {j: v for j, v in out.items() if v}


# ---------------------------------------------------------------------------
# B_k and moments


@dataclass(frozen=True)
class BkFraction:
    lebesgue: Fraction
    mass: Fraction


def bk_mass_fraction(node: GridNode, k: int, params: Params, mode: str = "grid") -> BkFraction:
    """Lebesgue and mu fractions of I covered by children whose increment is
    N - k.

    ``grid``: the children actually present (central intervals merged).
    ``split``: the 2**k split Whitney intervals of length |E_J| / (2 * 3**k),
    with mu computed from the vertex density.
    """
    if node.kind != STANDARD:
        raise ValueError("B_k is defined here for standard vertices")
    if k < 1:
        raise ValueError("k must be at least 1")
    lay = layout(node.whitney, params)
    chart = lay.chart
    if mode == "split":
        rel = lay.density()
        leb, mass = Fraction(0), Fraction(0)
        for r in enumerate_children_of_size(node.whitney, params.whitney, k):
            y0, y1 = chart.arc(r)
            leb += y1 - y0
            mass += (y1 - y0) * rel.value_at((y0 + y1) / 2)
        return BkFraction(leb, mass)
    if mode != "grid":
        raise ValueError(f"unknown mode {mode!r}")
    target = node.whitney.log3_nominal + params.N - k
    leb, mass = Fraction(0), Fraction(0)
    floor = pow3(target)
    for z in lay.zones:
        for w in iter_children([z.piece], floor):
            if w.log3_nominal == target:
                a = chart.arc_length(w.geometry)
                leb += a
                mass += z.value * a
    return BkFraction(leb, mass)


def _sum_n_pow(x: Fraction, start: int, power: int) -> Fraction:
    """Sum over n >= start of n**power * x**n, for power in {0, 1, 2}."""
    full = {0: x / (1 - x), 1: x / (1 - x) ** 2, 2: x * (1 + x) / (1 - x) ** 3}[power]
    return full - sum((Fraction(n) ** power * x**n for n in range(1, start)), Fraction(0))


@lru_cache(maxsize=None)
def unit_moments(N: int) -> dict[str, Fraction]:
    """Length-weighted sums of t and t**2 over the children of a unit gap
    (g1, g2) and of a unit construction interval (m1, m2), where t is log3 of
    the child's nominal length."""
    third = Fraction(1, 3)
    g1 = -(1 - pow3(-N)) - 2 * _sum_n_pow(third, N + 1, 1)
    g2 = (1 - pow3(-N)) + 2 * _sum_n_pow(third, N + 1, 2)
    return {"g1": g1, "g2": g2, "m1": g1 - 3, "m2": g2 - 6 * g1 + 15}


@dataclass(frozen=True)
class PieceMoments:
    """Children of a piece have increment base + t with t <= 0; L, T1, T2 are
    the sums of len, len*t and len*t**2 over them."""

    base: int
    L: Fraction
    T1: Fraction
    T2: Fraction

    @property
    def second(self) -> Fraction:
        return self.base**2 * self.L + 2 * self.base * self.T1 + self.T2


def piece_moments(piece: Piece, ref_log3: int, N: int) -> PieceMoments:
    u = unit_moments(N)
    if isinstance(piece, ChildPiece):
        L = piece.child.euclidean_length
        if L is None:
            raise ValueError("J_inf has no Euclidean length")
        return PieceMoments(piece.child.log3_nominal - ref_log3, L, Fraction(0), Fraction(0))
    if isinstance(piece, GapPiece):
        g = piece.gap.length
        return PieceMoments(-piece.gap.level - ref_log3, g, g * u["g1"], g * u["g2"])
    if isinstance(piece, ConsPiece):
        c = pow3(-piece.level)
        return PieceMoments(-piece.level - ref_log3, c, c * u["m1"], c * u["m2"])
    if isinstance(piece, TailPiece):
        scale = pow3(-piece.start) * (piece.gap.length if piece.gap.bounded else 1)
        base = -piece.gap.level - piece.start - ref_log3
        return PieceMoments(base, Fraction(3, 2) * scale, -Fraction(3, 4) * scale, Fraction(3, 2) * scale)
    raise TypeError(f"unknown piece {piece!r}")


@dataclass(frozen=True)
class Enclosure:
    lo: Fraction
    hi: Fraction

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    @property
    def value(self) -> Fraction:
        if not self.exact:
            raise ValueError("enclosure is not a single value")
        return self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class Moments:
    first: Enclosure
    second: Enclosure


def _zone_moments(lay: Layout, z: Zone, ref: int, N: int) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    piece = z.piece
    if isinstance(piece, ChildPiece):
        x = piece.child.log3_nominal - ref
        a = z.arc_length * z.value
        return a * x, a * x, a * x * x, a * x * x
    pm = piece_moments(piece, ref, N)
    dmin, dmax = lay.chart.derivative_range(piece.extent())
    a = z.arc_length
    v = z.value
    f_lo = v * (pm.base * a + dmax * pm.T1)
    f_hi = v * (pm.base * a + dmin * pm.T1)
    s2 = pm.second
    return f_lo, f_hi, v * dmin * s2, v * dmax * s2


def _refined_zones(lay: Layout, rel_tol: Fraction, budget: int) -> list[Zone]:
    """Zones split until the chart derivative varies by at most rel_tol on
    each non-child zone (or the budget of extra zones runs out)."""
    if isinstance(lay.chart, AffineChart):
        return list(lay.zones)
    out: list[Zone] = []
    stack = list(reversed(lay.zones))
    extra = 0
    while stack:
        z = stack.pop()
        if isinstance(z.piece, ChildPiece) or extra >= budget:
            out.append(z)
            continue
        dmin, dmax = lay.chart.derivative_range(z.piece.extent())
        if dmax <= dmin * (1 + rel_tol):
            out.append(z)
            continue
        subs = z.piece.expand()
        extra += len(subs) - 1
        for sub in reversed(subs):
            stack.append(Zone(sub, z.value, lay.chart.arc(_extent(sub)), z.label, z.band))
    return out


@lru_cache(maxsize=8192)
def vertex_moments(owner: WhitneyInterval, params: Params, rel_tol: Fraction = Fraction(1, 100), budget: int = 8000) -> Moments:
    """Enclosures of E[X] and E[X**2] for one jump out of ``owner``.

    Exact for affine charts.  Under the inversion chart each piece's
    contribution is bracketed by the chart derivative at its ends.
    """
    lay = layout(owner, params)
    ref = owner.log3_nominal
    f_lo = f_hi = s_lo = s_hi = Fraction(0)
    for z in _refined_zones(lay, Fraction(rel_tol), budget):
        a, b, c, d = _zone_moments(lay, z, ref, params.N)
        f_lo += a
        f_hi += b
        s_lo += c
        s_hi += d
    return Moments(Enclosure(f_lo, f_hi), Enclosure(s_lo, s_hi))


def _sample_standard(params: Params) -> WhitneyInterval:
    return standard(Gap(1, 1), params.N + 1, params.N)


def simplified_expectation(params: Params) -> Fraction:
    """(N-1)(1-eps) + eps(N-4): the mean increment when F is 1 - eps on B_1
    and 3 eps / 2 on the split intervals of every other size."""
    N, eps = params.N, params.eps
    return (N - 1) * (1 - eps) + eps * (N - 4)


def simplified_series(params: Params, terms: int) -> tuple[Fraction, Fraction]:
    """Truncated sums of (N-k) w_k and (N-k)**2 w_k over k <= terms, with
    w_1 = 1 - eps and w_k = (3 eps / 2) (1/2) (2/3)**k."""
    N, eps = params.N, params.eps
    d = Fraction(3, 2) * eps
    first = (N - 1) * (1 - eps)
    second = (N - 1) ** 2 * (1 - eps)
    for k in range(2, terms + 1):
        w = d * Fraction(1, 2) * Fraction(2, 3) ** k
        first += (N - k) * w
        second += (N - k) ** 2 * w
    return first, second


def simplified_second_moment(params: Params) -> Fraction:
    N, eps = params.N, params.eps
    d = Fraction(3, 2) * eps
    x = Fraction(2, 3)
    s0 = _sum_n_pow(x, 2, 0)
    s1 = _sum_n_pow(x, 2, 1)
    s2 = _sum_n_pow(x, 2, 2)
    return (N - 1) ** 2 * (1 - eps) + d * Fraction(1, 2) * (N * N * s0 - 2 * N * s1 + s2)


NodeClass = Union[str, WhitneyInterval, GridNode]


def _owner_of(node_class: NodeClass, params: Params) -> Optional[WhitneyInterval]:
    if isinstance(node_class, GridNode):
        return node_class.whitney
    if isinstance(node_class, WhitneyInterval):
        return node_class
    if node_class == "standard":
        return _sample_standard(params)
    if node_class == "infinity":
        return infinity_interval(params.N)
    if node_class == "post-hit":
        return None
    raise ValueError(f"unknown node class {node_class!r}")


def expectation_exact(node_class: NodeClass, params: Params, mode: str = "full") -> Enclosure:
    """E[X] for one jump.

    ``simplified`` (standard only): the closed form above.  ``full``: the
    actual density of the vertex, summed over all children in closed form;
    a single value except for central vertices, where it is an enclosure.
    After a hit every increment is 1.
    """
    if mode == "simplified":
        if node_class not in ("standard",) and not (
            isinstance(node_class, (WhitneyInterval, GridNode)) and _owner_of(node_class, params).kind == STANDARD
        ):
            raise ValueError("the simplified mode covers standard vertices only")
        v = simplified_expectation(params)
        return Enclosure(v, v)
    if mode != "full":
        raise ValueError(f"unknown mode {mode!r}")
    owner = _owner_of(node_class, params)
    if owner is None:
        return Enclosure(Fraction(1), Fraction(1))
    return vertex_moments(owner, params).first


def second_moment_exact(node_class: NodeClass, params: Params, mode: str = "full", terms: int = 60) -> Enclosure:
    """E[X**2] for one jump; ``simplified`` returns the truncated series and
    the exact infinite sum as the enclosure."""
    if mode == "simplified":
        _, trunc = simplified_series(params, terms)
        return Enclosure(trunc, simplified_second_moment(params))
    owner = _owner_of(node_class, params)
    if owner is None:
        return Enclosure(Fraction(1), Fraction(1))
    return vertex_moments(owner, params).second


def second_moment_bound(params: Params) -> Fraction:
    """(N**2/(1-b) + 1/(1-b)**3) / delta with b = 2/3 and delta the standard
    low density value; the constant in front is taken to be 1."""
    b = Fraction(2, 3)
    return (params.N**2 / (1 - b) + 1 / (1 - b) ** 3) / standard_delta(params)


def iter_tree(params: Params, depth: int, size_floor: Fraction, root: Optional[GridNode] = None) -> Iterator[GridNode]:
    """All vertices down to ``depth`` whose Euclidean length is >= size_floor
    (J_inf always kept), breadth first."""
    frontier = [root or root_node(params)]
    for _ in range(depth + 1):
        nxt = []
        for node in frontier:
            yield node
            if node.depth < depth:
                nxt.extend(expand(node, params, size_floor).children)
        frontier = nxt


def grid_dump(params: Params, depth: int, size_floor: Fraction) -> list[dict]:
    """Vertices to ``depth`` as JSON-ready rows with fractions as strings."""
    rows = []
    ids: dict[int, int] = {}
    frontier: list[tuple[Optional[int], GridNode]] = [(None, root_node(params))]
    while frontier:
        nxt = []
        for parent, node in frontier:
            nid = len(rows)
            rows.append(
                {
                    "id": nid,
                    "parent": parent,
                    "kind": node.kind,
                    "whitney": str(node.whitney),
                    "arc": [str(node.arc_lo), str(node.arc_hi)],
                    "value": str(node.value),
                    "depth": node.depth,
                }
            )
            if node.depth < depth:
                nxt.extend((nid, c) for c in expand(node, params, size_floor).children)
        frontier = nxt
    return rows
