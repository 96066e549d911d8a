"""Candidate filtering, boundary assembly and membership queries.

The constrained box (cut at the viewing window when unbounded) has a
perimeter that is parametrized counter-clockwise by arc length, starting at
the lower-left corner.  Every candidate curve joins two perimeter points: its
tangency point and the point where backward integration left the box.  On
the face through the tangency point, the perimeter on one side can be held
by some input (``min_u max_i L_f g_i <= 0``) and on the other side cannot.
The curve cuts the box in two; the piece touching the holdable side is the
admissible side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LinearRing, LineString, Point
from shapely.ops import substring

from .barrier import BarrierCurve
from .model import Scenario, StateBox, active_set, classify_region, min_max_lie_derivative

__all__ = [
    "AssemblyError",
    "StateError",
    "OutsideWindowError",
    "Perimeter",
    "Arc",
    "AdmissibleRegion",
    "perimeter_test",
    "filter_candidates",
    "assemble_boundary",
    "contains",
    "normal_offset_points",
]

MEMBERSHIP = ("inside_A", "on_boundary", "in_G_outside_A", "outside_G")


class AssemblyError(RuntimeError):
    def __init__(self, message, arcs=None):
        super().__init__(message)
        self.arcs = arcs or []


class StateError(RuntimeError):
    pass


class OutsideWindowError(ValueError):
    pass


class Perimeter:
    """Counter-clockwise arc-length parametrization of the box outline.

    Edges in order: bottom (g4), right (g1), top (g3), left (g2).  A side
    without a constraint (unbounded box) is a window edge, tagged ``None``.
    """

    def __init__(self, scenario: Scenario):
        x1_lo, x1_hi, x2_lo, x2_hi = scenario.view_rect
        box = scenario.box
        self.rect = (x1_lo, x1_hi, x2_lo, x2_hi)
        self.corners = np.array([
            (x1_lo, x2_lo), (x1_hi, x2_lo), (x1_hi, x2_hi), (x1_lo, x2_hi),
        ])
        self.kinds = (
            4,
            1 if box.x1_hi is not None else None,
            3 if box.x2_hi is not None else None,
            2,
        )
        w, h = x1_hi - x1_lo, x2_hi - x2_lo
        self.lengths = np.array([w, h, w, h])
        self.offsets = np.concatenate([[0.0], np.cumsum(self.lengths)])
        self.length = float(self.offsets[-1])

    def edge_of(self, s: float) -> int:
        s = s % self.length
        return int(min(np.searchsorted(self.offsets, s, side="right") - 1, 3))

    def point(self, s: float) -> np.ndarray:
        s = s % self.length
        k = self.edge_of(s)
        a, b = self.corners[k], self.corners[(k + 1) % 4]
        frac = (s - self.offsets[k]) / self.lengths[k]
        p = a + frac * (b - a)
        # keep the fixed coordinate exact
        if k in (0, 2):
            p[1] = a[1]
        else:
            p[0] = a[0]
        return p

    def param(self, x) -> float:
        """Arc-length position of the perimeter point nearest to ``x``."""
        x = np.asarray(x, dtype=float)
        best, best_s = math.inf, 0.0
        for k in range(4):
            a, b = self.corners[k], self.corners[(k + 1) % 4]
            v = b - a
            frac = min(1.0, max(0.0, float((x - a) @ v) / float(v @ v)))
            d = float(np.hypot(*(a + frac * v - x)))
            if d < best - 1e-15:
                best, best_s = d, self.offsets[k] + frac * self.lengths[k]
        return float(best_s % self.length)

    def distance_ccw(self, s0: float, s1: float) -> float:
        return (s1 - s0) % self.length

    def arc(self, s0: float, s1: float) -> list[tuple[int, np.ndarray]]:
        """Pieces of the perimeter from ``s0`` counter-clockwise to ``s1``, one per edge."""
        total = self.distance_ccw(s0, s1)
        pieces = []
        s = s0
        remaining = total
        while remaining > 1e-12:
            k = self.edge_of(s)
            local = (s % self.length) - self.offsets[k]
            to_corner = self.lengths[k] - local
            if to_corner <= 1e-12:
                s = self.offsets[(k + 1) % 4] if k < 3 else 0.0
                continue
            step = min(to_corner, remaining)
            pieces.append((k, np.array([self.point(s), self.point(s + step) if step < to_corner
                                        else self.corners[(k + 1) % 4].copy()])))
            s += step
            remaining -= step
        return pieces


def perimeter_test(x, scenario: Scenario) -> float:
    """``min_u max_{i active} L_f g_i`` at a perimeter point (``-inf`` on window edges)."""
    try:
        active = active_set(x, scenario.box, tol=1e-9)
    except ValueError:
        return -math.inf
    if not active:
        return -math.inf
    return min_max_lie_derivative(x, active, scenario.params, scenario.bounds)


def _good_direction(curve: BarrierCurve, perim: Perimeter, scenario: Scenario, ds: float):
    s0 = perim.param(curve.origin.z)
    forward = perimeter_test(perim.point(s0 + ds), scenario)
    backward = perimeter_test(perim.point(s0 - ds), scenario)
    if forward <= 0 < backward:
        return 1
    if backward <= 0 < forward:
        return -1
    return 0


def _fmt(x) -> str:
    return f"({x[0]:.6g}, {x[1]:.6g})"


def filter_candidates(curves: list[BarrierCurve], scenario: Scenario) -> list[BarrierCurve]:
    """Set ``kept``/``reason`` on every candidate curve and return the list.

    A curve is rejected when the perimeter stretch its admissible side needs
    (from its tangency point, in the holdable direction, up to the nearest
    end of another kept curve or its own end) contains a point where every
    input pushes the state out of the box.  Rejections only lengthen the
    stretches of the remaining curves, so the check is repeated to a fixed
    point.
    """
    perim = Perimeter(scenario)
    ds = scenario.numerics.filter_resolution * perim.length
    pool = []
    for c in curves:
        c.kept, c.flagged, c.reason = None, False, ""
        if not c.reaches_boundary:
            c.kept, c.flagged = False, True
            c.reason = (f"backward integration ended by {c.termination} at {_fmt(c.start_point)} "
                        "without reaching the constraint boundary")
            continue
        direction = _good_direction(c, perim, scenario, ds)
        c.good_direction = direction
        if direction == 0:
            c.kept, c.flagged = False, True
            c.reason = "admissible side at the tangency point is ambiguous"
            continue
        pool.append(c)

    changed = True
    while changed:
        changed = False
        for c in pool:
            if c.kept is False:
                continue
            others = [o for o in pool if o is not c and o.kept is not False]
            s0 = perim.param(c.origin.z)
            d = c.good_direction
            stops = [perim.param(c.start_point)]
            for o in others:
                stops.append(perim.param(o.start_point))
                stops.append(perim.param(o.origin.z))
            reach = min(((s - s0) * d) % perim.length for s in stops
                        if ((s - s0) * d) % perim.length > ds * 1e-6)
            n = int(reach / ds)
            for k in range(1, n + 1):
                x = perim.point(s0 + d * k * ds)
                value = perimeter_test(x, scenario)
                if value > 0:
                    faces = sorted(active_set(x, scenario.box, tol=1e-9))
                    c.kept = False
                    c.reason = (
                        f"taking this curve as boundary would put {_fmt(x)} on "
                        f"{'/'.join(f'g{i}' for i in faces)} = 0 into the admissible set, "
                        f"but min over inputs of max L_f g there is {value:.6g} > 0"
                    )
                    changed = True
                    break
    for c in pool:
        if c.kept is None:
            c.kept = True
            c.reason = "admissible side passes the tangency test along the constraint boundary"
    return curves


@dataclass
class Arc:
    """One piece of the boundary loop.

    ``kind`` is ``"barrier_curve"`` (``origin`` is the tangency label),
    ``"constraint_segment"`` (``origin`` is the constraint id) or
    ``"window_segment"`` (``origin`` is ``None``).
    """

    kind: str
    origin: object
    points: np.ndarray

    @property
    def origin_label(self) -> str:
        if self.kind == "constraint_segment":
            return f"g{self.origin}"
        if self.kind == "window_segment":
            return "window"
        return str(self.origin)


@dataclass
class AdmissibleRegion:
    arcs: list[Arc]
    open: bool
    box: StateBox
    rect: tuple[float, float, float, float]
    boundary_tol: float
    notes: list[str] = field(default_factory=list)

    @property
    def polygon(self) -> np.ndarray:
        pts = []
        for arc in self.arcs:
            for p in arc.points:
                if not pts or np.hypot(*(p - pts[-1])) > 1e-12:
                    pts.append(p)
        if len(pts) > 1 and np.hypot(*(pts[0] - pts[-1])) <= 1e-12:
            pts.pop()
        return np.array(pts)

    @property
    def kept_origins(self) -> list[str]:
        return [a.origin for a in self.arcs if a.kind == "barrier_curve"]


@dataclass
class _Chain:
    start: float
    end: float
    arcs: list[Arc]

    def length(self, perim: Perimeter) -> float:
        return perim.distance_ccw(self.start, self.end)


def _chain_for(curve: BarrierCurve, perim: Perimeter) -> _Chain:
    s_origin = perim.param(curve.origin.z)
    s_start = perim.param(curve.start_point)
    if -curve.good_direction == 1:
        return _Chain(s_origin, s_start, [Arc("barrier_curve", curve.label, curve.x[::-1].copy())])
    return _Chain(s_start, s_origin, [Arc("barrier_curve", curve.label, curve.x.copy())])


def _chain_path(chain: _Chain) -> np.ndarray:
    return np.concatenate([a.points for a in chain.arcs])


def _merge_crossing(a: _Chain, b: _Chain, perim: Perimeter) -> _Chain:
    """Splice two cut chains whose perimeter intervals overlap at their crossing."""
    la = LineString(_chain_path(a))
    lb = LineString(_chain_path(b))
    inter = la.intersection(lb)
    pts = [g for g in getattr(inter, "geoms", [inter]) if not g.is_empty]
    pts = [p for g in pts for p in (g.coords if g.geom_type != "Point" else [g.coords[0]])]
    if not pts:
        raise AssemblyError(
            "barrier curves overlap along the constraint boundary but do not intersect",
            arcs=a.arcs + b.arcs,
        )
    point = min((Point(p) for p in pts), key=la.project)
    da, db = la.project(point), lb.project(point)
    arcs = []
    for chain, line, lo, hi in ((a, la, 0.0, da), (b, lb, db, lb.length)):
        piece = substring(line, lo, hi)
        coords = np.array(piece.coords) if not piece.is_empty else np.empty((0, 2))
        label = next(x.origin for x in chain.arcs if x.kind == "barrier_curve")
        if len(coords) >= 2:
            arcs.append(Arc("barrier_curve", label, coords))
    return _Chain(a.start, b.end, arcs)


def assemble_boundary(curves: list[BarrierCurve], scenario: Scenario) -> AdmissibleRegion:
    """Chain kept curves and perimeter pieces into the boundary loop of the admissible set."""
    kept = [c for c in curves if c.kept]
    if not kept:
        raise AssemblyError("no candidate curves to assemble")
    perim = Perimeter(scenario)
    ds = scenario.numerics.filter_resolution * perim.length
    tol = scenario.numerics.junction_tol
    notes = []
    for c in kept:
        if c.good_direction == 0:
            c.good_direction = _good_direction(c, perim, scenario, ds)
            if c.good_direction == 0:
                raise AssemblyError(f"admissible side of {c.label} is ambiguous",
                                    arcs=[Arc("barrier_curve", c.label, c.x)])

    chains = sorted((_chain_for(c, perim) for c in kept), key=lambda ch: ch.start)

    # A chain nested inside another one cuts away nothing new.
    nested = set()
    for i, a in enumerate(chains):
        for j, b in enumerate(chains):
            if i != j and j not in nested:
                offset = perim.distance_ccw(a.start, b.start)
                if offset + b.length(perim) <= a.length(perim) + tol and offset <= a.length(perim):
                    if not (offset == 0 and b.length(perim) == a.length(perim) and i > j):
                        nested.add(j)
    for j in sorted(nested):
        label = chains[j].arcs[0].origin
        notes.append(f"curve from {label} lies inside a region already cut away; not on the loop")
    chains = [ch for j, ch in enumerate(chains) if j not in nested]

    merged = True
    while merged and len(chains) > 1:
        merged = False
        for i in range(len(chains)):
            a, b = chains[i], chains[(i + 1) % len(chains)]
            if perim.distance_ccw(a.start, b.start) < a.length(perim) - tol:
                chains[i] = _merge_crossing(a, b, perim)
                del chains[(i + 1) % len(chains)]
                chains.sort(key=lambda ch: ch.start)
                merged = True
                break

    arcs: list[Arc] = []
    for i, chain in enumerate(chains):
        nxt = chains[(i + 1) % len(chains)]
        arcs.extend(chain.arcs)
        pieces = perim.arc(chain.end, nxt.start)
        if pieces:
            # reuse the exact curve end points so the loop has no hairline spikes
            pieces[0][1][0] = chain.arcs[-1].points[-1]
            pieces[-1][1][-1] = nxt.arcs[0].points[0]
        for k, pts in pieces:
            kind = perim.kinds[k]
            if kind is None:
                arcs.append(Arc("window_segment", None, pts))
            else:
                arcs.append(Arc("constraint_segment", kind, pts))

    for a, b in zip(arcs, arcs[1:] + arcs[:1]):
        gap = float(np.hypot(*(a.points[-1] - b.points[0])))
        if gap > max(tol, 10 * scenario.numerics.event_time_tol):
            raise AssemblyError(
                f"arc {a.kind}:{a.origin_label} ends {gap:.3g} away from the next arc", arcs=arcs)

    region = AdmissibleRegion(
        arcs=arcs,
        open=any(a.kind == "window_segment" for a in arcs),
        box=scenario.box,
        rect=perim.rect,
        boundary_tol=scenario.numerics.boundary_tol,
        notes=notes,
    )
    poly = region.polygon
    if len(poly) < 3 or not LinearRing(poly).is_simple:
        raise AssemblyError("assembled boundary is not a simple closed loop", arcs=arcs)
    return region


def _segment_distances(p: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1, axis=0)
    v = b - a
    L = np.einsum("ij,ij->i", v, v)
    t = np.clip(np.einsum("ij,ij->i", p - a, v) / np.where(L == 0, 1, L), 0, 1)
    proj = a + t[:, None] * v
    return np.hypot(proj[:, 0] - p[0], proj[:, 1] - p[1])


def _crossing_number(p: np.ndarray, poly: np.ndarray) -> int:
    a = poly
    b = np.roll(poly, -1, axis=0)
    upward = (a[:, 1] <= p[1]) & (b[:, 1] > p[1])
    downward = (a[:, 1] > p[1]) & (b[:, 1] <= p[1])
    cand = upward | downward
    with np.errstate(divide="ignore", invalid="ignore"):
        vt = (p[1] - a[:, 1]) / (b[:, 1] - a[:, 1])
        x_cross = a[:, 0] + vt * (b[:, 0] - a[:, 0])
    return int(np.count_nonzero(cand & (p[0] < x_cross)))


def contains(region: AdmissibleRegion | None, x, box: StateBox | None = None) -> str:
    """Membership of ``x``: inside_A, on_boundary, in_G_outside_A or outside_G."""
    if region is None or not region.arcs:
        raise StateError("the admissible region has not been assembled")
    box = box if box is not None else region.box
    if classify_region(x, box) == "outside_G":
        return "outside_G"
    p = np.asarray(x[:2], dtype=float)
    x1_lo, x1_hi, x2_lo, x2_hi = region.rect
    if region.open and (p[0] > x1_hi + region.boundary_tol or p[1] > x2_hi + region.boundary_tol):
        raise OutsideWindowError(
            f"{_fmt(p)} lies beyond the viewing window where the region was truncated")
    poly = region.polygon
    if np.min(_segment_distances(p, poly)) <= region.boundary_tol:
        return "on_boundary"
    return "inside_A" if _crossing_number(p, poly) % 2 == 1 else "in_G_outside_A"


def normal_offset_points(region: AdmissibleRegion, rel_offset: float, n: int,
                         scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Pairs of points offset inward and outward from the barrier arcs.

    Base points are spread evenly by arc length over all barrier arcs; the
    offset distance is ``rel_offset`` times the diagonal of the box outline.
    Only pairs whose inward point is inside the region and whose outward
    point lies in the box interior but outside the region are returned.
    """
    x1_lo, x1_hi, x2_lo, x2_hi = region.rect
    dist = rel_offset * math.hypot(x1_hi - x1_lo, x2_hi - x2_lo)
    poly = region.polygon
    area2 = float(np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1]))
    ccw = area2 > 0

    lines = [LineString(a.points) for a in region.arcs if a.kind == "barrier_curve"]
    total = sum(line.length for line in lines)
    inner, outer = [], []
    m = 8 * n
    for k in range(m):
        s = (k + 0.5) / m * total
        for line in lines:
            if s <= line.length:
                break
            s -= line.length
        p = np.array(line.interpolate(s).coords[0])
        q = np.array(line.interpolate(min(s + 1e-4 * total, line.length)).coords[0])
        r = np.array(line.interpolate(max(s - 1e-4 * total, 0.0)).coords[0])
        tangent = q - r
        norm = np.hypot(*tangent)
        if norm == 0:
            continue
        tangent /= norm
        left = np.array([-tangent[1], tangent[0]])
        inward = left if ccw else -left
        pin, pout = p + dist * inward, p - dist * inward
        try:
            if (classify_region(pout, scenario.box) != "G_minus"
                    or contains(region, pin) != "inside_A"
                    or contains(region, pout) != "in_G_outside_A"):
                continue
        except OutsideWindowError:
            continue
        inner.append(pin)
        outer.append(pout)
    if len(inner) < n:
        raise ValueError(f"only {len(inner)} offset pairs available, {n} requested")
    pick = np.linspace(0, len(inner) - 1, n).round().astype(int)
    return np.array(inner)[pick], np.array(outer)[pick]
