"""Robust invariance under the input set.

With more than one admissible input, the only robustly invariant parts of
the box are pieces of the coordinate axes, so the interior MRPI is empty.
With a single fixed input every orbit is a closed level curve of the first
integral ``V``, and the largest sublevel set of ``V`` that fits in the box is
invariant.  That explicit construction is an extension of the nontriviality
result and is labeled as such in every report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .model import (
    InputBounds,
    Scenario,
    ValidationError,
    classify_region,
    equilibrium,
    first_integral,
    vector_field,
)
from .numerics import Monitor, integrate_with_events

__all__ = [
    "MrpiRegion",
    "MrpiResult",
    "mrpi_is_nontrivial",
    "mrpi_region_singleton",
    "analyze_mrpi",
    "orbit_period",
    "level_set_point",
]

CONSTRUCTION_NOTE = ("explicit first-integral construction: an extension beyond the "
                     "nontriviality criterion, not part of it")
AXES_NOTE = ("the coordinate axes are invariant manifolds of the flow; their robust "
             "invariance is not computed")
N_RAYS = 720
EDGE_TOL = 1e-10
RAY_TOL = 1e-12


@dataclass
class MrpiRegion:
    """``{x in G : V(x) < level}`` for the fixed input ``u``."""

    level: float
    equilibrium: tuple[float, float]
    u: tuple[float, float]
    boundary: np.ndarray
    touch_point: tuple[float, float]
    construction: str = CONSTRUCTION_NOTE

    def contains(self, x, params) -> bool:
        if x[0] <= 0 or x[1] <= 0:
            return False
        return first_integral(x, params, self.u) < self.level


@dataclass
class MrpiResult:
    nontrivial: bool
    reason: str
    region: MrpiRegion | None = None
    notes: list[str] = field(default_factory=lambda: [AXES_NOTE])

    def to_dict(self) -> dict:
        out = {"nontrivial": self.nontrivial, "reason": self.reason, "notes": list(self.notes)}
        if self.region is not None:
            r = self.region
            out["region"] = {
                "level": r.level,
                "equilibrium": list(r.equilibrium),
                "u": list(r.u),
                "touch_point": list(r.touch_point),
                "boundary_points": len(r.boundary),
                "construction": r.construction,
            }
        return out


def mrpi_is_nontrivial(bounds: InputBounds) -> bool:
    """True exactly when both inputs are fixed (exact equality of the stored bounds)."""
    return bounds.u1_min == bounds.u1_max and bounds.u2_min == bounds.u2_max


def _singleton_reason(bounds: InputBounds) -> str:
    free = [name for name, lo, hi in (("u1", bounds.u1_min, bounds.u1_max),
                                      ("u2", bounds.u2_min, bounds.u2_max)) if lo != hi]
    if not free:
        return "U is a singleton (u1_min = u1_max and u2_min = u2_max)"
    detail = ", ".join(f"{n}_min != {n}_max" for n in free)
    return f"U is not a singleton ({detail}); the interior MRPI is empty"


def _edge_minimum(scenario: Scenario, u) -> tuple[float, tuple[float, float]]:
    """Smallest value of V on the box outline and where it is attained."""
    box, p = scenario.box, scenario.params
    x1_lo, x1_hi, x2_lo, x2_hi = box.x1_lo, box.x1_hi, box.x2_lo, box.x2_hi
    edges = [  # (fixed axis, fixed value, free range)
        (0, x1_lo, (x2_lo, x2_hi)),
        (0, x1_hi, (x2_lo, x2_hi)),
        (1, x2_lo, (x1_lo, x1_hi)),
        (1, x2_hi, (x1_lo, x1_hi)),
    ]
    best, where = math.inf, None
    for axis, fixed, (a, b) in edges:
        if fixed <= 0:
            continue  # V is unbounded above near the axes
        a = max(a, np.nextafter(0.0, 1.0))

        def v(s, axis=axis, fixed=fixed):
            return first_integral((fixed, s) if axis == 0 else (s, fixed), p, u)

        res = minimize_scalar(v, bounds=(a, b), method="bounded",
                              options={"xatol": EDGE_TOL})
        cands = [(float(res.fun), float(res.x)), (v(a), a), (v(b), b)]
        val, s = min(cands)
        if val < best:
            best, where = val, ((fixed, s) if axis == 0 else (s, fixed))
    return best, where


def level_set_point(e, direction, level, scenario: Scenario, u) -> np.ndarray:
    """Point on the ray ``e + r * direction`` where V reaches ``level``.

    V is convex with its minimum at ``e``, so it increases along every ray and
    the crossing is unique; it lies no farther than the box outline.
    """
    p = scenario.params
    x1_lo, x1_hi, x2_lo, x2_hi = scenario.view_rect
    d = np.asarray(direction, dtype=float)
    limits = []
    for k, (lo, hi) in enumerate(((x1_lo, x1_hi), (x2_lo, x2_hi))):
        if d[k] > 0:
            limits.append((hi - e[k]) / d[k])
        elif d[k] < 0:
            limits.append((lo - e[k]) / d[k])
    r_max = min(limits)

    def g(r):
        x = e + r * d
        if x[0] <= 0 or x[1] <= 0:
            return math.inf
        return first_integral(x, p, u) - level

    if g(r_max) <= 0:
        return e + r_max * d
    r = bisect(lambda r: min(g(r), 1e300), 0.0, r_max, xtol=RAY_TOL, maxiter=200)
    return e + r * d


def mrpi_region_singleton(scenario: Scenario, n_rays: int = N_RAYS) -> MrpiResult:
    """Largest invariant sublevel set of V inside the box for a fixed input."""
    bounds, p, box = scenario.bounds, scenario.params, scenario.box
    if not box.bounded:
        raise ValidationError("the MRPI construction needs a bounded state box")
    if not mrpi_is_nontrivial(bounds):
        raise ValidationError(_singleton_reason(bounds))
    u = (bounds.u1_min, bounds.u2_min)
    if p.alpha + u[0] <= 0 or p.gamma - u[1] <= 0:
        return MrpiResult(False, "alpha + u1 <= 0 or gamma - u2 <= 0: no interior "
                                 "equilibrium, so no closed orbit lies inside G")
    e = np.array(equilibrium(p, u))
    if classify_region(e, box) != "G_minus":
        return MrpiResult(False, f"equilibrium ({e[0]:.6g}, {e[1]:.6g}) is not in the interior "
                                 "of G, so no closed orbit around it fits in G")
    level, touch = _edge_minimum(scenario, u)
    angles = 2.0 * np.pi * np.arange(n_rays) / n_rays
    boundary = np.array([level_set_point(e, (math.cos(a), math.sin(a)), level, scenario, u)
                         for a in angles])
    region = MrpiRegion(level=level, equilibrium=(float(e[0]), float(e[1])), u=u,
                        boundary=boundary, touch_point=touch)
    reason = _singleton_reason(bounds) + f"; region is V < {level:.10g} around the equilibrium"
    return MrpiResult(True, reason, region, notes=[AXES_NOTE, CONSTRUCTION_NOTE])


def analyze_mrpi(scenario: Scenario) -> MrpiResult:
    """Verdict for any scenario; builds the region when the input is fixed."""
    if mrpi_is_nontrivial(scenario.bounds):
        return mrpi_region_singleton(scenario)
    return MrpiResult(False, _singleton_reason(scenario.bounds))


def orbit_period(x0, scenario: Scenario, u, max_time: float = 100.0) -> float:
    """Period of the closed constant-input orbit through ``x0``.

    Measured between the first and third crossings of the horizontal line
    through the equilibrium, so the start point may lie anywhere on the orbit.
    """
    p = scenario.params
    e2 = equilibrium(p, u)[1]
    events = []
    cfg = scenario.numerics.replace(max_arc_time=max_time)
    integrate_with_events(
        lambda y: vector_field(y, u, p), x0, cfg,
        monitors=[Monitor("level", lambda y: y[1] - e2)],
        on_event=lambda ev: events.append(ev.t),
        halt=lambda t, y: "done" if len(events) >= 3 else None,
    )
    if len(events) < 3:
        raise ValueError(f"orbit through {tuple(x0)} did not close within {max_time}")
    return events[2] - events[0]
