"""Barrier curves of the admissible set for the box-constrained model.

Pipeline: ultimate tangency points on the four faces, an existence test for
each, then backward integration of state and costate under the bang-bang
input selected by the costate signs.  Candidate filtering, boundary assembly
and membership queries live in :mod:`barrierkit.region`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    InputBounds,
    Scenario,
    constraint_gradient,
    constraint_value,
    lie_derivative,
)
from .numerics import Event, Monitor, integrate_with_events, rk4_step

log = logging.getLogger(__name__)

__all__ = [
    "PreconditionError",
    "InvariantViolation",
    "TangencyPoint",
    "BangBangInput",
    "SwitchingLine",
    "SwitchEvent",
    "BarrierCurve",
    "ultimate_tangency_points",
    "existence_check",
    "input_realization",
    "switching_lines",
    "initial_input",
    "integrate_barrier_backward",
    "candidate_curves",
    "first_backward_step",
    "tangency_residual",
]


class PreconditionError(ValueError):
    pass


class InvariantViolation(ValueError):
    pass


@dataclass(frozen=True)
class TangencyPoint:
    """Point where a barrier meets face ``constraint_id`` tangentially.

    ``lambda_final`` is the costate at the meeting time ``t_bar`` (the face
    gradient).  ``existence_value`` is the left side of the strict inequality
    deciding whether a candidate curve reaches this point from inside the box.
    """

    constraint_id: int
    z: tuple[float, float]
    lambda_final: tuple[float, float]
    exists: bool
    existence_value: float
    in_box: bool = True
    t_bar: float = 0.0

    @property
    def label(self) -> str:
        return f"z{self.constraint_id}"


@dataclass(frozen=True)
class BangBangInput:
    u1: float
    u2: float

    def __iter__(self):
        yield self.u1
        yield self.u2

    def __getitem__(self, k):
        return (self.u1, self.u2)[k]


@dataclass(frozen=True)
class SwitchingLine:
    """A line on which the barrier input may switch.

    ``axis`` is the coordinate fixed by the line (``"x1"`` or ``"x2"``).  In
    forward time, input ``input_index`` jumps from ``from_level`` to
    ``to_level`` there while costate component ``adjoint_index`` has sign
    ``adjoint_sign``.
    """

    label: str
    axis: str
    value: float
    input_index: int
    from_level: float
    to_level: float
    adjoint_index: int
    adjoint_sign: int

    def distance(self, x) -> float:
        return abs(float(x[0 if self.axis == "x1" else 1]) - self.value)


@dataclass(frozen=True)
class SwitchEvent:
    """An input switch, with levels given in forward time."""

    input_index: int
    from_level: float
    to_level: float
    x: tuple[float, float]
    lam: tuple[float, float]
    t: float

    def line(self, lines: list[SwitchingLine]) -> SwitchingLine:
        for line in lines:
            if (line.input_index == self.input_index and line.from_level == self.from_level
                    and line.to_level == self.to_level):
                return line
        raise LookupError("no switching line matches this event")


@dataclass
class BarrierCurve:
    """A backward-integrated candidate barrier, stored in forward time order.

    The last sample is the tangency point (``t = t_bar = 0``); the first is
    where backward integration stopped.  ``events[k]`` names the event that
    produced sample ``k`` (empty string for regular steps).
    """

    origin: TangencyPoint
    t: np.ndarray
    x: np.ndarray
    lam: np.ndarray
    u: np.ndarray
    events: list[str]
    switches: list[SwitchEvent]
    termination: str
    kept: bool | None = None
    reason: str = ""
    flagged: bool = False
    good_direction: int = 0
    hamiltonian: np.ndarray = field(default=None, repr=False)

    @property
    def label(self) -> str:
        return self.origin.label

    @property
    def start_point(self) -> np.ndarray:
        """Where backward integration terminated."""
        return self.x[0]

    @property
    def reaches_boundary(self) -> bool:
        return self.termination.startswith("constraint_hit") or self.termination == "window_exit"

    def max_relative_hamiltonian(self) -> float:
        return float(np.max(self.hamiltonian))


def ultimate_tangency_points(scenario: Scenario) -> list[TangencyPoint]:
    """Tangency points on every bounded face, with costate and existence verdict."""
    p, b, box = scenario.params, scenario.bounds, scenario.box
    x1_lo, x1_hi, x2_lo, x2_hi = scenario.view_rect
    raw = []
    if box.x1_hi is not None:
        raw.append((1, (box.x1_hi, (p.alpha + b.u1_min) / p.beta)))
    raw.append((2, (box.x1_lo, (p.alpha + b.u1_max) / p.beta)))
    if box.x2_hi is not None:
        raw.append((3, ((p.gamma - b.u2_min) / p.delta, box.x2_hi)))
    raw.append((4, ((p.gamma - b.u2_max) / p.delta, box.x2_lo)))

    points = []
    for i, z in raw:
        tol = scenario.numerics.junction_tol
        if i in (1, 2):
            in_box = x2_lo - tol <= z[1] <= x2_hi + tol
        else:
            in_box = x1_lo - tol <= z[0] <= x1_hi + tol
        if not in_box:
            log.warning("tangency point z%d = (%g, %g) lies outside the constrained box; "
                        "it is excluded from the pipeline", i, z[0], z[1])
        provisional = TangencyPoint(i, z, constraint_gradient(i), False, math.nan, in_box)
        exists, value = existence_check(provisional, scenario)
        z = (float(z[0]), float(z[1]))
        points.append(TangencyPoint(i, z, constraint_gradient(i), bool(exists and in_box), value,
                                    bool(in_box)))
    return points


def existence_check(tp: TangencyPoint, scenario: Scenario) -> tuple[bool, float]:
    """Whether a candidate curve ends at ``tp`` coming from inside the box.

    Returns the verdict and the value of the expression whose sign decides it.
    """
    p, b, box = scenario.params, scenario.bounds, scenario.box
    i = tp.constraint_id
    if i == 1:
        value = p.delta * box.x1_hi - p.gamma + b.u2_max
        return bool(value > 0), float(value)
    if i == 2:
        value = p.delta * box.x1_lo - p.gamma + b.u2_min
        return bool(value < 0), float(value)
    if i == 3:
        value = p.alpha - p.beta * box.x2_hi + b.u1_min
        return bool(value < 0), float(value)
    if i == 4:
        value = p.alpha - p.beta * box.x2_lo + b.u1_max
        return bool(value > 0), float(value)
    raise ValueError(f"constraint id must be one of 1..4, got {i!r}")


def input_realization(lam, bounds: InputBounds) -> BangBangInput:
    """Input minimizing ``lam . f``; a zero component selects the lower bound."""
    l1, l2 = float(lam[0]), float(lam[1])
    if l1 == 0.0 and l2 == 0.0:
        raise InvariantViolation("costate vanished; the input realization is undefined")
    return BangBangInput(
        bounds.u1_min if l1 >= 0 else bounds.u1_max,
        bounds.u2_min if l2 >= 0 else bounds.u2_max,
    )


def switching_lines(scenario: Scenario) -> list[SwitchingLine]:
    p, b = scenario.params, scenario.bounds
    return [
        SwitchingLine("L1", "x1", (p.gamma - b.u2_max) / p.delta, 1, b.u1_max, b.u1_min, 2, -1),
        SwitchingLine("L2", "x1", (p.gamma - b.u2_min) / p.delta, 1, b.u1_min, b.u1_max, 2, 1),
        SwitchingLine("L3", "x2", (p.alpha + b.u1_max) / p.beta, 2, b.u2_min, b.u2_max, 1, -1),
        SwitchingLine("L4", "x2", (p.alpha + b.u1_min) / p.beta, 2, b.u2_max, b.u2_min, 1, 1),
    ]


def _augmented_rhs(scenario: Scenario, u):
    p = scenario.params
    u1, u2 = float(u[0]), float(u[1])
    a, bt, g, d = p.alpha, p.beta, p.gamma, p.delta

    def rhs(y):
        x1, x2, l1, l2 = y
        return np.array([
            a * x1 - bt * x1 * x2 + u1 * x1,
            d * x1 * x2 - g * x2 + u2 * x2,
            (-a + bt * x2 - u1) * l1 - d * x2 * l2,
            bt * x1 * l1 + (-d * x1 + g - u2) * l2,
        ])

    return rhs


def _normalize(y: np.ndarray) -> np.ndarray:
    n = math.hypot(y[2], y[3])
    if n == 0.0:
        raise InvariantViolation("costate vanished during integration")
    out = y.copy()
    out[2:] /= n
    return out


def _hamiltonian_ratio(scenario: Scenario, y, u) -> float:
    p = scenario.params
    x1, x2, l1, l2 = y
    f1 = p.alpha * x1 - p.beta * x1 * x2 + u[0] * x1
    f2 = p.delta * x1 * x2 - p.gamma * x2 + u[1] * x2
    return abs(l1 * f1 + l2 * f2) / (1.0 + math.hypot(f1, f2))


def initial_input(tp: TangencyPoint, scenario: Scenario) -> BangBangInput:
    """Input in force just before ``t_bar``.

    A costate component that is zero at the tangency point takes, going
    backward, the sign opposite to its derivative there; the derivative does
    not depend on that component's own input.
    """
    b, p = scenario.bounds, scenario.params
    lam = np.array(tp.lambda_final, dtype=float)
    base = input_realization(lam, b)
    dlam = -np.array([
        (-p.alpha + p.beta * tp.z[1] - base.u1) * lam[0] - p.delta * tp.z[1] * lam[1],
        p.beta * tp.z[0] * lam[0] + (-p.delta * tp.z[0] + p.gamma - base.u2) * lam[1],
    ])
    before = lam.copy()
    for k in (0, 1):
        if lam[k] == 0.0 and dlam[k] != 0.0:
            # backward in time: lam(t_bar - s) ~ lam - s * dlam/dt
            before[k] = dlam[k]
    return input_realization(before, b)


class _SelfCrossing:
    """Detects when the newest path segment touches an older one with the same input."""

    def __init__(self, tol: float, capacity: int = 1024):
        self.tol = tol
        self.n = 0
        self.seg = np.empty((capacity, 4))
        self.mode = np.empty((capacity, 2))

    def add(self, a, b, mode) -> bool:
        n = self.n
        hit = False
        if n > 2:
            old = self.seg[: n - 2]
            lo = np.minimum(a, b) - self.tol
            hi = np.maximum(a, b) + self.tol
            near = ((np.minimum(old[:, 0], old[:, 2]) <= hi[0])
                    & (np.maximum(old[:, 0], old[:, 2]) >= lo[0])
                    & (np.minimum(old[:, 1], old[:, 3]) <= hi[1])
                    & (np.maximum(old[:, 1], old[:, 3]) >= lo[1])
                    & (self.mode[: n - 2, 0] == mode[0])
                    & (self.mode[: n - 2, 1] == mode[1]))
            for k in np.flatnonzero(near):
                if _segment_distance(a, b, old[k, :2], old[k, 2:]) <= self.tol:
                    hit = True
                    break
        if n == len(self.seg):
            self.seg = np.concatenate([self.seg, np.empty_like(self.seg)])
            self.mode = np.concatenate([self.mode, np.empty_like(self.mode)])
        self.seg[n] = (a[0], a[1], b[0], b[1])
        self.mode[n] = mode
        self.n = n + 1
        return hit


def _segment_distance(a, b, c, d) -> float:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2, o3, o4 = orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)
    if (o1 > 0) != (o2 > 0) and (o3 > 0) != (o4 > 0) and o1 * o2 < 0 and o3 * o4 < 0:
        return 0.0

    def point_seg(p, s0, s1):
        v = s1 - s0
        L = float(v @ v)
        t = 0.0 if L == 0 else min(1.0, max(0.0, float((p - s0) @ v) / L))
        return float(np.hypot(*(s0 + t * v - p)))

    return min(point_seg(a, c, d), point_seg(b, c, d), point_seg(c, a, b), point_seg(d, a, b))


def integrate_barrier_backward(tp: TangencyPoint, scenario: Scenario) -> BarrierCurve:
    """Integrate state and costate backward from a tangency point.

    Stops when the state leaves the box through a face, leaves the viewing
    window, reaches the horizon cap, drifts off the zero-Hamiltonian manifold,
    or crosses its own earlier path under the same input.
    """
    if not tp.in_box:
        raise PreconditionError(f"{tp.label} lies outside the constrained box")
    if not tp.exists:
        raise PreconditionError(f"no candidate barrier ends at {tp.label} "
                                f"(existence expression = {tp.existence_value:g})")
    cfg = scenario.numerics
    box, bounds = scenario.box, scenario.bounds
    mode = initial_input(tp, scenario)
    state = {"mode": mode}

    monitors = [
        Monitor("switch_u1", lambda y: y[2], terminal=False),
        Monitor("switch_u2", lambda y: y[3], terminal=False),
    ]
    for i in box.constraint_ids:
        monitors.append(Monitor(f"constraint_hit_{i}",
                                (lambda y, i=i: constraint_value(i, y, box)), terminal=True))
    if cfg.window is not None:
        (_, w1), (_, w2) = cfg.window
        if box.x1_hi is None:
            monitors.append(Monitor("window_exit", lambda y: y[0] - w1, terminal=True))
        if box.x2_hi is None:
            monitors.append(Monitor("window_exit", lambda y: y[1] - w2, terminal=True))
    monitors.append(Monitor(
        "drift_abort",
        lambda y: _hamiltonian_ratio(scenario, y, state["mode"]) - cfg.hamiltonian_drift_tol,
        terminal=True,
    ))

    switches: list[SwitchEvent] = []
    modes_after: dict[int, BangBangInput] = {}

    def on_event(ev: Event):
        new = input_realization(ev.y[2:], bounds)
        old = state["mode"]
        k = 0 if ev.kind == "switch_u1" else 1
        if new[k] == old[k]:
            return None
        # integration runs backward, so the forward-time switch goes new -> old
        switches.append(SwitchEvent(k + 1, new[k], old[k], (ev.y[0], ev.y[1]),
                                    (ev.y[2], ev.y[3]), ev.t))
        state["mode"] = new
        modes_after[len(switches)] = new
        return _augmented_rhs(scenario, new)

    crossing = _SelfCrossing(tol=cfg.close_tol)
    last = {"x": np.array(tp.z, dtype=float)}

    def halt(t, y):
        a, b = last["x"], y[:2].copy()
        last["x"] = b
        if crossing.add(a, b, (state["mode"].u1, state["mode"].u2)):
            return "self_closure"
        return None

    y0 = np.array([tp.z[0], tp.z[1], tp.lambda_final[0], tp.lambda_final[1]], dtype=float)
    poly, events = integrate_with_events(
        _augmented_rhs(scenario, mode), y0, cfg, t0=tp.t_bar, direction=-1,
        monitors=monitors, post_step=_normalize, on_event=on_event, halt=halt,
    )
    terminal = [e for e in events if e.terminal]
    termination = terminal[-1].kind if terminal else "horizon_cap"

    # Labels and inputs per sample, in integration (backward) order.
    n = len(poly.t)
    labels = [""] * n
    event_at = {}
    for e in events:
        idx = int(np.flatnonzero(poly.t == e.t)[-1])
        event_at.setdefault(idx, []).append(e)
    for idx, evs in event_at.items():
        kinds = [e.kind for e in evs if e.terminal or _is_real_switch(e, switches)]
        labels[idx] = ";".join(kinds)
    lam = poly.y[:, 2:]
    u = np.array([tuple(input_realization(l, bounds)) for l in lam])
    u[0] = tuple(input_realization(tp.lambda_final, bounds))
    ham = np.array([_hamiltonian_ratio(scenario, poly.y[k], u[k]) for k in range(n)])

    order = slice(None, None, -1)
    return BarrierCurve(
        origin=tp,
        t=poly.t[order].copy(),
        x=poly.y[order, :2].copy(),
        lam=lam[order].copy(),
        u=u[order].copy(),
        events=labels[::-1],
        switches=switches[::-1],
        termination=termination,
        hamiltonian=ham[order].copy(),
    )


def _is_real_switch(event: Event, switches: list[SwitchEvent]) -> bool:
    return any(s.t == event.t and s.input_index == (1 if event.kind == "switch_u1" else 2)
               for s in switches)


def candidate_curves(scenario: Scenario,
                     points: list[TangencyPoint] | None = None) -> list[BarrierCurve]:
    """Backward curves from every tangency point that passes the existence test."""
    if points is None:
        points = ultimate_tangency_points(scenario)
    return [integrate_barrier_backward(tp, scenario) for tp in points if tp.exists]


def first_backward_step(tp: TangencyPoint, scenario: Scenario) -> np.ndarray:
    """State after a single backward RK4 step from the tangency point."""
    mode = initial_input(tp, scenario)
    rhs = _augmented_rhs(scenario, mode)
    y0 = np.array([tp.z[0], tp.z[1], tp.lambda_final[0], tp.lambda_final[1]], dtype=float)
    return rk4_step(lambda y: -rhs(y), y0, scenario.numerics.step_h)[:2]


def tangency_residual(tp: TangencyPoint, scenario: Scenario) -> float:
    """``min_u L_f g_i(z, u)`` at a tangency point; zero up to rounding."""
    return min(lie_derivative(tp.constraint_id, tp.z, u, scenario.params)
               for u in scenario.bounds.corners)

