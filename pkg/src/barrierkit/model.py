"""Constrained Lotka-Volterra predator-prey model.

State ``x = (x1, x2)`` is prey and predator biomass in kg, time is in hours.
Inputs ``u = (u1, u2)`` are per-capita intervention rates added to the prey
and predator growth terms::

    x1' = alpha*x1 - beta*x1*x2 + u1*x1
    x2' = delta*x1*x2 - gamma*x2 + u2*x2

The state is kept in an axis-aligned box described by four affine constraint
functions ``g_i(x) <= 0``::

    g1 = x1 - x1_hi     g2 = x1_lo - x1
    g3 = x2 - x2_hi     g4 = x2_lo - x2
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .numerics import IntegratorConfig, Monitor, integrate_with_events

log = logging.getLogger(__name__)

__all__ = [
    "ValidationError",
    "RegionError",
    "DomainError",
    "TOL_ACTIVE",
    "CONSTRAINT_IDS",
    "RawBioParams",
    "LVParams",
    "InputBounds",
    "StateBox",
    "State",
    "Scenario",
    "derive_params",
    "vector_field",
    "jacobian_x",
    "adjoint_rhs",
    "constraint_value",
    "constraint_gradient",
    "lie_derivative",
    "min_max_lie_derivative",
    "active_set",
    "classify_region",
    "first_integral",
    "first_integral_gradient",
    "equilibrium",
    "Trajectory",
    "forward_simulate",
]

TOL_ACTIVE = 1e-9
CONSTRAINT_IDS = (1, 2, 3, 4)

# Dg_i for the four box constraints (constant because the constraints are affine).
_GRADIENTS = {
    1: (1.0, 0.0),
    2: (-1.0, 0.0),
    3: (0.0, 1.0),
    4: (0.0, -1.0),
}


class ValidationError(ValueError):
    """Invalid parameters, bounds, schedules or scenario files."""


class RegionError(ValueError):
    """A state lies outside the constrained box where it must lie inside."""


class DomainError(ValueError):
    """A function was evaluated outside its mathematical domain."""


@dataclass(frozen=True)
class RawBioParams:
    """Biological parameters in the units they are usually reported in.

    k1, k2 are growth times in days, k3 a consumption rate in g/d, k4 and k5
    adult weights in g and eta1 a conversion efficiency.
    """

    k1: float
    k2: float
    k3: float
    k4: float
    k5: float
    eta1: float

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "k4", "k5", "eta1"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"raw_bio.{name} must be strictly positive, got {value!r}")
        if self.eta1 > 1:
            raise ValidationError(f"raw_bio.eta1 must lie in (0, 1], got {self.eta1!r}")


@dataclass(frozen=True)
class LVParams:
    alpha: float
    beta: float
    gamma: float
    delta: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"params.{name} must be finite")
        if self.alpha < 0 or self.gamma < 0:
            raise ValidationError("params.alpha and params.gamma must be >= 0")
        if self.beta <= 0 or self.delta <= 0:
            raise ValidationError("params.beta and params.delta must be > 0")


@dataclass(frozen=True)
class InputBounds:
    u1_min: float
    u1_max: float
    u2_min: float
    u2_max: float

    def __post_init__(self):
        for name in ("u1_min", "u1_max", "u2_min", "u2_max"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"input_bounds.{name} must be finite")
        if self.u1_min > self.u1_max:
            raise ValidationError("input_bounds.u1: min exceeds max")
        if self.u2_min > self.u2_max:
            raise ValidationError("input_bounds.u2: min exceeds max")

    @classmethod
    def from_pairs(cls, u1: Sequence[float], u2: Sequence[float]) -> "InputBounds":
        """Build bounds from ``[a, b]`` pairs, sorting reversed pairs with a warning."""
        pairs = []
        for name, pair in (("u1", u1), ("u2", u2)):
            if len(pair) != 2:
                raise ValidationError(f"input_bounds.{name} must be a [min, max] pair")
            lo, hi = float(pair[0]), float(pair[1])
            if lo > hi:
                log.warning("input_bounds.%s given as [%g, %g]; normalized to [%g, %g]",
                            name, lo, hi, hi, lo)
                lo, hi = hi, lo
            pairs.append((lo, hi))
        return cls(pairs[0][0], pairs[0][1], pairs[1][0], pairs[1][1])

    @property
    def corners(self) -> list[tuple[float, float]]:
        """The four saturated inputs, in a fixed order."""
        return [
            (self.u1_min, self.u2_min),
            (self.u1_min, self.u2_max),
            (self.u1_max, self.u2_min),
            (self.u1_max, self.u2_max),
        ]

    @property
    def is_singleton(self) -> bool:
        return self.u1_min == self.u1_max and self.u2_min == self.u2_max

    def contains(self, u: Sequence[float], tol: float = 0.0) -> bool:
        return (self.u1_min - tol <= u[0] <= self.u1_max + tol
                and self.u2_min - tol <= u[1] <= self.u2_max + tol)


@dataclass(frozen=True)
class StateBox:
    """Box constraints. ``None`` as an upper bound means unbounded."""

    x1_lo: float
    x1_hi: float | None
    x2_lo: float
    x2_hi: float | None

    def __post_init__(self):
        for name, lo, hi in (("x1", self.x1_lo, self.x1_hi), ("x2", self.x2_lo, self.x2_hi)):
            if not (math.isfinite(lo) and lo >= 0):
                raise ValidationError(f"state_box.{name} lower bound must be finite and >= 0")
            if hi is not None and not (math.isfinite(hi) and hi > lo):
                raise ValidationError(f"state_box.{name} upper bound must exceed the lower bound")

    @property
    def bounded(self) -> bool:
        return self.x1_hi is not None and self.x2_hi is not None

    def has_constraint(self, i: int) -> bool:
        if i == 1:
            return self.x1_hi is not None
        if i == 3:
            return self.x2_hi is not None
        return i in (2, 4)

    @property
    def constraint_ids(self) -> tuple[int, ...]:
        return tuple(i for i in CONSTRAINT_IDS if self.has_constraint(i))


@dataclass(frozen=True)
class State:
    x1: float
    x2: float
    t: float = 0.0

    def __post_init__(self):
        if self.x1 < 0 or self.x2 < 0:
            raise DomainError(f"biomass must be nonnegative, got ({self.x1}, {self.x2})")

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x1, self.x2)


@dataclass(frozen=True)
class Scenario:
    params: LVParams
    bounds: InputBounds
    box: StateBox
    numerics: IntegratorConfig = field(default_factory=IntegratorConfig)
    label: str = ""

    def __post_init__(self):
        if not self.box.bounded:
            if self.numerics.window is None:
                raise ValidationError("an unbounded state box requires a viewing window")
            (w1lo, w1hi), (w2lo, w2hi) = self.numerics.window
            if self.box.x1_hi is None and w1hi <= self.box.x1_lo:
                raise ValidationError("window.x1 upper edge must exceed the x1 lower bound")
            if self.box.x2_hi is None and w2hi <= self.box.x2_lo:
                raise ValidationError("window.x2 upper edge must exceed the x2 lower bound")

    @property
    def view_rect(self) -> tuple[float, float, float, float]:
        """``(x1_lo, x1_hi, x2_lo, x2_hi)`` with unbounded sides cut at the window."""
        box = self.box
        x1_hi = box.x1_hi if box.x1_hi is not None else self.numerics.window[0][1]
        x2_hi = box.x2_hi if box.x2_hi is not None else self.numerics.window[1][1]
        return (box.x1_lo, x1_hi, box.x2_lo, x2_hi)


def derive_params(raw: RawBioParams) -> LVParams:
    """Convert biological parameters to model rates in kg and hours."""
    alpha = 1.0 / (24.0 * raw.k1)
    gamma = 1.0 / (24.0 * raw.k2)
    beta = raw.k3 * 1000.0 / (24.0 * raw.k4 * raw.k5)
    return LVParams(alpha=alpha, beta=beta, gamma=gamma, delta=raw.eta1 * beta)


def vector_field(x, u, p: LVParams) -> np.ndarray:
    x1, x2 = float(x[0]), float(x[1])
    u1, u2 = float(u[0]), float(u[1])
    return np.array([
        p.alpha * x1 - p.beta * x1 * x2 + u1 * x1,
        p.delta * x1 * x2 - p.gamma * x2 + u2 * x2,
    ])


def jacobian_x(x, u, p: LVParams) -> np.ndarray:
    x1, x2 = float(x[0]), float(x[1])
    return np.array([
        [p.alpha - p.beta * x2 + u[0], -p.beta * x1],
        [p.delta * x2, p.delta * x1 - p.gamma + u[1]],
    ])


def adjoint_rhs(x, lam, u, p: LVParams) -> np.ndarray:
    """Right-hand side of the costate equation, ``-J(x, u)^T lam``."""
    x1, x2 = float(x[0]), float(x[1])
    l1, l2 = float(lam[0]), float(lam[1])
    return np.array([
        (-p.alpha + p.beta * x2 - u[0]) * l1 - p.delta * x2 * l2,
        p.beta * x1 * l1 + (-p.delta * x1 + p.gamma - u[1]) * l2,
    ])


def _check_id(i: int) -> None:
    if i not in _GRADIENTS:
        raise ValueError(f"constraint id must be one of 1..4, got {i!r}")


def constraint_value(i: int, x, box: StateBox) -> float:
    """``g_i(x)``; ``-inf`` for an unbounded side."""
    _check_id(i)
    if i == 1:
        return -math.inf if box.x1_hi is None else float(x[0]) - box.x1_hi
    if i == 2:
        return box.x1_lo - float(x[0])
    if i == 3:
        return -math.inf if box.x2_hi is None else float(x[1]) - box.x2_hi
    return box.x2_lo - float(x[1])


def constraint_gradient(i: int) -> tuple[float, float]:
    _check_id(i)
    return _GRADIENTS[i]


def lie_derivative(i: int, x, u, p: LVParams, box: StateBox | None = None) -> float:
    """``L_f g_i(x, u) = Dg_i(x) f(x, u)``.

    ``box`` is accepted for symmetry with the other constraint helpers; the
    constraints are affine so their gradients do not depend on it.
    """
    _check_id(i)
    g = _GRADIENTS[i]
    f = vector_field(x, u, p)
    return g[0] * f[0] + g[1] * f[1]


def min_max_lie_derivative(x, active: Iterable[int], p: LVParams, bounds: InputBounds) -> float:
    """``min_u max_{i in active} L_f g_i(x, u)``.

    Each ``L_f g_i`` is affine in u and depends on a single input component,
    so the minimum over the input box is attained at one of its corners.
    """
    active = tuple(active)
    if not active:
        raise ValueError("no active constraints")
    return min(max(lie_derivative(i, x, u, p) for i in active) for u in bounds.corners)


def active_set(x, box: StateBox, tol: float = TOL_ACTIVE) -> frozenset[int]:
    values = {i: constraint_value(i, x, box) for i in CONSTRAINT_IDS}
    if any(v > tol for v in values.values()):
        raise RegionError(f"state ({x[0]}, {x[1]}) is outside the constrained box")
    return frozenset(i for i, v in values.items() if abs(v) <= tol)


def classify_region(x, box: StateBox, tol: float = TOL_ACTIVE) -> str:
    """One of ``"G_minus"``, ``"G_zero"`` or ``"outside_G"``."""
    values = [constraint_value(i, x, box) for i in CONSTRAINT_IDS]
    if any(v > tol for v in values):
        return "outside_G"
    if any(abs(v) <= tol for v in values):
        return "G_zero"
    return "G_minus"


def equilibrium(p: LVParams, u) -> tuple[float, float]:
    """Interior equilibrium of the constant-input system (may be nonpositive)."""
    return ((p.gamma - u[1]) / p.delta, (p.alpha + u[0]) / p.beta)


def first_integral(x, p: LVParams, u) -> float:
    """Conserved quantity of the constant-input flow.

    Not part of the barrier construction; used as an independent check of
    integrators and to build the invariant set when the input is fixed.
    """
    x1, x2 = float(x[0]), float(x[1])
    if x1 <= 0 or x2 <= 0:
        raise DomainError("first integral is undefined on the axes")
    return (p.delta * x1 - (p.gamma - u[1]) * math.log(x1)
            + p.beta * x2 - (p.alpha + u[0]) * math.log(x2))


def first_integral_gradient(x, p: LVParams, u) -> np.ndarray:
    x1, x2 = float(x[0]), float(x[1])
    if x1 <= 0 or x2 <= 0:
        raise DomainError("first integral is undefined on the axes")
    return np.array([p.delta - (p.gamma - u[1]) / x1, p.beta - (p.alpha + u[0]) / x2])


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    violation_time: float | None = None
    violated_constraint: int | None = None

    @property
    def violated(self) -> bool:
        return self.violation_time is not None


def _normalize_schedule(schedule, bounds: InputBounds) -> list[tuple[float, float, float]]:
    """Accept ``[(t_start, u1, u2), ...]`` or a constant ``(u1, u2)`` pair."""
    if len(schedule) == 2 and np.isscalar(schedule[0]):
        schedule = [(0.0, schedule[0], schedule[1])]
    segments = sorted((float(t), float(a), float(b)) for t, a, b in schedule)
    if not segments:
        raise ValidationError("empty input schedule")
    for t, a, b in segments:
        if not bounds.contains((a, b), tol=1e-12):
            raise ValidationError(f"schedule value ({a}, {b}) at t={t} is outside the input bounds")
    return segments


def forward_simulate(x0, schedule, T: float, scenario: Scenario) -> Trajectory:
    """Integrate under a piecewise-constant input until ``T`` or the first constraint exit.

    ``schedule`` is a list of ``(t_start, u1, u2)`` rows (the first row's input
    also applies before its start time) or a single constant ``(u1, u2)`` pair.
    """
    box, p, cfg = scenario.box, scenario.params, scenario.numerics
    if classify_region(x0, box) == "outside_G":
        raise RegionError(f"initial state ({x0[0]}, {x0[1]}) is outside the constrained box")
    if T <= 0:
        raise ValidationError("horizon must be positive")
    segments = _normalize_schedule(schedule, scenario.bounds)

    monitors = [
        Monitor(f"constraint_hit_{i}", (lambda y, i=i: constraint_value(i, y, box)), terminal=True)
        for i in box.constraint_ids
    ]
    ts, xs, us = [0.0], [np.asarray(x0[:2], dtype=float)], []
    y = xs[0].copy()
    t = 0.0
    violation = None
    for k, (_, u1, u2) in enumerate(segments):
        t_end = segments[k + 1][0] if k + 1 < len(segments) else T
        t_end = min(t_end, T)
        if t_end <= t:
            continue
        u = (u1, u2)
        seg_cfg = cfg.replace(max_arc_time=t_end - t)
        poly, events = integrate_with_events(
            lambda z, u=u: vector_field(z, u, p), y, seg_cfg, t0=t, monitors=monitors,
        )
        ts.extend(poly.t[1:])
        xs.extend(poly.y[1:])
        us.extend([u] * (len(poly.t) - 1))
        y, t = poly.y[-1].copy(), poly.t[-1]
        hit = [e for e in events if e.kind.startswith("constraint_hit")]
        if hit:
            violation = hit[0]
            break
        if t >= T:
            break
    us.insert(0, us[0] if us else (segments[0][1], segments[0][2]))
    traj = Trajectory(np.array(ts), np.array(xs), np.array(us))
    if violation is not None:
        traj.violation_time = violation.t
        traj.violated_constraint = int(violation.kind.rsplit("_", 1)[1])
    return traj
