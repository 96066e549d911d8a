"""Fixed-step RK4 integration with bisection-localized events.

Integration always advances in fixed steps of ``step_h``.  Scalar monitors
are evaluated after every step; when one changes sign the crossing is
re-integrated from the start of the step with shorter single RK4 steps and
bisected until the bracket is narrower than ``event_time_tol``.  The state
reported for an event is the right end of the final bracket, so the monitor
already carries its post-crossing sign there.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "NumericalOverflowError",
    "IntegratorConfig",
    "Monitor",
    "Event",
    "Polyline",
    "rk4_step",
    "integrate_with_events",
    "TERMINAL_KINDS",
]

TERMINAL_KINDS = ("constraint_hit", "window_exit", "horizon_cap", "drift_abort", "self_closure")


class NumericalOverflowError(ArithmeticError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    """Numerical settings shared by every integration in a scenario.

    ``window`` is ``((x1_lo, x1_hi), (x2_lo, x2_hi))`` and is only needed when
    the state box has an unbounded side.  The geometric tolerances at the end
    are used by candidate filtering, boundary assembly and membership tests.
    """

    step_h: float = 1e-3
    event_time_tol: float = 1e-10
    max_arc_time: float = 50.0
    hamiltonian_drift_tol: float = 1e-3
    window: tuple[tuple[float, float], tuple[float, float]] | None = None
    boundary_tol: float = 1e-4
    junction_tol: float = 1e-6
    filter_resolution: float = 1e-3
    close_tol: float = 1e-6

    def __post_init__(self):
        from .model import ValidationError

        if not (self.step_h > 0 and math.isfinite(self.step_h)):
            raise ValidationError("numerics.step_h must be positive")
        if not (0 < self.event_time_tol < self.step_h):
            raise ValidationError("numerics.event_time_tol must lie in (0, step_h)")
        if not self.max_arc_time > 0:
            raise ValidationError("numerics.max_arc_time must be positive")
        if not self.hamiltonian_drift_tol > 0:
            raise ValidationError("numerics.hamiltonian_drift_tol must be positive")
        if self.window is not None:
            win = tuple(tuple(float(v) for v in pair) for pair in self.window)
            if len(win) != 2 or any(len(pair) != 2 or not pair[0] < pair[1] for pair in win):
                raise ValidationError("window must be {x1: [lo, hi], x2: [lo, hi]} with lo < hi")
            object.__setattr__(self, "window", win)

    def replace(self, **changes) -> "IntegratorConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Monitor:
    """A continuous scalar function of the state whose sign changes are events."""

    kind: str
    fn: Callable[[np.ndarray], float]
    terminal: bool = False


@dataclass(frozen=True)
class Event:
    kind: str
    t: float
    y: np.ndarray
    terminal: bool = True


@dataclass
class Polyline:
    """Time samples ``t[k]`` with state rows ``y[k]``."""

    t: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def rk4_step(rhs: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of an autonomous system; ``h < 0`` steps backward."""
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericalOverflowError(f"non-finite state after RK4 step of size {h}")
    return out


def _crossed(before: float, after: float) -> bool:
    return before != 0.0 and (after == 0.0 or (before > 0.0) != (after > 0.0))


def _bisect(rhs, y0, h, monitor, before, tol):
    lo, hi = 0.0, h
    y_hi = None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        y_mid = rk4_step(rhs, y0, mid)
        if _crossed(before, monitor.fn(y_mid)):
            hi, y_hi = mid, y_mid
        else:
            lo = mid
    if y_hi is None:
        y_hi = rk4_step(rhs, y0, hi)
    return hi, y_hi


def integrate_with_events(
    rhs: Callable[[np.ndarray], np.ndarray],
    y0,
    config: IntegratorConfig,
    *,
    t0: float = 0.0,
    direction: int = 1,
    monitors: Sequence[Monitor] = (),
    post_step: Callable[[np.ndarray], np.ndarray] | None = None,
    on_event: Callable[[Event], Callable | None] | None = None,
    halt: Callable[[float, np.ndarray], str | None] | None = None,
) -> tuple[Polyline, list[Event]]:
    """Integrate ``y' = rhs(y)`` from ``t0`` for at most ``config.max_arc_time``.

    ``direction=-1`` integrates backward in time by stepping the negated
    right-hand side forward; reported times then decrease from ``t0``.

    Non-terminal events are recorded and integration resumes from the event
    state; ``on_event`` may return a replacement right-hand side (used for
    input switches).  A terminal event, ``halt`` returning a kind, or hitting
    the horizon ends the run with the event state as the final sample.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    h = config.step_h
    tol = config.event_time_tol
    horizon = config.max_arc_time

    def oriented(f):
        return f if direction == 1 else (lambda y: -f(y))

    F = oriented(rhs)
    y = np.array(y0, dtype=float)
    elapsed = 0.0
    ts = [t0]
    ys = [y.copy()]
    events: list[Event] = []
    values = [m.fn(y) for m in monitors]

    def record(kind, s, yy, terminal):
        ev = Event(kind, t0 + direction * s, yy.copy(), terminal)
        events.append(ev)
        return ev

    while True:
        step = min(h, horizon - elapsed)
        if step <= 0:
            record("horizon_cap", elapsed, y, True)
            break
        y_new = rk4_step(F, y, step)
        if post_step is not None:
            y_new = post_step(y_new)
        new_values = [m.fn(y_new) for m in monitors]
        crossings = [k for k, m in enumerate(monitors) if _crossed(values[k], new_values[k])]
        if crossings:
            located = sorted(
                (_bisect(F, y, step, monitors[k], values[k], tol) + (k,) for k in crossings),
                key=lambda item: (item[0], item[2]),
            )
            tau, y_ev, _ = located[0]
            if post_step is not None:
                y_ev = post_step(y_ev)
            ev_values = [m.fn(y_ev) for m in monitors]
            fired = [k for k in range(len(monitors)) if _crossed(values[k], ev_values[k])]
            elapsed += tau
            y = y_ev
            ts.append(t0 + direction * elapsed)
            ys.append(y.copy())
            stop = False
            for k in fired:
                ev = record(monitors[k].kind, elapsed, y, monitors[k].terminal)
                stop = stop or monitors[k].terminal
                if not monitors[k].terminal and on_event is not None:
                    replacement = on_event(ev)
                    if replacement is not None:
                        F = oriented(replacement)
            if stop:
                break
            values = ev_values
        else:
            elapsed += step
            y = y_new
            values = new_values
            ts.append(t0 + direction * elapsed)
            ys.append(y.copy())
        if halt is not None:
            kind = halt(ts[-1], y)
            if kind is not None:
                record(kind, elapsed, y, True)
                break
        if elapsed >= horizon:
            record("horizon_cap", elapsed, y, True)
            break
    return Polyline(np.array(ts), np.array(ys)), events
