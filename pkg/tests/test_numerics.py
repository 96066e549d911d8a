import math

import numpy as np
import pytest

from barrierkit.model import ValidationError, first_integral, vector_field
from barrierkit.mrpi import orbit_period
from barrierkit.numerics import (
    IntegratorConfig,
    Monitor,
    NumericalOverflowError,
    integrate_with_events,
    rk4_step,
)
from barrierkit.scenario import load_scenario


def test_zero_rhs_leaves_state_unchanged():
    y = np.array([1.5, -2.0])
    assert np.array_equal(rk4_step(lambda v: np.zeros_like(v), y, 0.3), y)


def test_exponential_step_matches_taylor_polynomial():
    y1 = rk4_step(lambda v: v, np.array([1.0]), 0.1)[0]
    taylor = sum(0.1 ** k / math.factorial(k) for k in range(5))
    assert y1 == pytest.approx(taylor, abs=1e-15)
    assert y1 == pytest.approx(1.105170833, abs=1e-9)
    assert abs(y1 - math.exp(0.1)) < 0.1 ** 5 / 120 * 1.2


def test_backward_then_forward_returns_to_start():
    f = lambda v: np.array([v[1], -math.sin(v[0])])  # noqa: E731
    y0 = np.array([0.7, 0.2])
    h = 0.05
    back = rk4_step(f, y0, -h)
    assert np.max(np.abs(rk4_step(f, back, h) - y0)) < h ** 5


def test_overflow_raises():
    with np.errstate(over="ignore"), pytest.raises(NumericalOverflowError):
        rk4_step(lambda v: v ** 2, np.array([1e200]), 1.0)


def _end_error(h):
    cfg = IntegratorConfig(step_h=h, event_time_tol=h / 10, max_arc_time=1.0)
    f = lambda v: np.array([v[1], -v[0]])  # noqa: E731
    poly, _ = integrate_with_events(f, [1.0, 0.0], cfg)
    return abs(poly.y[-1, 0] - math.cos(1.0)) + abs(poly.y[-1, 1] + math.sin(1.0))


def test_fourth_order_convergence():
    ratio = _end_error(0.02) / _end_error(0.01)
    assert 12 <= ratio <= 20


def test_linear_crossing_localized_to_tolerance():
    cfg = IntegratorConfig(step_h=0.01, event_time_tol=1e-10, max_arc_time=5.0)
    c = 1.2345678
    poly, events = integrate_with_events(
        lambda v: np.array([1.0]), [0.0], cfg,
        monitors=[Monitor("hit", lambda v: v[0] - c, terminal=True)])
    assert [e.kind for e in events] == ["hit"]
    assert abs(events[0].t - c) <= cfg.event_time_tol
    assert poly.t[-1] == events[0].t
    assert poly.y[-1, 0] >= c


def test_no_crossing_runs_full_horizon():
    cfg = IntegratorConfig(step_h=0.01, max_arc_time=0.5)
    poly, events = integrate_with_events(
        lambda v: -v, [1.0], cfg, monitors=[Monitor("neg", lambda v: v[0], terminal=True)])
    assert [e.kind for e in events] == ["horizon_cap"]
    assert poly.t[-1] == pytest.approx(0.5)
    assert np.all(np.diff(poly.t) > 0)
    assert np.max(np.diff(poly.t)) <= cfg.step_h + 1e-15


def test_two_crossings_in_one_step_are_ordered():
    cfg = IntegratorConfig(step_h=0.1, event_time_tol=1e-12, max_arc_time=1.0)
    a, b = 0.537, 0.512
    poly, events = integrate_with_events(
        lambda v: np.array([1.0]), [0.0], cfg,
        monitors=[Monitor("a", lambda v: v[0] - a), Monitor("b", lambda v: v[0] - b)])
    crossings = [e for e in events if e.kind in "ab"]
    assert [e.kind for e in crossings] == ["b", "a"]
    assert crossings[0].t == pytest.approx(b, abs=1e-11)
    assert crossings[1].t == pytest.approx(a, abs=1e-11)


def test_backward_direction_reports_decreasing_time():
    cfg = IntegratorConfig(step_h=0.01, event_time_tol=1e-12, max_arc_time=3.0)
    poly, events = integrate_with_events(
        lambda v: np.array([1.0]), [0.0], cfg, direction=-1,
        monitors=[Monitor("low", lambda v: v[0] + 0.75, terminal=True)])
    assert events[0].t == pytest.approx(-0.75, abs=1e-11)
    assert np.all(np.diff(poly.t) < 0)


def test_on_event_swaps_right_hand_side():
    cfg = IntegratorConfig(step_h=0.01, event_time_tol=1e-12, max_arc_time=1.0)
    poly, events = integrate_with_events(
        lambda v: np.array([1.0]), [0.0], cfg,
        monitors=[Monitor("turn", lambda v: v[0] - 0.25)],
        on_event=lambda ev: (lambda v: np.array([-1.0])))
    assert poly.y[-1, 0] == pytest.approx(0.25 - 0.75, abs=1e-9)


def test_repeat_runs_are_bit_identical():
    cfg = IntegratorConfig(step_h=0.003, max_arc_time=2.0)
    f = lambda v: np.array([v[1], -math.sin(v[0])])  # noqa: E731
    a, _ = integrate_with_events(f, [1.0, 0.0], cfg)
    b, _ = integrate_with_events(f, [1.0, 0.0], cfg)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.t, b.t)


def test_first_integral_conserved_over_one_period():
    sc = load_scenario("singleton.json")
    u = (sc.bounds.u1_min, sc.bounds.u2_min)
    x0 = np.array([1.2, 1.3])
    period = orbit_period(x0, sc, u)
    cfg = IntegratorConfig(step_h=1e-3, max_arc_time=period)
    poly, _ = integrate_with_events(lambda y: vector_field(y, u, sc.params), x0, cfg)
    v = np.array([first_integral(x, sc.params, u) for x in poly.y])
    assert np.max(np.abs(v - v[0])) / abs(v[0]) <= 1e-6
    assert np.hypot(*(poly.y[-1] - x0)) < 1e-6


@pytest.mark.parametrize("kwargs", [
    dict(step_h=0.0), dict(step_h=1e-3, event_time_tol=1e-2), dict(max_arc_time=-1.0),
    dict(hamiltonian_drift_tol=0.0), dict(window=((0, 1), (2, 1))),
])
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        IntegratorConfig(**kwargs)
