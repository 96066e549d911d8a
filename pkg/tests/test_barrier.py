import logging

import numpy as np
import pytest

from barrierkit.barrier import (
    InvariantViolation,
    PreconditionError,
    TangencyPoint,
    candidate_curves,
    existence_check,
    first_backward_step,
    initial_input,
    input_realization,
    integrate_barrier_backward,
    switching_lines,
    tangency_residual,
    ultimate_tangency_points,
)
from barrierkit.model import (
    InputBounds,
    LVParams,
    Scenario,
    StateBox,
    constraint_value,
    lie_derivative,
)
from barrierkit.numerics import IntegratorConfig

from conftest import random_scenario

B5 = InputBounds(10, 20, -20, -10)


def by_label(items):
    return {x.label: x for x in items}


class TestTangencyPoints:
    def test_fig3_points(self, fig3):
        tps = by_label(ultimate_tangency_points(fig3))
        assert tps["z1"].z == pytest.approx((10, 0.9259), abs=1e-4)
        assert tps["z2"].z == pytest.approx((0.5, 1.8519), abs=1e-4)
        assert tps["z3"].z == pytest.approx((20 / 5.94, 10), abs=1e-12)
        assert tps["z4"].z == pytest.approx((10 / 5.94, 0.5), abs=1e-12)
        assert [tps[k].lambda_final for k in ("z1", "z2", "z3", "z4")] == [
            (1, 0), (-1, 0), (0, 1), (0, -1)]

    def test_unbounded_sides_have_no_point(self, fig2):
        assert [tp.label for tp in ultimate_tangency_points(fig2)] == ["z2", "z4"]

    def test_points_outside_box_flagged(self, caplog):
        sc = Scenario(LVParams(0, 10.8, 0, 5.94), B5, StateBox(0.5, 10, 2.0, 10))
        with caplog.at_level(logging.WARNING):
            tps = by_label(ultimate_tangency_points(sc))
        assert not tps["z1"].in_box and not tps["z1"].exists
        assert "outside the constrained box" in caplog.text

    def test_degenerate_input_puts_points_on_axis(self):
        sc = Scenario(LVParams(0.5, 2, 0, 1), InputBounds(-0.5, -0.5, -3, -1),
                      StateBox(0.0, 4, 0.0, 4))
        tps = by_label(ultimate_tangency_points(sc))
        assert tps["z1"].z[1] == 0 and tps["z2"].z[1] == 0

    def test_residual_and_face_membership_on_random_scenarios(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            sc = random_scenario(rng)
            for tp in ultimate_tangency_points(sc):
                assert abs(constraint_value(tp.constraint_id, tp.z, sc.box)) <= 1e-9
                assert abs(tangency_residual(tp, sc)) <= 1e-9 * (1 + max(map(abs, tp.z))) * 30


class TestExistence:
    def test_fig3_values(self, fig3):
        values = {tp.label: existence_check(tp, fig3) for tp in ultimate_tangency_points(fig3)}
        assert values["z1"] == (True, pytest.approx(49.4, abs=1e-9))
        assert values["z2"] == (True, pytest.approx(-17.03, abs=1e-9))
        assert values["z3"] == (True, pytest.approx(-98.0, abs=1e-9))
        assert values["z4"] == (True, pytest.approx(14.6, abs=1e-9))

    def test_strict_inequality_at_zero(self):
        # delta * x1_hi - gamma + u2_max == 0 exactly
        sc = Scenario(LVParams(0, 10.8, 0, 1.0), InputBounds(10, 20, -20, -10),
                      StateBox(0.5, 10, 0.5, 10))
        z1 = by_label(ultimate_tangency_points(sc))["z1"]
        assert z1.existence_value == 0.0 and not z1.exists

    def test_verdict_matches_first_backward_step(self):
        rng = np.random.default_rng(3)
        checked = 0
        logging.disable(logging.WARNING)
        try:
            while checked < 100:
                sc = random_scenario(rng)
                tps = [t for t in ultimate_tangency_points(sc)
                       if t.in_box and abs(t.existence_value) > 1e-2]
                if not tps:
                    continue
                checked += 1
                for tp in tps:
                    x = first_backward_step(tp, sc)
                    enters = constraint_value(tp.constraint_id, x, sc.box) < 0
                    assert enters == tp.exists, (tp, x)
        finally:
            logging.disable(logging.NOTSET)

    def test_backward_integration_needs_existing_point(self, fig3):
        tp = by_label(ultimate_tangency_points(fig3))["z1"]
        missing = TangencyPoint(1, tp.z, tp.lambda_final, False, -1.0)
        with pytest.raises(PreconditionError):
            integrate_barrier_backward(missing, fig3)


class TestInputRealization:
    def test_sign_rule(self):
        assert tuple(input_realization((1, -0.5), B5)) == (10, -10)
        assert tuple(input_realization((0, 1), B5)) == (10, -20)
        assert tuple(input_realization((-2, 3), B5)) == (20, -20)

    def test_zero_costate(self):
        with pytest.raises(InvariantViolation):
            input_realization((0, 0), B5)

    def test_initial_input_from_z1(self, fig3):
        # lambda2 turns negative just before the tangency time, so u2 sits at its maximum
        z1 = by_label(ultimate_tangency_points(fig3))["z1"]
        assert tuple(initial_input(z1, fig3)) == (10, -10)


class TestSwitchingLines:
    def test_positions(self, fig3):
        lines = by_label(switching_lines(fig3))
        assert lines["L1"].value == pytest.approx(1.6835, abs=1e-4)
        assert lines["L2"].value == pytest.approx(3.3670, abs=1e-4)
        tps = by_label(ultimate_tangency_points(fig3))
        assert lines["L3"].value == tps["z2"].z[1]
        assert lines["L4"].value == tps["z1"].z[1]
        assert lines["L1"].value == tps["z4"].z[0]
        assert lines["L2"].value == tps["z3"].z[0]

    def test_singleton_lines_coincide(self):
        sc = Scenario(LVParams(0, 10.8, 0, 5.94), InputBounds(10, 10, -10, -10),
                      StateBox(0.5, 4, 0.5, 3))
        lines = by_label(switching_lines(sc))
        assert lines["L1"].value == lines["L2"].value
        assert lines["L3"].value == lines["L4"].value


class TestCurves:
    def test_fig3_terminations_and_switches(self, fig3_run):
        curves = by_label(fig3_run.curves)
        assert curves["z3"].termination == "constraint_hit_1"
        assert len(curves["z2"].switches) == 1
        s = curves["z2"].switches[0]
        assert s.input_index == 1 and (s.from_level, s.to_level) == (10, 20)
        assert all(c.x[-1] == pytest.approx(c.origin.z, abs=0) for c in fig3_run.curves)

    def test_fig2_curves_and_switch(self, fig2_run):
        curves = by_label(fig2_run.curves)
        assert set(curves) == {"z2", "z4"}
        assert curves["z2"].termination == "window_exit"
        assert len(curves["z2"].switches) >= 1
        assert curves["z4"].termination == "constraint_hit_2"

    def test_stored_input_follows_stored_costate(self, fig3_run):
        for c in fig3_run.curves:
            for k in range(len(c.t) - 1):
                assert tuple(c.u[k]) == tuple(input_realization(c.lam[k], fig3_run.scenario.bounds))

    def test_costate_has_unit_norm(self, fig3_run):
        for c in fig3_run.curves:
            assert np.allclose(np.hypot(c.lam[:, 0], c.lam[:, 1]), 1.0, atol=1e-14)

    def test_time_is_monotone_and_ends_at_tangency(self, fig3_run):
        for c in fig3_run.curves:
            assert np.all(np.diff(c.t) > 0) and c.t[-1] == 0.0

    def test_hamiltonian_small(self, fig3_run, fig2_run):
        for c in fig3_run.curves + fig2_run.curves:
            assert c.max_relative_hamiltonian() <= 1e-5

    def test_switches_on_lines_fig_scenarios(self, fig3_run, fig2_run):
        for run in (fig3_run, fig2_run):
            lines = switching_lines(run.scenario)
            for c in run.curves:
                for s in c.switches:
                    line = s.line(lines)
                    assert line.distance(s.x) <= 1e-6
                    assert np.sign(s.lam[line.adjoint_index - 1]) == line.adjoint_sign

    def test_switches_on_lines_random_scenarios(self):
        rng = np.random.default_rng(7)
        seen = 0
        for _ in range(50):
            sc = random_scenario(rng, all_exist=True)
            lines = switching_lines(sc)
            logging.disable(logging.WARNING)
            try:
                curves = candidate_curves(sc)
            finally:
                logging.disable(logging.NOTSET)
            for c in curves:
                for s in c.switches:
                    line = s.line(lines)
                    assert line.distance(s.x) <= 1e-6
                    assert np.sign(s.lam[line.adjoint_index - 1]) == line.adjoint_sign
                    seen += 1
        assert seen > 20

    def test_window_exit_on_unbounded_box(self):
        sc = Scenario(LVParams(0, 10.8, 0, 5.94), B5, StateBox(0.5, None, 0.5, None),
                      IntegratorConfig(window=((0, 6), (0, 6))))
        z2 = by_label(ultimate_tangency_points(sc))["z2"]
        assert integrate_barrier_backward(z2, sc).termination == "window_exit"

    def test_lie_derivative_of_start_face_is_zero(self, fig3_run):
        for c in fig3_run.curves:
            tp = c.origin
            assert lie_derivative(tp.constraint_id, tp.z, c.u[-1], fig3_run.scenario.params) == \
                pytest.approx(0, abs=1e-12)
