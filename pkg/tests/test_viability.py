import numpy as np
import pytest

from barrierkit.model import RegionError, forward_simulate
from barrierkit.viability import default_seed, verify_point_viability, verify_points_viability


def test_equilibrium_is_viable(fig3):
    # constant (10, -20) rests at (20/5.94, 10/10.8), inside the box
    report = verify_point_viability((20 / 5.94, 10 / 10.8), fig3, horizon=5, n_samples=50, seed=1)
    assert report.verdict == "some_viable"
    assert 1 <= report.n_viable <= 50
    assert not forward_simulate(report.point, report.witness, 5, fig3).violated


def test_point_outside_box_rejected(fig3):
    with pytest.raises(RegionError):
        verify_point_viability((0.4, 1), fig3, horizon=1, n_samples=5)


def test_far_outside_point_violates(fig3):
    report = verify_point_viability((9.8, 9.8), fig3, horizon=5, n_samples=50, seed=3)
    assert report.verdict == "all_violate"
    assert report.n_viable == 0 and report.witness == []
    assert 0 < report.last_violation_time <= 5


def test_seed_determines_result(fig3):
    a = verify_point_viability((3, 1), fig3, horizon=3, n_samples=40, seed=9)
    b = verify_point_viability((3, 1), fig3, horizon=3, n_samples=40, seed=9)
    assert a == b and a.witness == b.witness


def test_env_seed(monkeypatch, fig3):
    monkeypatch.setenv("BARRIERKIT_SEED", "123")
    assert default_seed() == 123
    assert verify_point_viability((3, 1), fig3, horizon=1, n_samples=5).seed == 123
    monkeypatch.delenv("BARRIERKIT_SEED")
    assert default_seed() == 42


def test_result_does_not_depend_on_batch(fig3):
    pts = [(3, 1), (5, 1.5), (2, 2)]
    together = verify_points_viability(pts, fig3, horizon=3, n_samples=30, seed=4)
    first = verify_points_viability(pts[:1], fig3, horizon=3, n_samples=30, seed=4)
    assert together[0] == first[0]


def test_invalid_arguments(fig3):
    with pytest.raises(ValueError):
        verify_point_viability((3, 1), fig3, horizon=0)
    with pytest.raises(ValueError):
        verify_point_viability((3, 1), fig3, n_samples=0)


def test_report_dict(fig3):
    d = verify_point_viability((3, 1), fig3, horizon=1, n_samples=5, seed=2).to_dict()
    assert set(d) == {"point", "n_samples", "n_viable", "horizon", "seed", "verdict",
                      "last_violation_time", "witness_switches"}
    assert d["verdict"] in ("some_viable", "all_violate")
    assert np.isfinite(d["horizon"])
