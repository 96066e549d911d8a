import copy
import json
import logging

import pytest

from barrierkit.model import ValidationError
from barrierkit.scenario import (
    bundled_scenarios,
    load_scenario,
    parse_scenario,
    resolve_scenario_path,
    scenario_to_dict,
)

BASE = {
    "params": {"alpha": 0, "beta": 10.8, "gamma": 0, "delta": 5.94},
    "input_bounds": {"u1": [10, 20], "u2": [-20, -10]},
    "state_box": {"x1": [0.5, 10], "x2": [0.5, 10]},
}


def edited(**changes):
    doc = copy.deepcopy(BASE)
    for key, value in changes.items():
        if value is None:
            doc.pop(key, None)
        else:
            doc[key] = value
    return doc


@pytest.mark.parametrize("doc, field", [
    (edited(params=None), "params"),
    (edited(raw_bio={"k1": 1, "k2": 1, "k3": 1, "k4": 1, "k5": 1, "eta1": 0.5}), "params"),
    (edited(params={"alpha": 0, "beta": "x", "gamma": 0, "delta": 1}), "params.beta"),
    (edited(params={"alpha": 0, "beta": 1, "gamma": 0}), "delta"),
    (edited(input_bounds={"u1": [1], "u2": [0, 1]}), "input_bounds.u1"),
    (edited(state_box={"x1": [0.5, 10], "x3": [0, 1]}), "state_box"),
    (edited(state_box={"x1": [0.5, None], "x2": [0.5, 10]}), "window"),
    (edited(numerics={"step": 0.1}), "numerics"),
    (edited(colour="red"), "colour"),
    (edited(overrides={"zero_alpha_gamma": "yes"}), "zero_alpha_gamma"),
])
def test_errors_name_the_field(doc, field):
    with pytest.raises(ValidationError, match=field):
        parse_scenario(doc)


def test_non_finite_rejected():
    with pytest.raises(ValidationError, match="finite"):
        parse_scenario(edited(params={"alpha": 0, "beta": float("inf"), "gamma": 0, "delta": 1}))


def test_raw_bio_with_override():
    sc = load_scenario("fig3_raw.json")
    assert sc.params.alpha == 0 and sc.params.gamma == 0
    assert sc.params.beta == pytest.approx(10.9127, abs=1e-4)
    assert (sc.bounds.u2_min, sc.bounds.u2_max) == (-20, -10)


def test_reversed_pair_warns(caplog):
    with caplog.at_level(logging.WARNING):
        sc = parse_scenario(edited(input_bounds={"u1": [20, 10], "u2": [-20, -10]}))
    assert (sc.bounds.u1_min, sc.bounds.u1_max) == (10, 20)
    assert "u1" in caplog.text


@pytest.mark.parametrize("name", ["fig3.json", "fig2.json", "singleton.json", "fig3_raw.json"])
def test_round_trip(name):
    sc = load_scenario(name)
    again = parse_scenario(json.loads(json.dumps(scenario_to_dict(sc))))
    assert again == sc


def test_bundled_lookup(tmp_path):
    assert {"fig2.json", "fig3.json", "singleton.json"} <= set(bundled_scenarios())
    assert resolve_scenario_path("fig3.json").is_file()
    with pytest.raises(ValidationError, match="not found"):
        resolve_scenario_path(tmp_path / "nope.json")


def test_malformed_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ValidationError, match="invalid JSON"):
        load_scenario(bad)


def test_fig2_window():
    sc = load_scenario("fig2.json")
    assert sc.box.x1_hi is None and sc.box.x2_hi is None
    assert sc.numerics.window == ((0, 12), (0, 12))
