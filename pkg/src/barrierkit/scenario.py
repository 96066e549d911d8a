"""Scenario files: JSON in, validated :class:`Scenario` out.

Example::

    {
      "label": "fig3",
      "params": {"alpha": 0, "beta": 10.8, "gamma": 0, "delta": 5.94},
      "input_bounds": {"u1": [10, 20], "u2": [-20, -10]},
      "state_box": {"x1": [0.5, 10], "x2": [0.5, 10]},
      "numerics": {"step_h": 0.001}
    }

``raw_bio`` may replace ``params``; ``overrides.zero_alpha_gamma`` then sets
the two intrinsic rates to zero after derivation.  A ``null`` upper bound
makes that side of the box unbounded, which requires a ``window``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, fields
from importlib import resources
from pathlib import Path

from .model import (
    InputBounds,
    LVParams,
    RawBioParams,
    Scenario,
    StateBox,
    ValidationError,
    derive_params,
)
from .numerics import IntegratorConfig

__all__ = ["parse_scenario", "load_scenario", "scenario_to_dict", "bundled_scenarios",
           "resolve_scenario_path"]

TOP_KEYS = {"label", "params", "raw_bio", "overrides", "input_bounds", "state_box",
            "window", "numerics"}
NUMERIC_KEYS = {f.name for f in fields(IntegratorConfig)} - {"window"}


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{where} must be finite")
    return value


def _mapping(doc, key: str, required=True) -> dict | None:
    value = doc.get(key)
    if value is None:
        if required:
            raise ValidationError(f"missing required field '{key}'")
        return None
    if not isinstance(value, dict):
        raise ValidationError(f"'{key}' must be an object")
    return value


def _pair(value, where: str, allow_null_hi=False) -> tuple[float, float | None]:
    if not isinstance(value, list) or len(value) != 2:
        raise ValidationError(f"{where} must be a two-element list")
    lo = _number(value[0], f"{where}[0]")
    if value[1] is None and allow_null_hi:
        return lo, None
    return lo, _number(value[1], f"{where}[1]")


def _fields(obj: dict, names, where: str) -> dict:
    unknown = set(obj) - set(names)
    if unknown:
        raise ValidationError(f"unknown field(s) in '{where}': {', '.join(sorted(unknown))}")
    missing = [n for n in names if n not in obj]
    if missing:
        raise ValidationError(f"missing field(s) in '{where}': {', '.join(missing)}")
    return {n: _number(obj[n], f"{where}.{n}") for n in names}


def parse_scenario(doc: dict) -> Scenario:
    """Validate a decoded scenario document; errors name the offending field."""
    if not isinstance(doc, dict):
        raise ValidationError("scenario must be a JSON object")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown top-level field(s): {', '.join(sorted(unknown))}")
    if ("params" in doc) == ("raw_bio" in doc):
        raise ValidationError("exactly one of 'params' and 'raw_bio' must be given")

    overrides = _mapping(doc, "overrides", required=False) or {}
    extra = set(overrides) - {"zero_alpha_gamma"}
    if extra:
        raise ValidationError(f"unknown override(s): {', '.join(sorted(extra))}")
    zero = overrides.get("zero_alpha_gamma", False)
    if not isinstance(zero, bool):
        raise ValidationError("overrides.zero_alpha_gamma must be true or false")

    if "params" in doc:
        params = LVParams(**_fields(_mapping(doc, "params"), ("alpha", "beta", "gamma", "delta"),
                                    "params"))
    else:
        raw = RawBioParams(**_fields(_mapping(doc, "raw_bio"),
                                     ("k1", "k2", "k3", "k4", "k5", "eta1"), "raw_bio"))
        params = derive_params(raw)
    if zero:
        params = LVParams(0.0, params.beta, 0.0, params.delta)

    ib = _mapping(doc, "input_bounds")
    if set(ib) != {"u1", "u2"}:
        raise ValidationError("input_bounds must have exactly the fields 'u1' and 'u2'")
    bounds = InputBounds.from_pairs(_pair(ib["u1"], "input_bounds.u1"),
                                    _pair(ib["u2"], "input_bounds.u2"))

    sb = _mapping(doc, "state_box")
    if set(sb) != {"x1", "x2"}:
        raise ValidationError("state_box must have exactly the fields 'x1' and 'x2'")
    x1 = _pair(sb["x1"], "state_box.x1", allow_null_hi=True)
    x2 = _pair(sb["x2"], "state_box.x2", allow_null_hi=True)
    box = StateBox(x1[0], x1[1], x2[0], x2[1])

    window = None
    win = _mapping(doc, "window", required=False)
    if win is not None:
        if set(win) != {"x1", "x2"}:
            raise ValidationError("window must have exactly the fields 'x1' and 'x2'")
        window = (_pair(win["x1"], "window.x1"), _pair(win["x2"], "window.x2"))

    num = _mapping(doc, "numerics", required=False) or {}
    bad = set(num) - NUMERIC_KEYS
    if bad:
        raise ValidationError(f"unknown field(s) in 'numerics': {', '.join(sorted(bad))}")
    config = IntegratorConfig(window=window,
                              **{k: _number(v, f"numerics.{k}") for k, v in num.items()})

    label = doc.get("label", "")
    if not isinstance(label, str):
        raise ValidationError("label must be a string")
    return Scenario(params, bounds, box, config, label)


def bundled_scenarios() -> list[str]:
    return sorted(p.name for p in resources.files("barrierkit.data").iterdir()
                  if p.name.endswith(".json"))


def resolve_scenario_path(path) -> Path:
    """``path`` itself if it exists, else a bundled scenario of that file name."""
    p = Path(path)
    if p.exists():
        return p
    if p.name in bundled_scenarios():
        return Path(str(resources.files("barrierkit.data") / p.name))
    raise ValidationError(f"scenario file not found: {path}")


def load_scenario(path) -> Scenario:
    p = resolve_scenario_path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{p.name}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_scenario(doc)


def scenario_to_dict(scenario: Scenario) -> dict:
    """Inverse of :func:`parse_scenario` (always in explicit ``params`` form)."""
    box, b, cfg = scenario.box, scenario.bounds, scenario.numerics
    doc = {
        "label": scenario.label,
        "params": asdict(scenario.params),
        "input_bounds": {"u1": [b.u1_min, b.u1_max], "u2": [b.u2_min, b.u2_max]},
        "state_box": {"x1": [box.x1_lo, box.x1_hi], "x2": [box.x2_lo, box.x2_hi]},
        "numerics": {k: getattr(cfg, k) for k in sorted(NUMERIC_KEYS)},
    }
    if cfg.window is not None:
        doc["window"] = {"x1": list(cfg.window[0]), "x2": list(cfg.window[1])}
    return doc
