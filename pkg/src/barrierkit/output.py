"""Deterministic CSV, JSON and SVG writers.

Every file is written to a temporary sibling and renamed into place.  Floats
are written with ``repr`` so CSV output round-trips bit-exactly, and SVG
output uses a fixed hash salt and no date stamp so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .barrier import BarrierCurve, TangencyPoint, switching_lines  # noqa: E402
from .model import Scenario, Trajectory  # noqa: E402
from .region import AdmissibleRegion  # noqa: E402

__all__ = [
    "CURVE_HEADER",
    "BOUNDARY_HEADER",
    "TRAJECTORY_HEADER",
    "atomic_write",
    "curve_csv",
    "boundary_csv",
    "trajectory_csv",
    "polyline_csv",
    "boundary_svg",
    "mrpi_svg",
]

CURVE_HEADER = ["t", "x1", "x2", "lambda1", "lambda2", "u1", "u2", "event"]
BOUNDARY_HEADER = ["arc_index", "arc_kind", "origin", "x1", "x2"]
TRAJECTORY_HEADER = ["t", "x1", "x2", "u1", "u2"]

plt.rcParams["svg.hashsalt"] = "barrierkit"
plt.rcParams["svg.fonttype"] = "path"


def atomic_write(path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _num(v) -> str:
    return repr(float(v))


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def curve_csv(curve: BarrierCurve) -> str:
    rows = ([_num(curve.t[k]), _num(curve.x[k, 0]), _num(curve.x[k, 1]),
             _num(curve.lam[k, 0]), _num(curve.lam[k, 1]),
             _num(curve.u[k, 0]), _num(curve.u[k, 1]), curve.events[k]]
            for k in range(len(curve.t)))
    return _table(CURVE_HEADER, rows)


def boundary_csv(region: AdmissibleRegion) -> str:
    rows = ([i, arc.kind, arc.origin_label, _num(p[0]), _num(p[1])]
            for i, arc in enumerate(region.arcs) for p in arc.points)
    return _table(BOUNDARY_HEADER, rows)


def trajectory_csv(traj: Trajectory) -> str:
    rows = ([_num(traj.t[k]), _num(traj.x[k, 0]), _num(traj.x[k, 1]),
             _num(traj.u[k, 0]), _num(traj.u[k, 1])] for k in range(len(traj.t)))
    return _table(TRAJECTORY_HEADER, rows)


def polyline_csv(points: np.ndarray) -> str:
    return _table(["x1", "x2"], ([_num(a), _num(b)] for a, b in points))


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def _frame(scenario: Scenario):
    x1_lo, x1_hi, x2_lo, x2_hi = scenario.view_rect
    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    box = scenario.box
    pad1, pad2 = 0.05 * (x1_hi - x1_lo), 0.05 * (x2_hi - x2_lo)
    ax.set_xlim(min(0.0, x1_lo - pad1), x1_hi + pad1)
    ax.set_ylim(min(0.0, x2_lo - pad2), x2_hi + pad2)
    style = dict(color="black", linewidth=1.2)
    ax.plot([x1_lo, x1_hi], [x2_lo, x2_lo], **style, label="state constraints")
    ax.plot([x1_lo, x1_lo], [x2_lo, x2_hi], **style)
    if box.x1_hi is not None:
        ax.plot([x1_hi, x1_hi], [x2_lo, x2_hi], **style)
    if box.x2_hi is not None:
        ax.plot([x1_lo, x1_hi], [x2_hi, x2_hi], **style)
    ax.set_xlabel("prey biomass x1 [kg]")
    ax.set_ylabel("predator biomass x2 [kg]")
    return fig, ax


def boundary_svg(scenario: Scenario, points: list[TangencyPoint], curves: list[BarrierCurve],
                 region: AdmissibleRegion | None) -> str:
    fig, ax = _frame(scenario)
    x1_lo, x1_hi, x2_lo, x2_hi = scenario.view_rect
    if region is not None:
        poly = region.polygon
        ax.fill(poly[:, 0], poly[:, 1], color="tab:blue", alpha=0.12, linewidth=0,
                label="admissible set")
    first = True
    for line in switching_lines(scenario):
        lo, hi = (x1_lo, x1_hi) if line.axis == "x1" else (x2_lo, x2_hi)
        if not lo <= line.value <= hi:
            continue
        xs = [line.value] * 2 if line.axis == "x1" else [x1_lo, x1_hi]
        ys = [x2_lo, x2_hi] if line.axis == "x1" else [line.value] * 2
        ax.plot(xs, ys, linestyle="--", color="tab:gray", linewidth=0.8,
                label="switching lines" if first else None)
        ax.annotate(line.label, (xs[1], ys[1]), fontsize=7, color="tab:gray",
                    xytext=(2, -8), textcoords="offset points")
        first = False
    kept_label = discard_label = switch_label = True
    for c in curves:
        if c.kept:
            ax.plot(c.x[:, 0], c.x[:, 1], color="tab:blue", linewidth=1.6,
                    label="barrier" if kept_label else None)
            kept_label = False
        else:
            ax.plot(c.x[:, 0], c.x[:, 1], color="tab:red", linewidth=1.2, linestyle="-.",
                    label="discarded curve" if discard_label else None)
            discard_label = False
        for s in c.switches:
            ax.plot(*s.x, "o", color="0.55", markersize=5,
                    label="input switch" if switch_label else None)
            switch_label = False
    tp_label = True
    for tp in points:
        if not tp.in_box:
            continue
        ax.plot(*tp.z, "s" if tp.exists else "x", color="black", markersize=5,
                label="tangency points" if tp_label else None)
        tp_label = False
        ax.annotate(tp.label, tp.z, xytext=(4, 4), textcoords="offset points", fontsize=9)
    ax.set_title(scenario.label or "admissible set", fontsize=9)
    ax.legend(loc="upper right", fontsize=7)
    return _svg(fig)


def mrpi_svg(scenario: Scenario, boundary: np.ndarray, equilibrium) -> str:
    fig, ax = _frame(scenario)
    closed = np.vstack([boundary, boundary[:1]])
    ax.fill(closed[:, 0], closed[:, 1], color="tab:green", alpha=0.15, linewidth=0)
    ax.plot(closed[:, 0], closed[:, 1], color="tab:green", linewidth=1.4,
            label="largest invariant level set")
    ax.plot(*equilibrium, "+", color="black", markersize=8, label="equilibrium")
    ax.set_title(scenario.label or "fixed-input invariant set", fontsize=9)
    ax.legend(loc="upper right", fontsize=7)
    return _svg(fig)
