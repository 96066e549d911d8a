"""Sampled-control viability witnesses.

A query point is simulated under a population of random bang-bang
schedules: switch times come from a Poisson process (per-schedule rate drawn
log-uniformly) and every new level is drawn uniformly from the four corner
inputs.  Population splitting keeps the search alive over long horizons:
every ``stage_steps`` steps, schedules whose state has left the box are
replaced by copies of surviving ones, which then continue with independent
random futures.  A schedule that survives to the horizon is replayed with
:func:`barrierkit.model.forward_simulate` before it is reported.

``some_viable`` therefore comes with an explicit witness schedule;
``all_violate`` is only evidence that no viable input exists.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .model import RegionError, Scenario, classify_region, forward_simulate

__all__ = ["ViabilityReport", "default_seed", "verify_point_viability", "verify_points_viability"]

VERDICTS = ("some_viable", "all_violate", "inconclusive")


def default_seed() -> int:
    return int(os.environ.get("BARRIERKIT_SEED", "42"))


@dataclass
class ViabilityReport:
    point: tuple[float, float]
    n_samples: int
    n_viable: int
    horizon: float
    seed: int
    verdict: str
    last_violation_time: float | None = None
    witness: list[tuple[float, float, float]] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "point": list(self.point),
            "n_samples": self.n_samples,
            "n_viable": self.n_viable,
            "horizon": self.horizon,
            "seed": self.seed,
            "verdict": self.verdict,
            "last_violation_time": self.last_violation_time,
            "witness_switches": len(self.witness),
        }


def _rhs(X, U, p):
    return np.stack([
        X[:, 0] * (p.alpha - p.beta * X[:, 1] + U[:, 0]),
        X[:, 1] * (p.delta * X[:, 0] - p.gamma + U[:, 1]),
    ], axis=1)


def _search(points, scenario, gens, steps, h, n_samples, stage_steps, rate_range):
    """One population-splitting run; ``gens[g]`` drives the population of point ``g``."""
    box, p = scenario.box, scenario.params
    corners = np.array(scenario.bounds.corners)
    n_pts = len(points)
    N = n_pts * n_samples
    lo = np.array([box.x1_lo, box.x2_lo])
    hi = np.array([np.inf if box.x1_hi is None else box.x1_hi,
                   np.inf if box.x2_hi is None else box.x2_hi])

    def draw(fn):
        return np.concatenate([fn(g) for g in gens])

    lr = np.log10(rate_range)
    X = np.repeat(points, n_samples, axis=0)
    rates = 10.0 ** draw(lambda g: g.uniform(lr[0], lr[1], n_samples))
    level = draw(lambda g: g.integers(0, 4, n_samples))
    history = [[(0, int(lv))] for lv in level]
    alive = np.ones(N, dtype=bool)
    extinct = np.zeros(n_pts, dtype=bool)
    last_death = np.full(n_pts, np.nan)

    chunk = 256
    for k in range(steps):
        if k % chunk == 0:
            # Per-point draws are made in blocks of steps to keep generator calls rare.
            m = min(chunk, steps - k)
            coins = np.concatenate([g.random((m, n_samples)) for g in gens], axis=1)
            picks = np.concatenate([g.integers(0, 4, (m, n_samples)) for g in gens], axis=1)
        switch = coins[k % chunk] < -np.expm1(-rates * h)
        new = picks[k % chunk]
        for j in np.flatnonzero(switch & (new != level) & alive):
            history[j].append((k, int(new[j])))
        level = np.where(switch, new, level)
        U = corners[level]
        k1 = _rhs(X, U, p)
        k2 = _rhs(X + 0.5 * h * k1, U, p)
        k3 = _rhs(X + 0.5 * h * k2, U, p)
        k4 = _rhs(X + h * k3, U, p)
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        exited = alive & np.any((X < lo) | (X > hi), axis=1)
        if exited.any():
            for g in np.unique(np.flatnonzero(exited) // n_samples):
                last_death[g] = (k + 1) * h
            alive &= ~exited
            X = np.where(alive[:, None], X, np.clip(X, lo, np.where(np.isinf(hi), X, hi)))
        if (k + 1) % stage_steps == 0 and k + 1 < steps:
            A = alive.reshape(n_pts, n_samples)
            for g in np.flatnonzero(~A.all(axis=1) & ~extinct):
                surv = np.flatnonzero(A[g])
                if len(surv) == 0:
                    extinct[g] = True
                    continue
                dead = np.flatnonzero(~A[g])
                src = g * n_samples + surv[gens[g].integers(0, len(surv), len(dead))]
                dst = g * n_samples + dead
                X[dst], level[dst], rates[dst] = X[src], level[src], rates[src]
                alive[dst] = True
                for d, s in zip(dst, src):
                    history[d] = list(history[s])
            if extinct.all():
                break
    return alive, history, last_death


def verify_points_viability(points, scenario: Scenario, horizon: float = 10.0,
                            n_samples: int = 200, seed: int | None = None, *,
                            step_h: float | None = None, stage_steps: int = 10,
                            rate_range: tuple[float, float] = (1.0, 100.0),
                            confirm: bool = True, max_replays: int = 10,
                            restarts: int = 2) -> list[ViabilityReport]:
    """Run :func:`verify_point_viability` for several points in one vectorized batch.

    Each point gets its own population of ``n_samples`` schedules and its own
    random stream spawned from ``seed``, so a point's verdict does not depend on
    which other points share the batch.  A population that dies out entirely
    is searched again with fresh draws up to ``restarts`` times.
    """
    seed = default_seed() if seed is None else int(seed)
    points = np.atleast_2d(np.asarray(points, dtype=float))[:, :2]
    for x in points:
        if classify_region(x, scenario.box) == "outside_G":
            raise RegionError(f"({x[0]}, {x[1]}) is outside the constrained box")
    if horizon <= 0 or n_samples < 1:
        raise ValueError("horizon and n_samples must be positive")

    h = scenario.numerics.step_h if step_h is None else step_h
    steps = int(round(horizon / h))
    streams = np.random.SeedSequence(seed).spawn(len(points))
    gens = [np.random.default_rng(ss) for ss in streams]
    alive, history, last_death = _search(points, scenario, gens, steps, h, n_samples,
                                         stage_steps, rate_range)
    for _ in range(restarts):
        retry = np.flatnonzero(~alive.reshape(len(points), n_samples).any(axis=1))
        if len(retry) == 0:
            break
        a2, h2, d2 = _search(points[retry], scenario, [gens[g] for g in retry], steps, h,
                             n_samples, stage_steps, rate_range)
        for i, g in enumerate(retry):
            blk = slice(g * n_samples, (g + 1) * n_samples)
            alive[blk] = a2[i * n_samples:(i + 1) * n_samples]
            history[blk] = h2[i * n_samples:(i + 1) * n_samples]
            last_death[g] = np.fmax(last_death[g], d2[i])
    corners = np.array(scenario.bounds.corners)

    reports = []
    A = alive.reshape(len(points), n_samples)
    for g, x in enumerate(points):
        n_viable = int(A[g].sum())
        witness = []
        # Survivors can sit within rounding of the box edge; replay until one holds.
        for j in g * n_samples + np.flatnonzero(A[g])[:max_replays]:
            candidate = [(s * h, float(corners[lv][0]), float(corners[lv][1]))
                         for s, lv in history[j]]
            if not confirm or not forward_simulate(x, candidate, horizon, scenario).violated:
                witness = candidate
                break
        if n_viable and not witness:
            n_viable = 0
        verdict = "some_viable" if n_viable else "all_violate"
        reports.append(ViabilityReport(
            point=(float(x[0]), float(x[1])),
            n_samples=n_samples,
            n_viable=n_viable,
            horizon=horizon,
            seed=seed,
            verdict=verdict,
            last_violation_time=None if np.isnan(last_death[g]) else float(last_death[g]),
            witness=witness,
        ))
    return reports


def verify_point_viability(x, scenario: Scenario, horizon: float = 10.0, n_samples: int = 200,
                           seed: int | None = None, **kwargs) -> ViabilityReport:
    """Search for an input schedule keeping ``x`` in the box up to ``horizon``."""
    return verify_points_viability([x], scenario, horizon, n_samples, seed, **kwargs)[0]
