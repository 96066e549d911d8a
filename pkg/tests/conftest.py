import logging
from pathlib import Path

import numpy as np
import pytest

from barrierkit.model import InputBounds, LVParams, Scenario, StateBox, ValidationError
from barrierkit.barrier import ultimate_tangency_points
from barrierkit.pipeline import run_pipeline
from barrierkit.scenario import load_scenario

ACCEPTANCE = {}
GOLDEN = Path(__file__).parent / "golden"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}")


@pytest.fixture(scope="session")
def fig3():
    return load_scenario("fig3.json")


@pytest.fixture(scope="session")
def fig2():
    return load_scenario("fig2.json")


@pytest.fixture(scope="session")
def singleton():
    return load_scenario("singleton.json")


@pytest.fixture(scope="session")
def fig3_run(fig3):
    return run_pipeline(fig3)


@pytest.fixture(scope="session")
def fig2_run(fig2):
    return run_pipeline(fig2)


def random_scenario(rng, *, all_exist=False, margin=1e-3):
    """A bounded random scenario; with ``all_exist`` every tangency point is usable."""
    while True:
        alpha = float(rng.choice([0.0, rng.uniform(0, 2)]))
        gamma = float(rng.choice([0.0, rng.uniform(0, 2)]))
        beta, delta = rng.uniform(2, 15, 2)
        u1 = np.sort(rng.uniform(-5, 25, 2))
        u2 = np.sort(rng.uniform(-25, 5, 2))
        if u1[1] - u1[0] < 1 or u2[1] - u2[0] < 1:
            continue
        x1_lo, x2_lo = rng.uniform(0.1, 1, 2)
        x1_hi, x2_hi = x1_lo + rng.uniform(2, 12), x2_lo + rng.uniform(2, 12)
        try:
            sc = Scenario(LVParams(alpha, float(beta), gamma, float(delta)),
                          InputBounds(*map(float, u1), *map(float, u2)),
                          StateBox(float(x1_lo), float(x1_hi), float(x2_lo), float(x2_hi)))
        except ValidationError:
            continue
        if not all_exist:
            return sc
        previous = logging.root.manager.disable
        logging.disable(logging.WARNING)
        try:
            tps = ultimate_tangency_points(sc)
        finally:
            logging.disable(previous)
        if all(t.exists and abs(t.existence_value) > margin for t in tps):
            return sc
