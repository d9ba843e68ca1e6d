"""Shared oracles and cached episodes for the test suite."""
import functools
import math
import time

import numpy as np

from acil import config as cfg
from acil.engine import run_episode

DELTA_WING_ICS = ((1.0, 0.1), (-1.0, 1.0), (1.9, 0.1))
ROBOT_ICS = ((4.0, 6.0), (-7.5, 4.5), (1.0, -9.2))
SWEEP_KS = (0.02, 0.1, 1.0, 5.0, 10.0)

# criterion number -> (passed, detail); printed at the end of the session
ACCEPTANCE = {}


def ic(x) -> str:
    return "x0=" + ",".join(repr(float(v)) for v in x)


@functools.lru_cache(maxsize=None)
def episode(scenario: str, *overrides: str):
    """Run a built-in scenario once per session; returns (log, wall seconds)."""
    values = cfg.apply_overrides(cfg.load(scenario), overrides)
    sim = cfg.build(values)
    t0 = time.perf_counter()
    log = run_episode(sim)
    return log, time.perf_counter() - t0


def riccati_roots(a, b, q, r):
    """Both roots P of q + 2 a P - 2 b^2 P^2 / r = 0.

    With V(x) = P x^2 and cost q x^2 + r u^2 / 2 this is the stationarity
    condition of x_dot = a x + b u; the larger root is the stabilizing one.
    """
    disc = math.sqrt(4 * a * a + 8 * b * b * q / r)
    return (r * (2 * a + disc) / (4 * b * b), r * (2 * a - disc) / (4 * b * b))


def wing_run(x0, *extra):
    return episode("deltawing", ic(x0), *extra)


def robot_run(x0, *extra):
    return episode("minefield", ic(x0), *extra)


def robot_sweep_run(k):
    # the default gain shares its run with the plain robot episode
    return robot_run(ROBOT_ICS[0]) if k == 0.02 else robot_run(ROBOT_ICS[0], f"k={k!r}")
