"""Solve-time table for the two planning configurations.

Reports median/percentile wall times of cold solves in the long-horizon
(passive) and short-horizon (active) configurations, and the replanning
rate of the warm receding-horizon loop.
"""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import math

import numpy as np

from common import DEG, get_library, get_model
from strainplan.planner import (
    CostConfig,
    OcpConfig,
    PlannerInput,
    RecedingHorizonPlanner,
    TerminalMode,
    solve,
    transcribe,
)
from strainplan.shoulder import AGGREGATE


def main() -> None:
    model = get_model()
    library = get_library(model)
    smap = library.get(AGGREGATE, 0, 0)
    rng = np.random.default_rng(0)
    eps = tuple([math.radians(2.0) ** 2] * 3 + [math.radians(5.0) ** 2] * 3)

    rows = []
    for label, cfg, cost in (
        ("long horizon (T_f=5 s, N=50)",
         OcpConfig(horizon=5.0, n_intervals=50, mode=TerminalMode.FULL_TERMINAL),
         CostConfig()),
        ("short horizon (T_f=1 s, N=10)",
         OcpConfig(horizon=1.0, n_intervals=10, epsilon=eps,
                   mode=TerminalMode.VELOCITY_ONLY_TERMINAL),
         CostConfig(w_goal=20.0)),
    ):
        times = []
        for _ in range(20):
            start = np.array([rng.uniform(-50, 90), rng.uniform(65, 135),
                              0, 0, 0, 0]) * DEG
            start[2:] = 0.0
            goal = start + np.array([rng.uniform(-40, 40),
                                     rng.uniform(-30, 30), 0, 0, 0, 0]) * DEG
            trans = transcribe(cfg, cost, model, smap, start, goal)
            t0 = time.perf_counter()
            solve(trans, cfg, model=model, target=goal)
            times.append(time.perf_counter() - t0)
        rows.append((label, np.median(times), np.percentile(times, 90)))

    rh = RecedingHorizonPlanner(
        model, library, AGGREGATE,
        OcpConfig(horizon=1.0, n_intervals=10, epsilon=eps,
                  mode=TerminalMode.VELOCITY_ONLY_TERMINAL),
        CostConfig(w_goal=20.0),
    )
    q = np.array([60 * DEG, 60 * DEG, 0, 0, 0, 0])
    rh.set_goal(np.array([45 * DEG, 95 * DEG, 0, 0, 0, 0]), 0.0, q)
    warm = []
    for k in range(100):
        now = 0.1 * k
        t0 = time.perf_counter()
        rh.step(PlannerInput(q=q, activation=0.0, timestamp=now), now)
        warm.append(time.perf_counter() - t0)
        q = rh.latest.dense.sample(now + 0.1)[0].copy()
    rows.append(("receding horizon (warm, per step)",
                 np.median(warm), np.percentile(warm, 90)))

    width = max(len(r[0]) for r in rows)
    print(f"{'configuration':<{width}}  median    p90")
    for label, med, p90 in rows:
        print(f"{label:<{width}}  {med * 1e3:6.1f} ms {p90 * 1e3:6.1f} ms")
    print(f"\nreceding-horizon replanning rate: {1.0 / np.median(warm):.1f} Hz")


if __name__ == "__main__":
    main()
