"""Closed-loop comparison against the graph-search baseline.

Runs the shipped three-waypoint passive scenario with both planners
through the identical plant and controller, then plots the executed paths
on the strain map alongside acceleration and interaction-force traces.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from common import DEG, RESULTS, draw_map, get_library, get_model
from strainplan.planner import CostConfig, OcpConfig, TerminalMode
from strainplan.scenario import (
    GoalEvent,
    PlannerKind,
    ScenarioScript,
    SessionConfig,
    SubjectMode,
    run_scenario,
)
from strainplan.shoulder import AGGREGATE


def main() -> None:
    model = get_model()
    library = get_library(model)
    goals = (
        GoalEvent(0.0, (30 * DEG, 120 * DEG, 0, 0, 0, 0)),
        GoalEvent(5.0, (55 * DEG, 80 * DEG, 0, 0, 0, 0)),
        GoalEvent(10.0, (-30 * DEG, 110 * DEG, 0, 0, 0, 0)),
    )
    results = {}
    for planner in (PlannerKind.OCP, PlannerKind.ASTAR):
        cfg = SessionConfig(
            model=model, library=library,
            ocp=OcpConfig(horizon=5.0, n_intervals=50,
                          mode=TerminalMode.FULL_TERMINAL),
            cost=CostConfig(),
            script=ScenarioScript(
                name=f"comparison_{planner.value}", mode=SubjectMode.PASSIVE,
                initial_state=(-20 * DEG, 115 * DEG, 0, 0, 0, 0),
                goals=goals, duration=15.5, planner=planner,
            ),
        )
        out_dir = RESULTS / f"comparison_{planner.value}"
        results[planner] = run_scenario(cfg, out_dir=out_dir)
        m = results[planner].metrics
        print(f"{planner.value:6s}: cumulative strain {m['cumulative_strain']:7.2f}  "
              f"peak acc {m['peak_acceleration']:5.2f} rad/s^2  "
              f"peak force {m['peak_force']:5.2f} N")

    fig = plt.figure(figsize=(13, 9))
    ax_map = fig.add_subplot(2, 1, 1)
    mesh = draw_map(ax_map, library.get(AGGREGATE, 0, 0))
    styles = {PlannerKind.OCP: ("-", "tab:blue", "optimized"),
              PlannerKind.ASTAR: ("--", "lightgray", "graph baseline")}
    for planner, res in results.items():
        path = np.degrees(res.executed[:, :2])
        style, color, label = styles[planner]
        ax_map.plot(path[:, 0], path[:, 1], style, color=color, lw=2, label=label)
    for goal in goals:
        ax_map.plot(np.degrees(goal.target[0]), np.degrees(goal.target[1]),
                    "o", color="tab:orange", ms=8)
    ax_map.legend(loc="lower left")
    ax_map.set_title("executed paths over the aggregate strain map")
    fig.colorbar(mesh, ax=ax_map, label="strain [%]")

    for i, (field, ylabel) in enumerate(
        (("acc", "|acceleration| [rad/s^2]"), ("force", "|force| [N]")),
    ):
        ax = fig.add_subplot(2, 2, 3 + i)
        for planner, res in results.items():
            rows = np.array(
                [[float(v) for v in line.split(",")] for line in res.log.rows]
            )
            t = rows[:, 0]
            if field == "acc":
                stride = 10
                vel = rows[::stride, 4:7]
                trace = np.zeros(len(vel))
                trace[1:-1] = np.linalg.norm(
                    (vel[2:] - vel[:-2]) / (2 * (t[stride] - t[0])), axis=1
                )
                tt = t[::stride]
            else:
                trace = np.linalg.norm(rows[:, 13:16], axis=1)
                tt = t
            style, color, label = styles[planner]
            color = "tab:blue" if planner == PlannerKind.OCP else "tab:gray"
            ax.plot(tt, trace, style, color=color, lw=1.2, label=label)
        ax.set_xlabel("time [s]")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)

    fig.tight_layout()
    out = RESULTS / "baseline_comparison.png"
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
