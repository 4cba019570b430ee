"""Effect of the cost weights on the optimized path.

Sweeps the strain weight at fixed acceleration weight and shows the
normalized vs raw goal term, plotted over the aggregate strain map.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from common import DEG, RESULTS, draw_map, get_library, get_model
from strainplan.planner import CostConfig, OcpConfig, TerminalMode, solve, transcribe
from strainplan.shoulder import AGGREGATE


def main() -> None:
    model = get_model()
    library = get_library(model)
    smap = library.get(AGGREGATE, 0, 0)
    q0 = np.array([-20 * DEG, 115 * DEG, 0, 0, 0, 0])
    qT = np.array([55 * DEG, 80 * DEG, 0, 0, 0, 0])
    cfg = OcpConfig(horizon=5.0, n_intervals=50, mode=TerminalMode.FULL_TERMINAL)

    fig, axes = plt.subplots(1, 2, figsize=(13, 5), sharey=True)
    mesh = None

    for ax, title, runs in (
        (
            axes[0],
            "strain weight sweep (w_acc = 10)",
            [("w_sigma = 0", CostConfig(w_strain=0.0), "--"),
             ("w_sigma = 1", CostConfig(w_strain=1.0), "-"),
             ("w_sigma = 3", CostConfig(w_strain=3.0), ":")],
        ),
        (
            axes[1],
            "goal-term normalization (w_goal = 2)",
            [("normalized by start distance",
              CostConfig(w_goal=2.0), "-"),
             ("unnormalized",
              CostConfig(w_goal=2.0, d0=1.0), "--")],
        ),
    ):
        mesh = draw_map(ax, smap)
        for label, cost, style in runs:
            trans = transcribe(cfg, cost, model, smap, q0, qT)
            sol = solve(trans, cfg, model=model, target=qT)
            states = sol.dense.states
            ax.plot(np.degrees(states[:, 0]), np.degrees(states[:, 1]),
                    style, color="white", lw=2, label=label)
            print(f"{title} | {label}: status={sol.status.value} "
                  f"objective={sol.objective:.3f}")
        ax.plot(*np.degrees(q0[:2]), "o", color="tab:blue", ms=9)
        ax.plot(*np.degrees(qT[:2]), "o", color="tab:pink", ms=9)
        ax.set_title(title)
        ax.legend(loc="lower left", fontsize=8)

    fig.colorbar(mesh, ax=axes, label="strain [%]", shrink=0.85)
    RESULTS.mkdir(exist_ok=True)
    out = RESULTS / "weight_sweep.png"
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
