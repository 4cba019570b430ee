"""Vertical tracking with and without the model-based gravity offset.

Paired closed-loop holds of a raised pose: the offset converts the planned
elevation torque into a vertical reference displacement, letting the
impedance controller carry the arm weight.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from common import RESULTS, get_model
from strainplan.kinematics import FrameCalibration, ee_pose_from_angles
from strainplan.plant import (
    CoupledPlant,
    ImpedanceConfig,
    gravity_offset,
    reference_from_human_state,
)


def main() -> None:
    model = get_model()
    cal = FrameCalibration.from_params(model.params)
    imp = ImpedanceConfig()
    q_ref = np.array([0.2, 1.1, 0.0, 0.0, 0.0, 0.0])
    u_se = float(model.gravity_torque(q_ref[1])[1])
    delta = gravity_offset(u_se, q_ref[1], imp.vertical_stiffness,
                           model.params.humerus_length)
    print(f"planned elevation torque {u_se:.2f} N m -> "
          f"vertical offset {delta.delta_z * 1000:.1f} mm")

    _, target_pos = ee_pose_from_angles(q_ref, cal)
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for use_offset, label, color in ((False, "without offset", "tab:gray"),
                                     (True, "with offset", "tab:blue")):
        plant = CoupledPlant(model, cal, imp, q_ref)
        ref_rot, ref_pos = reference_from_human_state(
            q_ref, cal, delta_z=delta.delta_z if use_offset else 0.0)
        trace = []
        for k in range(2000):
            out = plant.step(0.005, ref_rot, ref_pos)
            trace.append(out.ee.position[1])
        trace = np.asarray(trace)
        err = abs(trace[-1] - target_pos[1]) * 1000
        print(f"{label}: steady-state vertical error {err:.2f} mm")
        t = np.arange(len(trace)) * 0.005
        ax.plot(t, trace * 1000, color=color, label=label)
        if use_offset:
            ax.plot(t, np.full_like(t, ref_pos[1] * 1000), ":", color=color,
                    lw=1, label="offset reference")
    ax.axhline(target_pos[1] * 1000, color="k", lw=1, label="target height")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("vertical EE position [mm]")
    ax.legend(fontsize=9)
    fig.tight_layout()
    RESULTS.mkdir(exist_ok=True)
    out = RESULTS / "gravity_support.png"
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
