"""Coupled robot-human plant under Cartesian impedance control.

The brace ties the end-effector rigidly to the humerus, so the robot has no
dynamics of its own here: the impedance law produces the interaction wrench
from the reference-vs-actual EE pose, the wrench maps to shoulder torques
through the humerus Jacobian, and the human arm integrates forward.  The
sensed wrench is the reaction of the applied one (Newton's third law);
volitional muscle action enters as injected generalized torques and shows
up in the sensed wrench through the impedance response, as on the real
system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import SimulationFault, SingularPoseError
from .kinematics import EEState, FrameCalibration, ee_pose_from_angles, \
    ee_state_from_shoulder, humerus_jacobian
from .shoulder import EPS_SINGULAR, ShoulderModel


def _default_stiffness() -> np.ndarray:
    return np.diag([800.0, 800.0, 800.0, 20.0, 20.0, 20.0])


def _default_damping() -> np.ndarray:
    # damping acts on the measured twist only (no reference feedforward),
    # so heavy damping drags behind moving references
    return np.diag([25.0, 25.0, 25.0, 2.0, 2.0, 2.0])


@dataclass(frozen=True)
class ImpedanceConfig:
    stiffness: np.ndarray = field(default_factory=_default_stiffness)
    damping: np.ndarray = field(default_factory=_default_damping)
    control_rate: float = 200.0

    def __post_init__(self):
        for name in ("stiffness", "damping"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (6, 6) or not np.allclose(m, m.T):
                raise ValueError(f"{name} must be a symmetric 6x6 matrix")
            if np.linalg.eigvalsh(m).min() < -1e-10:
                raise ValueError(f"{name} must be positive semidefinite")
            object.__setattr__(self, name, m)
        if self.control_rate < 100.0:
            raise ValueError("control rate must be at least 100 Hz")

    @property
    def vertical_stiffness(self) -> float:
        return float(self.stiffness[1, 1])


def rotation_error(ref_rot: np.ndarray, cur_rot: np.ndarray) -> np.ndarray:
    """Axis-angle vector of ref relative to current (small-angle wrench arm)."""
    rel = ref_rot @ cur_rot.T
    angle = math.acos(float(np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0)))
    if angle < 1e-12:
        return np.zeros(3)
    axis = np.array(
        [rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]]
    ) / (2.0 * math.sin(angle))
    return angle * axis


def impedance_wrench(
    cfg: ImpedanceConfig,
    ref_rot: np.ndarray,
    ref_pos: np.ndarray,
    ee: EEState,
) -> np.ndarray:
    """f = K (X_ref - X_actual) - D Xdot_actual, base frame."""
    error = np.concatenate(
        [ref_pos - ee.position, rotation_error(ref_rot, ee.rotation)]
    )
    return cfg.stiffness @ error - cfg.damping @ ee.twist


class GravityOffset(NamedTuple):
    delta_z: float
    valid: bool


def gravity_offset(u_se: float, se: float, k_z: float, l_hum: float) -> GravityOffset:
    """Vertical reference displacement delivering the planned elevation
    torque through the vertical stiffness: u_se / (K_z L_hum sin(se))."""
    if k_z <= 0:
        raise ValueError("vertical stiffness must be positive")
    if min(se, math.pi - se) < EPS_SINGULAR:
        return GravityOffset(0.0, False)
    return GravityOffset(u_se / (k_z * l_hum * math.sin(se)), True)


class PlantOutput(NamedTuple):
    q: np.ndarray  # human state after the step
    ee: EEState  # end-effector tied to the new state
    applied_wrench: np.ndarray  # robot on human, base frame
    sensed_wrench: np.ndarray  # force/torque reading: reaction of applied
    acceleration: np.ndarray  # joint acceleration at the step start


class CoupledPlant:
    """Semi-implicit Euler integration of the braced arm at the control rate."""

    def __init__(
        self,
        model: ShoulderModel,
        cal: FrameCalibration,
        impedance: ImpedanceConfig,
        q0: np.ndarray,
        substeps: int = 4,
        velocity_limit: float = 10.0,
    ):
        self.model = model
        self.cal = cal
        self.impedance = impedance
        self.q = np.asarray(q0, dtype=float).copy()
        self.substeps = int(substeps)
        self.velocity_limit = float(velocity_limit)
        self.time = 0.0

    def ee_state(self) -> EEState:
        return ee_state_from_shoulder(self.q, self.cal, timestamp=self.time)

    def step(
        self,
        dt: float,
        ref_rot: np.ndarray | None,
        ref_pos: np.ndarray | None,
        injected_torque: np.ndarray | None = None,
    ) -> PlantOutput:
        """Advance one control period under a fixed EE reference.

        The reference is held for the tick (zero-order hold of the 200 Hz
        controller) but the impedance wrench is re-evaluated per substep:
        the physical interaction is continuous, and the stiff damping term
        would destabilize a frozen-wrench integration.  The sensed wrench
        is the tick's first sample.
        """
        tau_inj = (
            np.zeros(3) if injected_torque is None else np.asarray(injected_torque)
        )
        h = dt / self.substeps
        q = self.q
        acc0 = None
        wrench0 = None
        for i in range(self.substeps):
            ee = ee_state_from_shoulder(q, self.cal, timestamp=self.time + i * h)
            if ref_rot is None:
                wrench = np.zeros(6)
            else:
                wrench = impedance_wrench(self.impedance, ref_rot, ref_pos, ee)
            if wrench0 is None:
                wrench0 = wrench
            tau = humerus_jacobian(q, self.cal).T @ wrench + tau_inj
            try:
                qdot = self.model.forward_dynamics(q, tau, check_bounds=False)
            except SingularPoseError as exc:
                raise SimulationFault(f"plant reached a singular pose: {exc}")
            if acc0 is None:
                acc0 = qdot[3:6].copy()
            vel = q[3:6] + h * qdot[3:6]
            q = np.concatenate([q[0:3] + h * vel, vel])
        if np.linalg.norm(q[3:6]) > self.velocity_limit:
            raise SimulationFault(
                f"plant diverged: |qdot| = {np.linalg.norm(q[3:6]):.2f} rad/s"
            )
        self.q = q
        self.time += dt
        ee_after = self.ee_state()
        return PlantOutput(
            q=q.copy(),
            ee=ee_after,
            applied_wrench=wrench0,
            sensed_wrench=-wrench0,
            acceleration=acc0,
        )


VERTICAL_AXIS = 1  # base frame is Y-up, matching the shoulder frame


def reference_from_human_state(q_ref: np.ndarray, cal: FrameCalibration,
                               delta_z: float = 0.0):
    """Impedance reference pose for a planned human state; the vertical
    gravity-support displacement is added along the base up axis."""
    rot, pos = ee_pose_from_angles(np.asarray(q_ref, dtype=float), cal)
    pos = pos.copy()
    pos[VERTICAL_AXIS] += delta_z
    return rot, pos
