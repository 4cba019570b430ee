"""Shoulder state estimation from the robot end-effector.

The elbow brace rigidly ties the end-effector to the humerus, and the
joint center is assumed stationary, so the shoulder pose follows from the
EE position (humerus direction) plus the EE orientation (axial rotation),
and the rates from the EE twist.  The rate extraction walks the chained
frames of the Euler sequence; the cross-product estimate of the angular
velocity only carries the component normal to the humerus, so the plane-of-
elevation rate is rescaled by 1/sin^2(SE) and the axial rate takes its
missing component from the twist's rotational part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import EstimationError
from .shoulder import (
    EPS_SINGULAR,
    ArmDynamicsParams,
    JointAngles,
    euler_rate_matrix,
    humerus_direction,
    humerus_rotation,
    rot_x,
    rot_y,
)


def _default_ee_from_elbow() -> np.ndarray:
    # brace convention: EE approach axis (z) points up the arm
    return rot_x(-math.pi / 2)


@dataclass(frozen=True)
class EEState:
    """Simulated robot end-effector pose and twist in the base frame."""

    rotation: np.ndarray  # base <- EE
    position: np.ndarray  # m
    twist: np.ndarray  # [v; omega], m/s and rad/s
    timestamp: float = 0.0

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float)
        if np.abs(rot @ rot.T - np.eye(3)).max() > 1e-9:
            raise EstimationError("EE rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise EstimationError("EE rotation is not proper")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "twist", np.asarray(self.twist, dtype=float))


@dataclass(frozen=True)
class FrameCalibration:
    """Fixed transforms tying the robot base to the shoulder model."""

    base_from_shoulder: np.ndarray = field(default_factory=lambda: np.eye(3))
    gh_center: np.ndarray = field(
        default_factory=lambda: np.array([0.45, 0.85, 0.30])
    )
    ee_from_elbow: np.ndarray = field(default_factory=_default_ee_from_elbow)
    humerus_length: float = 0.30
    brace_offset: float = 0.05

    def __post_init__(self):
        for name in ("base_from_shoulder", "ee_from_elbow"):
            rot = np.asarray(getattr(self, name), dtype=float)
            if np.abs(rot @ rot.T - np.eye(3)).max() > 1e-9:
                raise EstimationError(f"{name} is not orthonormal")
            object.__setattr__(self, name, rot)
        # gravity acts along shoulder -Y; the base frame must share the up
        # axis or the arm dynamics would be inconsistent with the plant
        up = self.base_from_shoulder @ np.array([0.0, 1.0, 0.0])
        if abs(up[1] - 1.0) > 1e-9:
            raise EstimationError("base_from_shoulder must keep Y vertical")
        object.__setattr__(self, "gh_center", np.asarray(self.gh_center, dtype=float))
        if self.humerus_length <= 0 or self.brace_offset <= 0:
            raise EstimationError("arm lengths must be positive")

    @property
    def total_length(self) -> float:
        return self.humerus_length + self.brace_offset

    @staticmethod
    def from_params(params: ArmDynamicsParams, **kw) -> "FrameCalibration":
        return FrameCalibration(
            humerus_length=params.humerus_length,
            brace_offset=params.brace_offset,
            **kw,
        )


# ---------------------------------------------------------------------------
# forward kinematics (shoulder pose -> EE pose/twist)


def ee_pose_from_angles(q: np.ndarray, cal: FrameCalibration):
    """EE rotation and position in the base frame for q = [theta, theta_dot]."""
    q = np.asarray(q, dtype=float)
    rot_sh_elb = humerus_rotation(q[0], q[1], q[2])
    rotation = cal.base_from_shoulder @ rot_sh_elb @ cal.ee_from_elbow.T
    beta = humerus_direction(q[0], q[1])
    position = cal.gh_center + cal.base_from_shoulder @ (cal.total_length * beta)
    return rotation, position


def ee_twist_from_state(q: np.ndarray, cal: FrameCalibration) -> np.ndarray:
    """Body twist [v; omega] of the EE in the base frame."""
    q = np.asarray(q, dtype=float)
    omega_sh = euler_rate_matrix(q[0], q[1]) @ q[3:6]
    beta = humerus_direction(q[0], q[1])
    v_sh = cal.total_length * np.cross(omega_sh, beta)
    return np.concatenate(
        [cal.base_from_shoulder @ v_sh, cal.base_from_shoulder @ omega_sh]
    )


def ee_state_from_shoulder(q: np.ndarray, cal: FrameCalibration,
                           timestamp: float = 0.0) -> EEState:
    rotation, position = ee_pose_from_angles(q, cal)
    return EEState(rotation, position, ee_twist_from_state(q, cal), timestamp)


# ---------------------------------------------------------------------------
# inverse maps (EE -> shoulder)


class AngleEstimate(NamedTuple):
    angles: JointAngles
    singular: bool


class RateEstimate(NamedTuple):
    rates: np.ndarray
    singular: bool


def estimate_angles(
    ee: EEState,
    cal: FrameCalibration,
    last_valid: JointAngles | None = None,
    tolerance: float = 0.1,
) -> AngleEstimate:
    """Shoulder angles from the EE pose.

    Near the elevation singularity PE and AR are individually undefined;
    the last valid values are returned with the singular flag set.
    """
    rel = ee.position - cal.gh_center
    radius = float(np.linalg.norm(rel))
    if abs(radius - cal.total_length) > tolerance * cal.total_length:
        raise EstimationError(
            f"EE at {radius:.3f} m from the joint center; expected "
            f"{cal.total_length:.3f} m (rigid-link consistency)"
        )
    beta = (cal.base_from_shoulder.T @ rel) / radius
    se = math.acos(float(np.clip(-beta[1], -1.0, 1.0)))
    if se < EPS_SINGULAR or se > math.pi - EPS_SINGULAR:
        hold = last_valid or JointAngles(0.0, se, 0.0)
        return AngleEstimate(JointAngles(hold.pe, se, hold.ar), True)
    pe = math.atan2(beta[0], beta[2])
    rot_sh_elb = cal.base_from_shoulder.T @ ee.rotation @ cal.ee_from_elbow
    residual = rot_x(-se).T @ rot_y(pe).T @ rot_sh_elb
    ar = math.atan2(residual[0, 2], residual[0, 0])
    return AngleEstimate(JointAngles(pe, se, ar), False)


def estimate_rates(
    ee: EEState,
    angles: JointAngles,
    cal: FrameCalibration,
    last_valid: np.ndarray | None = None,
) -> RateEstimate:
    """Joint rates from the EE twist via the chained shoulder frames."""
    se = angles.se
    if se < EPS_SINGULAR or se > math.pi - EPS_SINGULAR:
        held = last_valid if last_valid is not None else np.zeros(3)
        return RateEstimate(np.asarray(held, dtype=float).copy(), True)

    rel_sh = cal.base_from_shoulder.T @ (ee.position - cal.gh_center)
    v_sh = cal.base_from_shoulder.T @ ee.twist[:3]
    omega_perp = np.cross(rel_sh, v_sh) / cal.total_length**2
    sin_se = math.sin(se)
    pe_rate = float(omega_perp[1]) / (sin_se * sin_se)
    se_rate = -float((rot_y(angles.pe).T @ omega_perp)[0])
    omega_full = cal.base_from_shoulder.T @ ee.twist[3:]
    omega_ar_frame = rot_x(-se).T @ rot_y(angles.pe).T @ omega_full
    ar_rate = float(omega_ar_frame[1]) - math.cos(se) * pe_rate
    return RateEstimate(np.array([pe_rate, se_rate, ar_rate]), False)


def humerus_jacobian(q: np.ndarray, cal: FrameCalibration) -> np.ndarray:
    """Geometric Jacobian of the EE point w.r.t. the shoulder DoFs (6x3,
    base frame): twist = J @ theta_dot."""
    q = np.asarray(q, dtype=float)
    b = euler_rate_matrix(q[0], q[1])
    beta = humerus_direction(q[0], q[1])
    skew = np.array(
        [
            [0.0, -beta[2], beta[1]],
            [beta[2], 0.0, -beta[0]],
            [-beta[1], beta[0], 0.0],
        ]
    )
    j_v = -cal.total_length * cal.base_from_shoulder @ skew @ b
    j_w = cal.base_from_shoulder @ b
    return np.vstack([j_v, j_w])


def external_torque_from_wrench(q: np.ndarray, wrench: np.ndarray,
                                cal: FrameCalibration) -> np.ndarray:
    """Generalized shoulder torques of a wrench applied at the EE."""
    jac = humerus_jacobian(q, cal)
    return jac.T @ np.asarray(wrench, dtype=float)


class ExponentialFilter:
    """First-order smoother y += alpha (x - y); causal and range-bounded."""

    def __init__(self, alpha: float, size: int = 3):
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        self.alpha = float(alpha)
        self._state: np.ndarray | None = None
        self._size = size

    def reset(self) -> None:
        self._state = None

    def update(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._state is None:
            self._state = x.copy()
        else:
            self._state = self._state + self.alpha * (x - self._state)
        return self._state.copy()


class EstimatedState(NamedTuple):
    q: np.ndarray  # filtered [theta, theta_dot]
    q_raw: np.ndarray
    singular: bool
    timestamp: float


class ShoulderStateEstimator:
    """Stateful wrapper: filter memory plus last-valid holds."""

    def __init__(
        self,
        cal: FrameCalibration,
        angle_alpha: float = 0.2,
        rate_alpha: float = 0.4,
    ):
        self.cal = cal
        self._angle_filter = ExponentialFilter(angle_alpha)
        self._rate_filter = ExponentialFilter(rate_alpha)
        self._last_angles: JointAngles | None = None
        self._last_rates: np.ndarray | None = None

    def update(self, ee: EEState) -> EstimatedState:
        angle_est = estimate_angles(ee, self.cal, self._last_angles)
        rate_est = estimate_rates(ee, angle_est.angles, self.cal, self._last_rates)
        if not angle_est.singular:
            self._last_angles = angle_est.angles
            self._last_rates = rate_est.rates
        raw = np.concatenate([angle_est.angles.as_array(), rate_est.rates])
        filtered = np.concatenate(
            [
                self._angle_filter.update(raw[:3]),
                self._rate_filter.update(raw[3:]),
            ]
        )
        return EstimatedState(
            q=filtered,
            q_raw=raw,
            singular=angle_est.singular or rate_est.singular,
            timestamp=ee.timestamp,
        )
