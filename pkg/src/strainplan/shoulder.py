"""Simplified 3-DoF glenohumeral model.

State conventions
-----------------
The humerus orientation follows the intrinsic Y-X'-Y'' Euler sequence
``R(pe, se, ar) = R_Y(pe) @ R_X(-se) @ R_Y(ar)`` in a shoulder frame whose
Y axis points up.  At the rest pose (all angles zero) the arm hangs along
-Y; raising ``se`` elevates the arm toward +Z, ``pe`` swings the elevation
plane about the vertical, ``ar`` spins the humerus about its own axis.

Muscle-tendon units run in a straight line from a fixed origin (shoulder
frame) to an insertion point riding on the humerus, wrapping over a single
sphere centered at the joint when the chord would penetrate it.  The fiber
and tendon share the path in series: the tendon absorbs a fixed fraction of
passive path excursion, and activation shortens the fiber, transferring
additional stretch to the tendon, so strain grows with activation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import OutOfBoundsError, SingularPoseError

AGGREGATE = "AGGREGATE"

EPS_SINGULAR = 1e-3  # rad, guard band around se = 0 and se = pi


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class JointBounds:
    """Configurable joint-space box, radians and radians/s."""

    pe: tuple[float, float] = (-math.pi / 2, math.pi)
    se: tuple[float, float] = (0.0, math.pi)
    ar: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    v_max: float = 5.0

    def contains(self, angles: "JointAngles") -> bool:
        return (
            self.pe[0] <= angles.pe <= self.pe[1]
            and self.se[0] <= angles.se <= self.se[1]
            and self.ar[0] <= angles.ar <= self.ar[1]
        )

    def check(self, angles: "JointAngles") -> None:
        if not self.contains(angles):
            raise OutOfBoundsError(
                f"pose ({angles.pe:.4f}, {angles.se:.4f}, {angles.ar:.4f}) "
                f"outside joint bounds"
            )

    def check_velocity(self, velocities: np.ndarray) -> None:
        v = np.asarray(velocities, dtype=float)
        if not np.all(np.isfinite(v)) or np.any(np.abs(v) > self.v_max):
            raise OutOfBoundsError(f"velocities {v} exceed +/-{self.v_max} rad/s")


@dataclass(frozen=True)
class JointAngles:
    """Plane of elevation, shoulder elevation, axial rotation [rad]."""

    pe: float
    se: float
    ar: float

    def as_array(self) -> np.ndarray:
        return np.array([self.pe, self.se, self.ar], dtype=float)

    @staticmethod
    def from_array(theta: Sequence[float]) -> "JointAngles":
        return JointAngles(float(theta[0]), float(theta[1]), float(theta[2]))


@dataclass(frozen=True)
class KinematicState:
    """Pose plus joint rates; the planner's q = [theta, theta_dot]."""

    angles: JointAngles
    velocities: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.angles.as_array(), np.asarray(self.velocities)])

    @staticmethod
    def from_array(q: Sequence[float]) -> "KinematicState":
        q = np.asarray(q, dtype=float)
        return KinematicState(JointAngles.from_array(q[:3]), tuple(q[3:6]))


@dataclass(frozen=True)
class MusculoskeletalState:
    """Kinematic state plus per-muscle activations, clamped to [0, 1]."""

    kinematic: KinematicState
    activations: tuple[float, ...] = ()

    def __post_init__(self):
        clamped = tuple(min(1.0, max(0.0, float(a))) for a in self.activations)
        object.__setattr__(self, "activations", clamped)


@dataclass(frozen=True)
class MuscleTendonUnit:
    """Straight-line muscle-tendon unit with optional explicit moment arms.

    origin is expressed in the shoulder frame, insertion in the humerus
    frame (both relative to the joint center).  When ``moment_arm_fn`` is
    None, moment arms derive from the tendon-excursion of the wrapped path.
    """

    name: str
    origin: tuple[float, float, float]
    insertion: tuple[float, float, float]
    tendon_slack_length: float
    max_isometric_force: float
    moment_arm_fn: Callable[[JointAngles], np.ndarray] | None = None

    def __post_init__(self):
        if self.tendon_slack_length <= 0:
            raise ValueError(f"{self.name}: tendon_slack_length must be > 0")
        if self.max_isometric_force <= 0:
            raise ValueError(f"{self.name}: max_isometric_force must be > 0")


@dataclass(frozen=True)
class ArmDynamicsParams:
    """Inertial and geometric parameters of the braced arm.

    The arm is modeled as an axisymmetric rigid body pinned at the joint
    center: ``transverse_inertia`` about any axis through the center normal
    to the humerus, ``axial_inertia`` about the humerus axis.
    """

    humerus_length: float = 0.30       # L_hum [m]
    brace_offset: float = 0.05         # deltaL: elbow -> end-effector [m]
    arm_mass: float = 2.5              # [kg]
    com_distance: float = 0.18         # joint center -> arm COM along humerus [m]
    transverse_inertia: float = 0.10   # [kg m^2]
    axial_inertia: float = 0.008       # [kg m^2]
    gravity: float = 9.81              # [m/s^2]
    damping: float = 0.5               # viscous, per DoF [N m s/rad]

    def __post_init__(self):
        for name in ("humerus_length", "brace_offset", "arm_mass", "com_distance",
                     "transverse_inertia", "axial_inertia"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def total_length(self) -> float:
        return self.humerus_length + self.brace_offset


# ---------------------------------------------------------------------------
# rotation kernels (broadcast over leading axes)


def rot_y(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    zero, one = np.zeros_like(c), np.ones_like(c)
    return np.stack(
        [
            np.stack([c, zero, s], axis=-1),
            np.stack([zero, one, zero], axis=-1),
            np.stack([-s, zero, c], axis=-1),
        ],
        axis=-2,
    )


def rot_x(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    zero, one = np.zeros_like(c), np.ones_like(c)
    return np.stack(
        [
            np.stack([one, zero, zero], axis=-1),
            np.stack([zero, c, -s], axis=-1),
            np.stack([zero, s, c], axis=-1),
        ],
        axis=-2,
    )


def humerus_rotation(pe, se, ar) -> np.ndarray:
    """R_Y(pe) @ R_X(-se) @ R_Y(ar), broadcasting over array inputs."""
    return rot_y(pe) @ rot_x(-np.asarray(se, dtype=float)) @ rot_y(ar)


def humerus_direction(pe, se) -> np.ndarray:
    """Unit vector from joint center toward the elbow, shoulder frame."""
    pe = np.asarray(pe, dtype=float)
    se = np.asarray(se, dtype=float)
    return np.stack(
        [np.sin(pe) * np.sin(se), -np.cos(se), np.cos(pe) * np.sin(se)], axis=-1
    )


def euler_rate_matrix(pe, se) -> np.ndarray:
    """B(theta) with omega_world = B @ theta_dot for the Y-X'-Y'' sequence."""
    pe = np.asarray(pe, dtype=float)
    se = np.asarray(se, dtype=float)
    cp, sp = np.cos(pe), np.sin(pe)
    cs, ss = np.cos(se), np.sin(se)
    zero, one = np.zeros_like(pe), np.ones_like(pe)
    b1 = np.stack([zero, one, zero], axis=-1)
    b2 = np.stack([-cp, zero, sp], axis=-1)
    b3 = np.stack([-sp * ss, cs, -cp * ss], axis=-1)
    return np.stack([b1, b2, b3], axis=-1)


# ---------------------------------------------------------------------------
# muscle path geometry


def _wrapped_length(origin: np.ndarray, insertion_sh: np.ndarray, radius: float):
    """Length of the shortest path origin -> insertion around the wrap sphere.

    Both endpoints must lie outside the sphere.  Vectorized over the leading
    axes of ``insertion_sh``.
    """
    o = np.asarray(origin, dtype=float)
    p = np.asarray(insertion_sh, dtype=float)
    a = np.linalg.norm(o)
    b = np.linalg.norm(p, axis=-1)
    dot = np.clip(p @ o / (a * b), -1.0, 1.0)
    gamma = np.arccos(dot)
    phi = gamma - math.acos(radius / a) - np.arccos(np.clip(radius / b, -1.0, 1.0))
    straight = np.linalg.norm(p - o, axis=-1)
    wrapped = (
        math.sqrt(a * a - radius * radius)
        + np.sqrt(np.maximum(b * b - radius * radius, 0.0))
        + radius * np.maximum(phi, 0.0)
    )
    return np.where(phi > 0.0, wrapped, straight)


class ShoulderModel:
    """Bundle of muscle geometry, dynamics parameters and joint bounds."""

    def __init__(
        self,
        muscles: Sequence[MuscleTendonUnit],
        params: ArmDynamicsParams | None = None,
        bounds: JointBounds | None = None,
        wrap_radius: float = 0.027,
        fiber_gain: float = 0.05,
        passive_share: float = 0.25,
    ):
        if not muscles:
            raise ValueError("model needs at least one muscle-tendon unit")
        self.muscles = tuple(muscles)
        self.params = params or ArmDynamicsParams()
        self.bounds = bounds or JointBounds()
        self.wrap_radius = float(wrap_radius)
        self.fiber_gain = float(fiber_gain)
        self.passive_share = float(passive_share)
        for m in self.muscles:
            if np.linalg.norm(m.origin) <= self.wrap_radius:
                raise ValueError(f"{m.name}: origin inside the wrap sphere")
            if np.linalg.norm(m.insertion) <= self.wrap_radius:
                raise ValueError(f"{m.name}: insertion inside the wrap sphere")
        # tendon length is anchored to the rest-pose path so that the rest
        # pose realizes exactly the tendon slack length (zero strain)
        self._by_name = {m.name: m for m in self.muscles}
        self._rest_path = {
            m.name: float(self._path_length(m, 0.0, 0.0, 0.0)) for m in self.muscles
        }

    # -- lookup ------------------------------------------------------------

    @property
    def muscle_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.muscles)

    def muscle(self, name: str) -> MuscleTendonUnit:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown muscle-tendon unit {name!r}") from None

    # -- geometry ----------------------------------------------------------

    def _path_length(self, unit: MuscleTendonUnit, pe, se, ar):
        rot = humerus_rotation(pe, se, ar)
        ins = rot @ np.asarray(unit.insertion, dtype=float)
        return _wrapped_length(np.asarray(unit.origin), ins, self.wrap_radius)

    def path_length(self, unit: MuscleTendonUnit, angles: JointAngles) -> float:
        return float(self._path_length(unit, angles.pe, angles.se, angles.ar))

    def tendon_length_arrays(self, unit: MuscleTendonUnit, pe, se, ar, activation):
        """Effective tendon length, vectorized over pose arrays.

        The tendon takes ``passive_share`` of the path excursion from rest;
        active fiber shortening (up to ``fiber_gain`` of path length at full
        activation) transfers entirely to the tendon.
        """
        lpath = self._path_length(unit, pe, se, ar)
        return (
            unit.tendon_slack_length
            + self.passive_share * (lpath - self._rest_path[unit.name])
            + self.fiber_gain * np.asarray(activation) * lpath
        )

    def tendon_length(self, unit: MuscleTendonUnit, state: MusculoskeletalState) -> float:
        angles = state.kinematic.angles
        self.bounds.check(angles)
        idx = self.muscles.index(unit)
        act = state.activations[idx] if idx < len(state.activations) else 0.0
        length = float(
            self.tendon_length_arrays(unit, angles.pe, angles.se, angles.ar, act)
        )
        if length <= 0.0:
            raise OutOfBoundsError(
                f"{unit.name}: nonpositive tendon length at pose {angles}"
            )
        return length

    def tendon_strain_arrays(self, unit, pe, se, ar, activation, clamped=True):
        l0 = unit.tendon_slack_length
        strain = (self.tendon_length_arrays(unit, pe, se, ar, activation) - l0) / l0 * 100.0
        return np.maximum(strain, 0.0) if clamped else strain

    def tendon_strain(
        self, unit: MuscleTendonUnit, state: MusculoskeletalState, clamped: bool = True
    ) -> float:
        length = self.tendon_length(unit, state)
        l0 = unit.tendon_slack_length
        strain = (length - l0) / l0 * 100.0
        return max(strain, 0.0) if clamped else strain

    def moment_arm_matrix(self, angles: JointAngles, step: float = 1e-6) -> np.ndarray:
        """3 x M moment arms about (pe, se, ar); tendon-excursion convention
        r = -dL/dtheta unless a unit carries an explicit moment_arm_fn."""
        cols = []
        theta = angles.as_array()
        for m in self.muscles:
            if m.moment_arm_fn is not None:
                cols.append(np.asarray(m.moment_arm_fn(angles), dtype=float))
                continue
            col = np.empty(3)
            for j in range(3):
                plus, minus = theta.copy(), theta.copy()
                plus[j] += step
                minus[j] -= step
                lp = self._path_length(m, *plus)
                lm = self._path_length(m, *minus)
                col[j] = -(lp - lm) / (2 * step)
            cols.append(col)
        return np.stack(cols, axis=-1)

    def check_moment_arm_guard(self, samples: int = 200, seed: int = 0,
                               limit: float = 0.1) -> None:
        """Sampled anatomical-plausibility guard: |moment arm| <= limit."""
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            angles = JointAngles(
                rng.uniform(*self.bounds.pe),
                rng.uniform(self.bounds.se[0] + 0.05, self.bounds.se[1] - 0.05),
                rng.uniform(*self.bounds.ar),
            )
            arms = self.moment_arm_matrix(angles)
            if np.abs(arms).max() > limit:
                worst = self.muscle_names[int(np.argmax(np.abs(arms).max(axis=0)))]
                raise ValueError(
                    f"moment arm of {worst} exceeds {limit} m at {angles}"
                )

    # -- rigid-body dynamics -----------------------------------------------

    def mass_matrix(self, se: float) -> np.ndarray:
        p = self.params
        it, ia = p.transverse_inertia, p.axial_inertia
        c, s = math.cos(se), math.sin(se)
        return np.array(
            [
                [it * s * s + ia * c * c, 0.0, ia * c],
                [0.0, it, 0.0],
                [ia * c, 0.0, ia],
            ]
        )

    def _mass_matrix_d_se(self, se: float) -> np.ndarray:
        it, ia = self.params.transverse_inertia, self.params.axial_inertia
        c, s = math.cos(se), math.sin(se)
        return np.array(
            [
                [2 * (it - ia) * s * c, 0.0, -ia * s],
                [0.0, 0.0, 0.0],
                [-ia * s, 0.0, 0.0],
            ]
        )

    def _mass_matrix_d2_se(self, se: float) -> np.ndarray:
        it, ia = self.params.transverse_inertia, self.params.axial_inertia
        c, s = math.cos(se), math.sin(se)
        return np.array(
            [
                [2 * (it - ia) * (c * c - s * s), 0.0, -ia * c],
                [0.0, 0.0, 0.0],
                [-ia * c, 0.0, 0.0],
            ]
        )

    def gravity_torque(self, se: float) -> np.ndarray:
        p = self.params
        return np.array([0.0, p.arm_mass * p.gravity * p.com_distance * math.sin(se), 0.0])

    def _check_singularity(self, se: float) -> None:
        if min(abs(se), abs(math.pi - se)) < EPS_SINGULAR:
            raise SingularPoseError(f"se = {se:.6f} rad is within the singular band")

    def coriolis_torque(self, se: float, thetadot: np.ndarray) -> np.ndarray:
        h = self._mass_matrix_d_se(se)
        hv = h @ thetadot
        out = thetadot[1] * hv
        out[1] -= 0.5 * float(thetadot @ hv)
        return out

    def forward_dynamics(
        self, q: np.ndarray, u: np.ndarray, check_bounds: bool = True
    ) -> np.ndarray:
        """qdot = f(q, u) for q = [theta, theta_dot] and joint torques u."""
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(u))):
            raise ValueError("non-finite state or torque")
        se = float(q[1])
        self._check_singularity(se)
        if check_bounds:
            self.bounds.check(JointAngles.from_array(q[:3]))
            self.bounds.check_velocity(q[3:6])
        thetadot = q[3:6]
        rhs = (
            u
            - self.coriolis_torque(se, thetadot)
            - self.gravity_torque(se)
            - self.params.damping * thetadot
        )
        thetaddot = np.linalg.solve(self.mass_matrix(se), rhs)
        return np.concatenate([thetadot, thetaddot])

    def dynamics_jacobians(self, q: np.ndarray, u: np.ndarray):
        """(df/dq, df/du), both analytic; raises near the se singularity."""
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        se = float(q[1])
        self._check_singularity(se)
        thetadot = q[3:6]
        p = self.params
        m = self.mass_matrix(se)
        m_inv = np.linalg.inv(m)
        h = self._mass_matrix_d_se(se)
        h2 = self._mass_matrix_d2_se(se)
        hv = h @ thetadot

        rhs = u - self.coriolis_torque(se, thetadot) - self.gravity_torque(se) \
            - p.damping * thetadot
        thetaddot = m_inv @ rhs

        # d(C thetadot)/d se and d g/d se
        h2v = h2 @ thetadot
        dcor_dse = thetadot[1] * h2v
        dcor_dse[1] -= 0.5 * float(thetadot @ h2v)
        dgrav_dse = np.array(
            [0.0, p.arm_mass * p.gravity * p.com_distance * math.cos(se), 0.0]
        )

        # d(C thetadot)/d thetadot
        e2 = np.array([0.0, 1.0, 0.0])
        dcor_dvel = np.outer(hv, e2) + thetadot[1] * h - np.outer(e2, hv)

        dacc_dtheta = np.zeros((3, 3))
        dacc_dtheta[:, 1] = m_inv @ (-h @ thetaddot - dcor_dse - dgrav_dse)
        dacc_dvel = m_inv @ (-dcor_dvel - p.damping * np.eye(3))

        df_dq = np.zeros((6, 6))
        df_dq[0:3, 3:6] = np.eye(3)
        df_dq[3:6, 0:3] = dacc_dtheta
        df_dq[3:6, 3:6] = dacc_dvel

        df_du = np.zeros((6, 3))
        df_du[3:6, :] = m_inv
        return df_dq, df_du

    def total_energy(self, q: np.ndarray) -> float:
        q = np.asarray(q, dtype=float)
        se = float(q[1])
        thetadot = q[3:6]
        p = self.params
        kinetic = 0.5 * float(thetadot @ self.mass_matrix(se) @ thetadot)
        potential = -p.arm_mass * p.gravity * p.com_distance * math.cos(se)
        return kinetic + potential

    # batched versions used by the planner ---------------------------------

    def forward_dynamics_batch(self, q: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Vectorized f(q, u) over rows; se is clamped into the regular band
        (callers inside the optimizer are responsible for staying clear)."""
        return self.dynamics_batch(q, u, jacobians=False)[0]

    def dynamics_batch(self, q: np.ndarray, u: np.ndarray, jacobians: bool = True):
        """Vectorized dynamics and analytic Jacobians for the optimizer.

        Returns (f, df_dq, df_du) with leading batch axis; the elevation
        angle is clamped into the regular band instead of raising.
        """
        q = np.atleast_2d(np.asarray(q, dtype=float))
        u = np.atleast_2d(np.asarray(u, dtype=float))
        se = np.clip(q[:, 1], EPS_SINGULAR, math.pi - EPS_SINGULAR)
        thetadot = q[:, 3:6]
        p = self.params
        it, ia = p.transverse_inertia, p.axial_inertia
        c, s = np.cos(se), np.sin(se)
        n = q.shape[0]
        m = np.zeros((n, 3, 3))
        m[:, 0, 0] = it * s * s + ia * c * c
        m[:, 1, 1] = it
        m[:, 2, 2] = ia
        m[:, 0, 2] = m[:, 2, 0] = ia * c
        h = np.zeros((n, 3, 3))
        h[:, 0, 0] = 2 * (it - ia) * s * c
        h[:, 0, 2] = h[:, 2, 0] = -ia * s
        hv = np.einsum("nij,nj->ni", h, thetadot)
        cor = thetadot[:, 1:2] * hv
        cor[:, 1] -= 0.5 * np.einsum("ni,ni->n", thetadot, hv)
        grav_coeff = p.arm_mass * p.gravity * p.com_distance
        grav = np.zeros((n, 3))
        grav[:, 1] = grav_coeff * s
        rhs = u - cor - grav - p.damping * thetadot
        m_inv = np.linalg.inv(m)
        thetaddot = np.einsum("nij,nj->ni", m_inv, rhs)
        f = np.concatenate([thetadot, thetaddot], axis=1)
        if not jacobians:
            return f, None, None

        h2 = np.zeros((n, 3, 3))
        h2[:, 0, 0] = 2 * (it - ia) * (c * c - s * s)
        h2[:, 0, 2] = h2[:, 2, 0] = -ia * c
        h2v = np.einsum("nij,nj->ni", h2, thetadot)
        dcor_dse = thetadot[:, 1:2] * h2v
        dcor_dse[:, 1] -= 0.5 * np.einsum("ni,ni->n", thetadot, h2v)
        dgrav_dse = np.zeros((n, 3))
        dgrav_dse[:, 1] = grav_coeff * c

        e2 = np.array([0.0, 1.0, 0.0])
        dcor_dvel = (
            np.einsum("ni,j->nij", hv, e2)
            + thetadot[:, 1, None, None] * h
            - np.einsum("i,nj->nij", e2, hv)
        )

        dacc_dse = np.einsum(
            "nij,nj->ni",
            m_inv,
            -np.einsum("nij,nj->ni", h, thetaddot) - dcor_dse - dgrav_dse,
        )
        dacc_dvel = np.einsum(
            "nij,njk->nik", m_inv, -(dcor_dvel + p.damping * np.eye(3))
        )

        df_dq = np.zeros((n, 6, 6))
        df_dq[:, 0:3, 3:6] = np.eye(3)
        df_dq[:, 3:6, 1] = dacc_dse
        df_dq[:, 3:6, 3:6] = dacc_dvel
        df_du = np.zeros((n, 6, 3))
        df_du[:, 3:6, :] = m_inv
        return f, df_dq, df_du


def rk4_step(model: ShoulderModel, q: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Classic RK4 integration step; test oracle, not the runtime integrator."""
    f = lambda x: model.forward_dynamics(x, u, check_bounds=False)
    k1 = f(q)
    k2 = f(q + 0.5 * dt * k1)
    k3 = f(q + 0.5 * dt * k2)
    k4 = f(q + dt * k3)
    return q + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# default model


def default_muscles() -> list[MuscleTendonUnit]:
    """Six plausible units: four rotator-cuff-like stabilizers and two
    deltoid-like prime movers.  Parameters are hand-tuned, not anatomical."""
    return [
        MuscleTendonUnit(
            "supraspinatus",
            origin=(0.000, 0.030, -0.060),
            insertion=(0.010, 0.024, 0.020),
            tendon_slack_length=0.035,
            max_isometric_force=500.0,
        ),
        MuscleTendonUnit(
            "infraspinatus",
            origin=(-0.030, 0.061, 0.018),
            insertion=(0.000, -0.014, -0.030),
            tendon_slack_length=0.030,
            max_isometric_force=1200.0,
        ),
        MuscleTendonUnit(
            "subscapularis",
            origin=(-0.018, 0.061, 0.030),
            insertion=(0.017, 0.000, 0.029),
            tendon_slack_length=0.032,
            max_isometric_force=1300.0,
        ),
        MuscleTendonUnit(
            "teres_minor",
            origin=(-0.035, 0.061, 0.000),
            insertion=(-0.030, -0.014, 0.000),
            tendon_slack_length=0.028,
            max_isometric_force=400.0,
        ),
        MuscleTendonUnit(
            "deltoid_anterior",
            origin=(0.015, 0.040, 0.030),
            insertion=(0.012, -0.110, 0.008),
            tendon_slack_length=0.090,
            max_isometric_force=1100.0,
        ),
        MuscleTendonUnit(
            "deltoid_posterior",
            origin=(-0.050, 0.035, -0.030),
            insertion=(0.000, -0.110, -0.012),
            tendon_slack_length=0.085,
            max_isometric_force=900.0,
        ),
    ]


def default_model(**overrides) -> ShoulderModel:
    return ShoulderModel(default_muscles(), **overrides)
