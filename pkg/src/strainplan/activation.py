"""Online estimation of muscle activations from motion and forces.

The required muscle torque follows from inverse dynamics minus the sensed
robot contribution; a least-effort program distributes it across the
redundant muscles:

    min sum(a_i^2)  s.t.  R(theta) (a * F_max) = tau,  0 <= a <= 1

solved by a projected active-set iteration on the bounds.  When the torque
is not reachable within the bounds the estimator falls back to bounded
least squares and reports the residual instead of hiding it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from scipy.optimize import lsq_linear

from .shoulder import JointAngles, ShoulderModel

STALE_GAP = 0.5  # s without input before estimates are flagged


@dataclass(frozen=True)
class EstimatorInput:
    """Sensed kinematics plus external generalized torques at one instant."""

    angles: JointAngles
    velocities: np.ndarray
    accelerations: np.ndarray | None
    external_torque: np.ndarray
    timestamp: float

    def __post_init__(self):
        object.__setattr__(self, "velocities",
                           np.asarray(self.velocities, dtype=float))
        if self.accelerations is not None:
            object.__setattr__(self, "accelerations",
                               np.asarray(self.accelerations, dtype=float))
        object.__setattr__(self, "external_torque",
                           np.asarray(self.external_torque, dtype=float))


@dataclass(frozen=True)
class ActivationEstimate:
    activations: np.ndarray  # in [0, 1] per muscle
    residual: np.ndarray  # unexplained torque, N m per DoF
    solve_time: float
    timestamp: float
    stale: bool = False

    def by_name(self, model: ShoulderModel) -> dict[str, float]:
        return dict(zip(model.muscle_names, map(float, self.activations)))


def required_torque(
    inp: EstimatorInput, model: ShoulderModel, accelerations=None
) -> np.ndarray:
    """Muscle torque consistent with the observed motion and external load:
    M(th) thdd + C(th, thd) thd + g(th) + D thd - tau_external."""
    acc = accelerations if accelerations is not None else inp.accelerations
    if acc is None:
        raise ValueError("accelerations required (provide or differentiate)")
    se = inp.angles.se
    thetadot = inp.velocities
    inertial = model.mass_matrix(se) @ np.asarray(acc, dtype=float)
    bias = (
        model.coriolis_torque(se, thetadot)
        + model.gravity_torque(se)
        + model.params.damping * thetadot
    )
    return inertial + bias - inp.external_torque


def _least_norm(w_free: np.ndarray, rhs: np.ndarray):
    """Minimum-norm solution of an underdetermined system, rank-safe."""
    gram = w_free @ w_free.T
    try:
        lam = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        lam = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    return w_free.T @ lam


def solve_activations(
    tau: np.ndarray,
    pose: JointAngles,
    model: ShoulderModel,
    timestamp: float = 0.0,
    tol: float = 1e-10,
) -> ActivationEstimate:
    """Least-effort activations realizing ``tau`` at ``pose``."""
    start = time.perf_counter()
    tau = np.asarray(tau, dtype=float)
    arms = model.moment_arm_matrix(pose)
    f_max = np.array([m.max_isometric_force for m in model.muscles])
    w = arms * f_max  # columns scaled: torque = w @ alpha
    m = w.shape[1]

    alpha = np.zeros(m)
    at_lower = np.zeros(m, dtype=bool)
    at_upper = np.zeros(m, dtype=bool)
    feasible = True
    for _ in range(3 * m + 10):
        free = ~(at_lower | at_upper)
        rhs = tau - w[:, at_upper] @ np.ones(int(at_upper.sum()))
        if not np.any(free):
            alpha = at_upper.astype(float)
            feasible = bool(np.linalg.norm(rhs) <= 1e-8 * (1 + np.linalg.norm(tau)))
            break
        sol = _least_norm(w[:, free], rhs)
        residual = np.linalg.norm(w[:, free] @ sol - rhs)
        if residual > 1e-8 * (1.0 + np.linalg.norm(tau)):
            feasible = False
            break
        if np.all(sol >= -tol) and np.all(sol <= 1.0 + tol):
            alpha = np.zeros(m)
            alpha[free] = np.clip(sol, 0.0, 1.0)
            alpha[at_upper] = 1.0
            # KKT on the bound-active variables: release when profitable
            gram = w[:, free] @ w[:, free].T
            try:
                lam = np.linalg.solve(gram, rhs)
            except np.linalg.LinAlgError:
                lam = np.linalg.lstsq(gram, rhs, rcond=None)[0]
            # scaled multiplier: gradient_i equals alpha_i on free variables,
            # so lower bounds release above 0 and upper bounds below 1
            gradient = w.T @ lam
            release_lower = at_lower & (gradient > tol)
            release_upper = at_upper & (gradient < 1.0 - tol)
            if not release_lower.any() and not release_upper.any():
                break
            at_lower[release_lower] = False
            at_upper[release_upper] = False
        else:
            # clamp the worst violator to its nearest bound
            idx_free = np.flatnonzero(free)
            below = np.clip(-sol, 0.0, None)
            above = np.clip(sol - 1.0, 0.0, None)
            worst = int(np.argmax(np.maximum(below, above)))
            if below[worst] >= above[worst]:
                at_lower[idx_free[worst]] = True
            else:
                at_upper[idx_free[worst]] = True
    else:
        feasible = False

    if not feasible:
        # torque not reachable inside the bounds: bounded least squares,
        # residual reported rather than hidden
        res = lsq_linear(w, tau, bounds=(0.0, 1.0), method="bvls")
        alpha = np.clip(res.x, 0.0, 1.0)

    residual = w @ alpha - tau
    return ActivationEstimate(
        activations=alpha,
        residual=residual,
        solve_time=time.perf_counter() - start,
        timestamp=timestamp,
    )


@dataclass
class _StreamState:
    history: list = field(default_factory=list)


class ActivationEstimator:
    """Streaming wrapper: numerical acceleration, smoothing, staleness."""

    def __init__(self, model: ShoulderModel, smoothing: float = 0.3):
        if not 0.0 < smoothing <= 1.0:
            raise ValueError("smoothing must be in (0, 1]")
        self.model = model
        self.smoothing = float(smoothing)
        self._window: list[EstimatorInput] = []
        self._smoothed: np.ndarray | None = None
        self._last_time: float | None = None

    def reset(self) -> None:
        self._window.clear()
        self._smoothed = None
        self._last_time = None

    def _acceleration(self, inp: EstimatorInput) -> np.ndarray:
        if inp.accelerations is not None:
            return inp.accelerations
        if len(self._window) < 2:
            return np.zeros(3)
        # central difference across the 3-sample window, evaluated at its
        # midpoint; adequate at the estimator rate
        first = self._window[-2]
        dt = inp.timestamp - first.timestamp
        if dt <= 0:
            return np.zeros(3)
        return (inp.velocities - first.velocities) / dt

    def submit(self, inp: EstimatorInput) -> ActivationEstimate:
        if self._last_time is not None and inp.timestamp <= self._last_time:
            raise ValueError("estimator input timestamps must strictly increase")
        stale = (
            self._last_time is not None
            and inp.timestamp - self._last_time > STALE_GAP
        )
        if stale:
            self._window.clear()
        self._last_time = inp.timestamp
        self._window.append(inp)
        if len(self._window) > 3:
            self._window.pop(0)

        tau = required_torque(inp, self.model, self._acceleration(inp))
        estimate = solve_activations(tau, inp.angles, self.model, inp.timestamp)
        if self._smoothed is None:
            self._smoothed = estimate.activations.copy()
        else:
            self._smoothed = self._smoothed + self.smoothing * (
                estimate.activations - self._smoothed
            )
        return ActivationEstimate(
            activations=self._smoothed.copy(),
            residual=estimate.residual,
            solve_time=estimate.solve_time,
            timestamp=inp.timestamp,
            stale=stale,
        )

    def run(self, inputs: Iterable[EstimatorInput]) -> Iterator[ActivationEstimate]:
        for inp in inputs:
            yield self.submit(inp)
