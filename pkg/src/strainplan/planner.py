"""Strain-aware optimal control over a single 2D strain map.

The running cost trades instantaneous tendon strain, joint accelerations of
the two controlled DoFs, and normalized distance to the goal pose; the
transcription of :mod:`strainplan.collocation` turns it into a sparse NLP
solved by :mod:`strainplan.sqp`.  A receding-horizon wrapper re-selects the
strain map from the latest (AR, activation) estimate, re-solves with a
shift-by-one warm start and publishes immutable solution snapshots.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .collocation import TerminalSet, Transcription
from .maps import MapLibrary, MapSelector, StrainMap
from .shoulder import KinematicState, ShoulderModel
from .sqp import SolveStatus, solve_sqp

log = logging.getLogger(__name__)

DEG2 = math.radians(2.0)


def _default_q1() -> np.ndarray:
    # all three joint accelerations: the axial DoF must appear somewhere in
    # the cost or its torque direction is unregularized (the executed motion
    # keeps it locked anyway)
    return np.diag([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])


def _default_q2() -> np.ndarray:
    return np.diag([1.0, 1.0, 0.0, 0.0, 0.0, 0.0])


class TerminalMode(Enum):
    FULL_TERMINAL = "FULL_TERMINAL"
    VELOCITY_ONLY_TERMINAL = "VELOCITY_ONLY_TERMINAL"


@dataclass(frozen=True)
class CostConfig:
    """Weights and selectors of the running cost."""

    w_strain: float = 1.0
    w_acc: float = 10.0
    w_goal: float = 0.0
    q1: np.ndarray = field(default_factory=_default_q1)
    q2: np.ndarray = field(default_factory=_default_q2)
    d0: float | None = None  # start-to-goal distance; computed when None
    d0_min: float = 1e-3

    def __post_init__(self):
        if min(self.w_strain, self.w_acc, self.w_goal) < 0:
            raise ValueError("cost weights must be non-negative")
        for name in ("q1", "q2"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (6, 6) or not np.allclose(m, m.T):
                raise ValueError(f"{name} must be a symmetric 6x6 matrix")
            if np.linalg.eigvalsh(m).min() < -1e-10:
                raise ValueError(f"{name} must be positive semidefinite")
            object.__setattr__(self, name, m)


@dataclass(frozen=True)
class OcpConfig:
    """Horizon, transcription and constraint settings of one OCP instance."""

    horizon: float = 5.0
    n_intervals: int = 50
    degree: int = 3
    u_min: tuple[float, float, float] = (-20.0, -20.0, -20.0)
    u_max: tuple[float, float, float] = (20.0, 40.0, 20.0)
    epsilon: tuple[float, ...] = (DEG2**2,) * 6
    mode: TerminalMode = TerminalMode.FULL_TERMINAL
    terminal_penalty: float = 1000.0
    max_iterations: int = 100
    tol_eq: float = 1e-8
    tol_step: float = 1e-3
    hessian_damping: float = 1e-8
    # real-time iteration cap for warm-started receding-horizon re-solves;
    # cold solves and map switches always run to full convergence
    rti_iterations: int = 4

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.n_intervals < 2:
            raise ValueError("need at least two intervals")
        if np.any(np.asarray(self.u_min) >= np.asarray(self.u_max)):
            raise ValueError("u_min must be below u_max")
        if np.any(np.asarray(self.epsilon) <= 0):
            raise ValueError("terminal tolerances must be positive")


@dataclass(frozen=True)
class DenseTrajectory:
    """Upsampled reference at the control rate; t0 is the simulation time
    at which the plan starts."""

    times: np.ndarray
    states: np.ndarray  # (n, 6)
    controls: np.ndarray  # (n, 3)
    t0: float = 0.0

    def sample(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Reference state and control at absolute time t (held at ends)."""
        local = t - self.t0
        if local <= self.times[0]:
            return self.states[0], self.controls[0]
        if local >= self.times[-1]:
            hold = self.states[-1].copy()
            hold[3:6] = 0.0  # hold pose, not velocity, beyond the horizon
            return hold, self.controls[-1]
        i = int(np.searchsorted(self.times, local) - 1)
        w = (local - self.times[i]) / (self.times[i + 1] - self.times[i])
        state = (1 - w) * self.states[i] + w * self.states[i + 1]
        return state, self.controls[i]


@dataclass(frozen=True)
class OcpSolution:
    knots: np.ndarray
    collocation_states: np.ndarray
    controls: np.ndarray
    objective: float
    solve_time: float
    status: SolveStatus
    dense: DenseTrajectory
    defect_max: float
    initial_residual: float
    bound_violation: float
    terminal_violation: float
    iterations: int
    kkt_residual: float
    merit_history: tuple
    z: np.ndarray = field(repr=False)
    t0: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == SolveStatus.CONVERGED

    @property
    def usable(self) -> bool:
        """Feasible enough to execute: converged, or iteration-capped with
        defects far below physically relevant scales."""
        return self.status == SolveStatus.CONVERGED or (
            self.status == SolveStatus.MAX_ITER and self.defect_max < 1e-3
        )

    def diagnostics(self) -> dict:
        return {
            "status": self.status.value,
            "objective": self.objective,
            "solve_time": self.solve_time,
            "iterations": self.iterations,
            "defect_max": self.defect_max,
            "initial_residual": self.initial_residual,
            "bound_violation": self.bound_violation,
            "terminal_violation": self.terminal_violation,
            "kkt_residual": self.kkt_residual,
        }


# ---------------------------------------------------------------------------
# cost evaluation


def goal_distance(q: np.ndarray, target: np.ndarray, q2: np.ndarray) -> float:
    delta = np.asarray(q, dtype=float) - np.asarray(target, dtype=float)
    return float(np.sqrt(delta @ q2 @ delta))


def resolve_d0(cost: CostConfig, q_init, target) -> tuple[float, bool]:
    """(d0, goal_term_active): the goal term is dropped when the start is
    already within d0_min of the target."""
    d0 = cost.d0 if cost.d0 is not None else goal_distance(q_init, target, cost.q2)
    if d0 < cost.d0_min:
        return cost.d0_min, False
    return float(d0), True


def stage_cost(
    x,
    u,
    cost: CostConfig,
    strain_map: StrainMap,
    model: ShoulderModel,
    target: KinematicState | np.ndarray | None = None,
) -> float:
    """Scalar running cost at one state; the acceleration term uses the
    model dynamics, the strain term the clamped surrogate."""
    if hasattr(x, "kinematic"):
        q = x.kinematic.as_array()
    elif hasattr(x, "as_array"):
        q = x.as_array()
    else:
        q = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    total = 0.0
    if cost.w_strain > 0 and strain_map is not None:
        total += cost.w_strain * strain_map.evaluate(q[0], q[1]).value
    qdot = model.forward_dynamics(q, u, check_bounds=False)
    total += cost.w_acc * float(qdot @ cost.q1 @ qdot)
    if cost.w_goal > 0 and target is not None:
        tgt = target.as_array() if hasattr(target, "as_array") else np.asarray(target)
        d0, active = resolve_d0(cost, q, tgt)
        if active:
            delta = q - tgt
            total += cost.w_goal / d0**2 * float(delta @ cost.q2 @ delta)
    return total


def _psd_project_2x2(h_pp, h_ss, h_ps):
    """Eigenvalue clipping of symmetric 2x2 blocks, vectorized."""
    mean = 0.5 * (h_pp + h_ss)
    radius = np.sqrt(0.25 * (h_pp - h_ss) ** 2 + h_ps**2)
    lam1 = np.clip(mean + radius, 0.0, None)
    lam2 = np.clip(mean - radius, 0.0, None)
    # eigenvector for lam1: [h_ps, lam1_raw - h_pp] unless degenerate
    v1x = np.where(np.abs(h_ps) > 1e-300, h_ps, 1.0)
    v1y = np.where(np.abs(h_ps) > 1e-300, mean + radius - h_pp,
                   (h_ss > h_pp).astype(float))
    norm = np.hypot(v1x, v1y)
    norm = np.where(norm == 0.0, 1.0, norm)
    v1x, v1y = v1x / norm, v1y / norm
    v2x, v2y = -v1y, v1x
    out_pp = lam1 * v1x * v1x + lam2 * v2x * v2x
    out_ss = lam1 * v1y * v1y + lam2 * v2y * v2y
    out_ps = lam1 * v1x * v1y + lam2 * v2x * v2y
    return out_pp, out_ss, out_ps


def make_running_cost(
    cost: CostConfig,
    strain_map: StrainMap | None,
    target: np.ndarray,
    d0: float,
    goal_active: bool,
):
    """Batched running-cost callback for the transcription: returns value,
    gradients and a PSD Gauss-Newton Hessian block per collocation point."""
    q1 = cost.q1
    q2 = cost.q2
    w_goal = cost.w_goal / d0**2 if (goal_active and cost.w_goal > 0) else 0.0

    def running_cost(xc, uc, f_val, f_jx, f_ju):
        m = xc.shape[0]
        val = np.zeros(m)
        d_x = np.zeros((m, 6))
        d_u = np.zeros((m, 3))
        hess = np.zeros((m, 9, 9))

        if cost.w_acc > 0:
            j_full = np.concatenate([f_jx, f_ju], axis=2)  # (m, 6, 9)
            q1f = f_val @ q1  # (m, 6)
            val += cost.w_acc * np.einsum("mi,mi->m", f_val, q1f)
            grad_full = 2.0 * cost.w_acc * np.einsum("mi,mij->mj", q1f, j_full)
            d_x += grad_full[:, :6]
            d_u += grad_full[:, 6:]
            hess += 2.0 * cost.w_acc * np.einsum(
                "mia,ij,mjb->mab", j_full, q1, j_full
            )

        if strain_map is not None and cost.w_strain > 0:
            sv, d_pe, d_se, h_pp, h_ss, h_ps = strain_map.planner_terms(
                xc[:, 0], xc[:, 1]
            )
            val += cost.w_strain * sv
            d_x[:, 0] += cost.w_strain * d_pe
            d_x[:, 1] += cost.w_strain * d_se
            p_pp, p_ss, p_ps = _psd_project_2x2(h_pp, h_ss, h_ps)
            hess[:, 0, 0] += cost.w_strain * p_pp
            hess[:, 1, 1] += cost.w_strain * p_ss
            hess[:, 0, 1] += cost.w_strain * p_ps
            hess[:, 1, 0] += cost.w_strain * p_ps

        if w_goal > 0:
            delta = xc - target
            q2d = delta @ q2
            val += w_goal * np.einsum("mi,mi->m", delta, q2d)
            d_x += 2.0 * w_goal * q2d
            hess[:, :6, :6] += 2.0 * w_goal * q2

        return val, d_x, d_u, hess

    return running_cost


def wrap_dynamics(dynamics):
    """Accept either a ShoulderModel or a batched callable."""
    if isinstance(dynamics, ShoulderModel):
        return lambda x, u: dynamics.dynamics_batch(x, u)
    return dynamics


# ---------------------------------------------------------------------------
# transcription and solve


def transcribe(
    cfg: OcpConfig,
    cost: CostConfig,
    dynamics,
    strain_map: StrainMap | None,
    q_init,
    target,
) -> Transcription:
    """Build the sparse NLP for one instance.  ``dynamics`` is a
    ShoulderModel or a batched callable (stubs welcome in tests)."""
    q_init = np.asarray(q_init, dtype=float)
    target = np.asarray(target, dtype=float)
    d0, goal_active = resolve_d0(cost, q_init, target)
    if cfg.mode == TerminalMode.FULL_TERMINAL:
        indices = np.arange(6)
    else:
        indices = np.arange(3, 6)
    terminal = TerminalSet(
        target=target,
        epsilon=np.asarray(cfg.epsilon, dtype=float)[indices],
        indices=indices,
        penalty=cfg.terminal_penalty,
    )
    return Transcription(
        dynamics=wrap_dynamics(dynamics),
        running_cost=make_running_cost(cost, strain_map, target, d0, goal_active),
        q_init=q_init,
        horizon=cfg.horizon,
        n_intervals=cfg.n_intervals,
        degree=cfg.degree,
        u_min=np.asarray(cfg.u_min, dtype=float),
        u_max=np.asarray(cfg.u_max, dtype=float),
        terminal=terminal,
        hessian_damping=cfg.hessian_damping,
    )


def straight_line_guess(
    trans: Transcription, target: np.ndarray, model: ShoulderModel | None = None
) -> np.ndarray:
    """Deterministic initialization: poses on the chord to the goal, matching
    constant velocities, gravity-compensating torques when a model is given."""
    N, d = trans.n_intervals, trans.degree
    q0 = trans.q_init
    tgt = np.asarray(target, dtype=float)
    knots = np.zeros((N + 1, 6))
    collocs = np.zeros((N, d, 6))
    controls = np.zeros((N, 3))
    vel = (tgt[:3] - q0[:3]) / trans.horizon

    def state_at(frac):
        s = np.zeros(6)
        s[:3] = q0[:3] + (tgt[:3] - q0[:3]) * frac
        s[3:6] = vel
        return s

    for k in range(N + 1):
        knots[k] = state_at(k / N)
    knots[0] = q0
    for k in range(N):
        for j in range(1, d + 1):
            collocs[k, j - 1] = state_at((k + trans.tau[j]) / N)
        if model is not None:
            u = model.gravity_torque(float(collocs[k, 0, 1]))
            lo = trans.u_min if trans.u_min is not None else -np.inf
            hi = trans.u_max if trans.u_max is not None else np.inf
            controls[k] = np.clip(u, lo, hi)
    slack = None
    if trans.n_slack:
        t = trans.terminal
        dev = knots[N][t.indices] - t.target[t.indices]
        slack = np.clip(dev * dev - t.epsilon, 0.0, None) + 1e-6
    return trans.pack(knots, collocs, controls, slack)


def shift_warm_start(trans: Transcription, previous: OcpSolution) -> np.ndarray:
    """Shift the previous solution by one interval, duplicating the last."""
    N = trans.n_intervals
    knots = np.vstack([previous.knots[1:], previous.knots[-1]])
    collocs = np.concatenate(
        [previous.collocation_states[1:], previous.collocation_states[-1:]]
    )
    controls = np.vstack([previous.controls[1:], previous.controls[-1]])
    slack = None
    if trans.n_slack:
        t = trans.terminal
        dev = knots[N][t.indices] - t.target[t.indices]
        slack = np.clip(dev * dev - t.epsilon, 0.0, None) + 1e-9
    return trans.pack(knots[: N + 1], collocs[:N], controls[:N], slack)


def upsample(trans: Transcription, z: np.ndarray, rate: float = 200.0,
             t0: float = 0.0) -> DenseTrajectory:
    """Evaluate the collocation polynomial on a uniform grid; endpoints
    coincide with the knot values exactly."""
    n = int(round(trans.horizon * rate))
    times = np.linspace(0.0, trans.horizon, n + 1)
    states = trans.interpolate(z, times)
    controls = trans.interpolate_controls(z, times)
    return DenseTrajectory(times, states, controls, t0=t0)


def solve(
    trans: Transcription,
    cfg: OcpConfig,
    warm_start: OcpSolution | np.ndarray | None = None,
    model: ShoulderModel | None = None,
    target: np.ndarray | None = None,
    rate: float = 200.0,
    t0: float = 0.0,
    max_iterations: int | None = None,
    qp_max_iter: int = 30,
) -> OcpSolution:
    """Run the SQP on a transcription and package the solution."""
    if isinstance(warm_start, OcpSolution):
        z0 = shift_warm_start(trans, warm_start)
    elif warm_start is not None:
        z0 = np.asarray(warm_start, dtype=float)
    else:
        tgt = target if target is not None else trans.terminal.target
        z0 = straight_line_guess(trans, tgt, model)

    res = solve_sqp(
        trans,
        z0,
        max_iter=max_iterations or cfg.max_iterations,
        tol_eq=cfg.tol_eq,
        tol_step=cfg.tol_step,
        qp_max_iter=qp_max_iter,
    )
    knots, collocs, controls = trans.unpack(res.z)
    lb, ub = trans.bounds()
    bound_violation = float(
        max(np.clip(lb - res.z, 0, None).max(), np.clip(res.z - ub, 0, None).max())
    )
    if trans.n_slack:
        t = trans.terminal
        dev = knots[-1][t.indices] - t.target[t.indices]
        terminal_violation = float(np.clip(dev * dev - t.epsilon, 0.0, None).max())
    else:
        terminal_violation = 0.0
    status = res.status
    if status == SolveStatus.CONVERGED and terminal_violation > 1e-8:
        # dynamics-feasible but the soft terminal margin stayed active
        status = SolveStatus.INFEASIBLE
    dense = upsample(trans, res.z, rate, t0=t0)
    return OcpSolution(
        knots=knots,
        collocation_states=collocs,
        controls=controls,
        objective=res.objective,
        solve_time=res.solve_time,
        status=status,
        dense=dense,
        defect_max=trans.defect_max(res.z),
        initial_residual=trans.initial_residual(res.z),
        bound_violation=bound_violation,
        terminal_violation=terminal_violation,
        iterations=res.iterations,
        kkt_residual=res.kkt_residual,
        merit_history=tuple(res.merit_history),
        z=res.z,
        t0=t0,
    )


# ---------------------------------------------------------------------------
# receding horizon


@dataclass(frozen=True)
class PlannerInput:
    """Immutable estimator snapshot consumed by the planner."""

    q: np.ndarray  # (6,) pose and rates
    activation: float  # activation driving map selection
    timestamp: float
    stale: bool = False


class RecedingHorizonPlanner:
    """Owns the solve loop; publishes immutable OcpSolution snapshots."""

    def __init__(
        self,
        model: ShoulderModel,
        library: MapLibrary,
        tendon_id: str,
        ocp: OcpConfig,
        cost: CostConfig,
        period: float = 0.1,
        staleness_limit: float = 0.5,
    ):
        self.model = model
        self.selector = MapSelector(library)
        self.tendon_id = tendon_id
        self.ocp = ocp
        self.base_cost = cost
        self.period = period
        self.staleness_limit = staleness_limit
        self._latest: OcpSolution | None = None
        self._target: np.ndarray | None = None
        self._d0: float | None = None
        self.failures = 0
        self.staleness_alarms = 0
        self.solve_log: list[dict] = []

    @property
    def latest(self) -> OcpSolution | None:
        return self._latest

    @property
    def current_map(self) -> StrainMap | None:
        return getattr(self, "_current_map", None)

    # below this start-to-goal distance the normalization stops shrinking:
    # the goal anchor must survive hold-at-goal commands
    D0_HOLD_FLOOR = 0.1

    def set_goal(self, target, now: float, current_q=None) -> None:
        tgt = target.as_array() if hasattr(target, "as_array") else np.asarray(target)
        self._target = tgt.astype(float)
        if current_q is not None:
            d0 = goal_distance(current_q, self._target, self.base_cost.q2)
            self._d0 = max(d0, self.D0_HOLD_FLOOR)
        else:
            self._d0 = None
        self._latest = None  # previous plan aimed at the old goal

    def step(self, snapshot: PlannerInput, now: float) -> OcpSolution | None:
        """One replanning step; returns the newly published solution or None
        when the previous reference is held."""
        if self._target is None:
            raise RuntimeError("set_goal must be called before stepping")
        if snapshot.stale or now - snapshot.timestamp > self.staleness_limit:
            self.staleness_alarms += 1
            log.warning("stale estimator snapshot at t=%.3f; holding reference", now)
            return None

        ar = float(snapshot.q[2])
        selection = self.selector.select(self.tendon_id, ar, snapshot.activation)
        map_switched = (
            self.current_map is None
            or selection.map is not self.current_map
        )
        self._current_map = selection.map

        if self._d0 is None:
            d0 = goal_distance(snapshot.q, self._target, self.base_cost.q2)
            self._d0 = max(d0, self.D0_HOLD_FLOOR)
        cost = replace(self.base_cost, d0=self._d0)

        trans = transcribe(
            self.ocp, cost, self.model, selection.map, snapshot.q, self._target
        )
        warm = self._latest if self._latest is not None else None
        # real-time iteration: steady warm re-solves get a small iteration
        # budget; cold starts and map switches run to full convergence
        budget = None if (warm is None or map_switched) else self.ocp.rti_iterations
        sol = solve(
            trans,
            self.ocp,
            warm_start=warm,
            model=self.model,
            target=self._target,
            t0=now,
            max_iterations=budget,
            qp_max_iter=30 if budget is None else 12,
        )
        self.solve_log.append({"t": now, **sol.diagnostics()})
        if sol.usable:
            self._latest = sol  # atomic snapshot swap
            return sol
        self.failures += 1
        log.warning("solve failed (%s) at t=%.3f; holding previous plan",
                    sol.status.value, now)
        return None
