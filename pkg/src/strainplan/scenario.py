"""Scenario orchestration: planner, estimator and controller in one loop.

Three rate groups run on a shared virtual clock in a fixed deterministic
interleaving: the 200 Hz controller+plant, the 20 Hz activation estimator
and the (roughly) 10 Hz replanner.  Components exchange immutable
snapshots; the session log captures a full-rate timeseries, an event log
and end-of-run metrics.  Wall-clock solver timings go to a separate file
so that logs and metrics stay bit-identical across runs.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from .activation import ActivationEstimator, EstimatorInput
from .baseline import astar_plan, upsample_grid_path
from .errors import SimulationFault
from .kinematics import (
    FrameCalibration,
    ShoulderStateEstimator,
    external_torque_from_wrench,
)
from .maps import MapLibrary, MapSelector, sample_grid
from .planner import (
    CostConfig,
    DenseTrajectory,
    OcpConfig,
    PlannerInput,
    RecedingHorizonPlanner,
    TerminalMode,
    replace,
    solve,
    transcribe,
)
from .plant import (
    CoupledPlant,
    ImpedanceConfig,
    gravity_offset,
    reference_from_human_state,
)
from .shoulder import AGGREGATE, JointAngles, ShoulderModel

SCHEMA_VERSION = 1


class SubjectMode(Enum):
    PASSIVE = "PASSIVE"
    ACTIVE = "ACTIVE"


class PlannerKind(Enum):
    OCP = "ocp"
    ASTAR = "astar"


@dataclass(frozen=True)
class GoalEvent:
    time: float
    target: tuple[float, ...]  # 6-vector, rad / rad/s


@dataclass(frozen=True)
class Injection:
    """Scripted volitional action: a generalized torque pulse, or an
    activation pulse realized as the equivalent muscle torque."""

    time: float
    duration: float
    kind: str  # "torque" | "activation"
    magnitude: float  # N m, or activation delta
    axis: int | None = None  # torque: DoF index
    muscle: str | None = None  # activation: unit name

    def __post_init__(self):
        if self.kind not in ("torque", "activation"):
            raise ValueError(f"unknown injection kind {self.kind!r}")
        if self.kind == "torque" and self.axis not in (0, 1, 2):
            raise ValueError("torque injection needs axis 0, 1 or 2")
        if self.kind == "activation" and not self.muscle:
            raise ValueError("activation injection needs a muscle name")


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    mode: SubjectMode
    initial_state: tuple[float, ...]
    goals: tuple[GoalEvent, ...]
    duration: float
    injections: tuple[Injection, ...] = ()
    target_tendon: str = AGGREGATE
    planner: PlannerKind = PlannerKind.OCP
    gravity_compensation: bool = True
    seed: int = 0

    def __post_init__(self):
        times = [g.time for g in self.goals]
        if times != sorted(times):
            raise ValueError("goal times must be ascending")
        times = [i.time for i in self.injections]
        if times != sorted(times):
            raise ValueError("injection times must be ascending")


@dataclass(frozen=True)
class SessionConfig:
    model: ShoulderModel
    library: MapLibrary
    script: ScenarioScript
    ocp: OcpConfig
    cost: CostConfig
    impedance: ImpedanceConfig = field(default_factory=ImpedanceConfig)
    calibration: FrameCalibration | None = None
    control_rate: float = 200.0
    estimator_divider: int = 10  # 20 Hz
    planner_divider: int = 20  # 10 Hz
    activation_smoothing: float = 0.3


TIMESERIES_HEADER = (
    ["t"]
    + [f"q_hat_{n}" for n in ("pe", "se", "ar", "dpe", "dse", "dar")]
    + [f"q_ref_{n}" for n in ("pe", "se", "ar", "dpe", "dse", "dar")]
    + [f"wrench_{n}" for n in ("fx", "fy", "fz", "tx", "ty", "tz")]
)


class SessionLog:
    """Deterministic session outputs plus a separate wall-clock solve log."""

    def __init__(self, out_dir: Path | None, muscle_names: tuple[str, ...]):
        self.out_dir = Path(out_dir) if out_dir else None
        self.header = TIMESERIES_HEADER + [f"alpha_{n}" for n in muscle_names] + ["sigma"]
        self.rows: list[str] = []
        self.events: list[dict] = []
        self.solves: list[dict] = []
        self.metrics: dict = {}
        if self.out_dir:
            self.out_dir.mkdir(parents=True, exist_ok=True)

    def event(self, kind: str, t: float, **payload) -> None:
        self.events.append({"event": kind, "t": round(t, 9), **payload})

    def solve_record(self, record: dict) -> None:
        self.solves.append(record)

    def row(self, values) -> None:
        self.rows.append(",".join(repr(float(v)) for v in values))

    def finalize(self, metrics: dict) -> None:
        self.metrics = metrics
        if not self.out_dir:
            return
        (self.out_dir / "timeseries.csv").write_text(
            ",".join(self.header) + "\n" + "\n".join(self.rows) + "\n"
        )
        (self.out_dir / "log.jsonl").write_text(
            "\n".join(json.dumps(e, sort_keys=True) for e in self.events) + "\n"
        )
        (self.out_dir / "metrics.json").write_text(format_metrics(metrics))
        (self.out_dir / "solves.jsonl").write_text(
            "\n".join(json.dumps(s, sort_keys=True) for s in self.solves) + "\n"
        )


def format_metrics(metrics: dict) -> str:
    return json.dumps(metrics, sort_keys=True, indent=1) + "\n"


def compute_metrics(header: list[str], rows: np.ndarray, meta: dict) -> dict:
    """Session metrics from the full-rate timeseries alone, so that replay
    is a pure function of the logged data."""
    col = {name: i for i, name in enumerate(header)}
    t = rows[:, col["t"]]
    dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
    sigma = rows[:, col["sigma"]]
    forces = rows[:, [col["wrench_fx"], col["wrench_fy"], col["wrench_fz"]]]
    # accelerations are differentiated at the estimator update rate: the
    # velocity columns hold between updates and would alias otherwise
    stride = max(int(meta.get("estimator_divider", 1)), 1)
    vel = rows[::stride, [col["q_hat_dpe"], col["q_hat_dse"], col["q_hat_dar"]]]
    acc = np.zeros_like(vel)
    if len(vel) > 2:
        acc[1:-1] = (vel[2:] - vel[:-2]) / (2 * dt * stride)
    alpha_cols = [i for i, n in enumerate(header) if n.startswith("alpha_")]
    metrics = {
        "schema_version": SCHEMA_VERSION,
        "scenario": meta.get("scenario", ""),
        "mode": meta.get("mode", ""),
        "duration": round(float(t[-1] - t[0] + dt), 9) if len(t) else 0.0,
        "samples": int(len(t)),
        "cumulative_strain": float(np.trapezoid(sigma, t)),
        "peak_strain": float(sigma.max(initial=0.0)),
        "peak_acceleration": float(np.linalg.norm(acc, axis=1).max(initial=0.0)),
        "peak_force": float(np.linalg.norm(forces, axis=1).max(initial=0.0)),
        "peak_activation": float(rows[:, alpha_cols].max(initial=0.0))
        if alpha_cols
        else 0.0,
        "replans": int(meta.get("replans", 0)),
        "faults": int(meta.get("faults", 0)),
    }
    return metrics


@dataclass
class SessionResult:
    log: SessionLog
    metrics: dict
    final_state: np.ndarray
    executed: np.ndarray  # (n, 6) estimated states at the control rate
    faulted: bool = False


class SessionRunner:
    """Owns the virtual clock and the fixed interleaving of rate groups."""

    def __init__(self, cfg: SessionConfig, out_dir: Path | None = None,
                 listener: Callable[[str, dict], None] | None = None):
        self.cfg = cfg
        script = cfg.script
        self.model = cfg.model
        self.cal = cfg.calibration or FrameCalibration.from_params(cfg.model.params)
        self.dt = 1.0 / cfg.control_rate
        self.n_ticks = int(round(script.duration * cfg.control_rate))
        self.listener = listener or (lambda kind, payload: None)

        q0 = np.asarray(script.initial_state, dtype=float)
        self.plant = CoupledPlant(cfg.model, self.cal, cfg.impedance, q0)
        self.state_estimator = ShoulderStateEstimator(self.cal)
        self.activation_estimator = ActivationEstimator(
            cfg.model, smoothing=cfg.activation_smoothing
        )
        self.selector = MapSelector(cfg.library)
        self.rh = RecedingHorizonPlanner(
            cfg.model,
            cfg.library,
            script.target_tendon,
            cfg.ocp,
            cfg.cost,
            period=self.dt * cfg.planner_divider,
        )

        self.log = SessionLog(out_dir, cfg.model.muscle_names)
        self.subject_mode = script.mode
        self.tick = 0
        self.paused = False
        self.faulted = False
        self._kin = None
        self._estimate: PlannerInput | None = None
        self._alpha = np.zeros(len(cfg.model.muscles))
        self._wrench = np.zeros(6)
        self._reference: DenseTrajectory | None = None
        self._ref_hold = q0.copy()
        self._goals = list(script.goals)
        self._executed: list[np.ndarray] = []
        self._pending_injections: list[Injection] = list(script.injections)
        self._active_injections: list[Injection] = []
        self._current_selection = None
        self._replans = 0

        self.log.event("session_start", 0.0, scenario=script.name,
                       mode=script.mode.value, planner=script.planner.value,
                       schema_version=SCHEMA_VERSION, dt=self.dt,
                       duration=script.duration, seed=script.seed,
                       estimator_divider=cfg.estimator_divider)

    # -- helpers -------------------------------------------------------------

    @property
    def now(self) -> float:
        return self.tick * self.dt

    def inject_now(self, injection: Injection) -> None:
        """Schedule an operator-commanded injection at the current time."""
        adjusted = replace_time(injection, self.now)
        self._active_injections.append(adjusted)
        self.log.event("injection", self.now, injection_kind=adjusted.kind,
                       magnitude=adjusted.magnitude, axis=adjusted.axis,
                       muscle=adjusted.muscle, duration=adjusted.duration)
        self.listener("injection", {"t": self.now, "kind": adjusted.kind})

    def set_goal_now(self, target: np.ndarray) -> None:
        q_now = self._estimate.q if self._estimate else self.plant.q
        self.rh.set_goal(np.asarray(target, dtype=float), self.now, q_now)
        self.log.event("goal", self.now, target=list(map(float, target)))
        self.listener("goal", {"t": self.now, "target": list(map(float, target))})
        if self.subject_mode == SubjectMode.PASSIVE:
            self._solve_passive_leg(np.asarray(target, dtype=float))

    def _injection_torque(self) -> np.ndarray:
        now = self.now
        while self._pending_injections and self._pending_injections[0].time <= now:
            inj = self._pending_injections.pop(0)
            self._active_injections.append(inj)
            self.log.event("injection", now, injection_kind=inj.kind,
                           magnitude=inj.magnitude, axis=inj.axis,
                           muscle=inj.muscle, duration=inj.duration)
        self._active_injections = [
            i for i in self._active_injections if now < i.time + i.duration
        ]
        tau = np.zeros(3)
        for inj in self._active_injections:
            if inj.kind == "torque":
                tau[inj.axis] += inj.magnitude
            else:
                idx = self.model.muscle_names.index(inj.muscle)
                arms = self.model.moment_arm_matrix(
                    JointAngles.from_array(self.plant.q[:3])
                )
                f_max = self.model.muscles[idx].max_isometric_force
                tau += arms[:, idx] * f_max * inj.magnitude
        return tau

    def _kinematics_step(self) -> None:
        """Runs every control tick: the robot reads its encoders at 200 Hz."""
        ee = self.plant.ee_state()
        self._kin = self.state_estimator.update(ee)

    def _estimator_step(self) -> None:
        kin = self._kin
        applied = -self._wrench  # sensed is the reaction of applied
        tau_ext = external_torque_from_wrench(kin.q, applied, self.cal)
        est = self.activation_estimator.submit(
            EstimatorInput(
                angles=JointAngles.from_array(kin.q[:3]),
                velocities=kin.q[3:6],
                accelerations=None,
                external_torque=tau_ext,
                timestamp=self.now,
            )
        )
        self._alpha = est.activations
        activation_level = self._map_activation()
        self._estimate = PlannerInput(
            q=kin.q, activation=activation_level, timestamp=self.now,
            stale=kin.singular,
        )
        self.listener("estimate", {
            "t": self.now,
            "alpha": {n: float(a) for n, a in
                      zip(self.model.muscle_names, est.activations)},
            "residual": [float(r) for r in est.residual],
        })

    def _map_activation(self) -> float:
        tendon = self.cfg.script.target_tendon
        if tendon == AGGREGATE:
            return float(self._alpha.max(initial=0.0))
        idx = self.model.muscle_names.index(tendon)
        return float(self._alpha[idx])

    def _solve_passive_leg(self, target: np.ndarray) -> None:
        """Full-horizon solve executed open loop (passive subject).

        Consecutive legs chain reference-to-reference so the commanded
        trajectory stays continuous; only the first leg roots at the
        estimated state.
        """
        if self._reference is not None:
            q_now = self._reference.sample(self.now)[0].copy()
        elif self._estimate is not None:
            q_now = self._estimate.q
        else:
            q_now = self.plant.q.copy()
        selection = self.selector.select(
            self.cfg.script.target_tendon, float(q_now[2]), self._map_activation()
        )
        self._publish_map(selection)
        if self.cfg.script.planner == PlannerKind.ASTAR:
            self._reference = self._astar_reference(q_now, target, selection)
            self._replans += 1
            self.log.event("plan", self.now, planner="astar",
                           t0=self.now, horizon=self.cfg.ocp.horizon)
            self._emit_plan(self._reference)
            return
        cost = replace(self.cfg.cost, d0=None)
        trans = transcribe(self.cfg.ocp, cost, self.model, selection.map,
                           q_now, target)
        wall = time.perf_counter()
        sol = solve(trans, self.cfg.ocp, model=self.model, target=target,
                    rate=self.cfg.control_rate, t0=self.now)
        record = {"t": self.now, **sol.diagnostics()}
        record["wall_time"] = time.perf_counter() - wall
        self.log.solve_record(record)
        if sol.usable:
            self._replans += 1
            self._reference = sol.dense
            self.log.event("plan", self.now, planner="ocp", t0=self.now,
                           status=sol.status.value,
                           objective=round(sol.objective, 12),
                           defect_max=sol.defect_max)
            self._emit_plan(sol.dense)
        else:
            self.log.event("plan_failed", self.now, status=sol.status.value)

    def _astar_reference(self, q_now, target, selection) -> DenseTrajectory:
        grid = sample_grid(
            self.model, self.cfg.script.target_tendon,
            float(q_now[2]), selection.map.activation_level, resolution=96,
        )
        path = astar_plan(
            grid,
            start=(float(q_now[0]), float(q_now[1])),
            goal=(float(target[0]), float(target[1])),
            strain_weight=1.0,
        )
        dense = upsample_grid_path(
            path, rate=self.cfg.control_rate, duration=self.cfg.ocp.horizon,
            ar=float(q_now[2]), t0=self.now,
        )
        return dense

    def set_subject_mode(self, mode: SubjectMode) -> None:
        if mode == self.subject_mode:
            return
        self.subject_mode = mode
        self.log.event("mode_change", self.now, mode=mode.value)
        self.listener("mode", {"t": self.now, "mode": mode.value})

    def set_paused(self, paused: bool) -> None:
        if paused == self.paused:
            return
        self.paused = paused
        self.log.event("pause" if paused else "resume", self.now)

    def _planner_step(self) -> None:
        if self.subject_mode != SubjectMode.ACTIVE or self._estimate is None:
            return
        wall = time.perf_counter()
        sol = self.rh.step(self._estimate, self.now)
        if self.rh.solve_log:
            record = dict(self.rh.solve_log[-1])
            record["wall_time"] = time.perf_counter() - wall
            self.log.solve_record(record)
        if self.rh.current_map is not None:
            self._publish_map_selection()
        if sol is not None:
            self._replans += 1
            self._reference = sol.dense
            self.log.event("plan", self.now, planner="ocp", t0=sol.t0,
                           status=sol.status.value,
                           objective=round(sol.objective, 12),
                           defect_max=sol.defect_max)
            self._emit_plan(sol.dense)

    def _emit_plan(self, dense: DenseTrajectory) -> None:
        stride = max(1, len(dense.times) // 50)
        self.listener("plan", {
            "t0": dense.t0,
            "times": [float(x) for x in dense.times[::stride]],
            "pe": [float(x) for x in dense.states[::stride, 0]],
            "se": [float(x) for x in dense.states[::stride, 1]],
        })

    def _publish_map_selection(self) -> None:
        sel = getattr(self.rh, "_current_map", None)
        if sel is not None and sel is not getattr(self, "_last_map", None):
            self._last_map = sel
            self.log.event("map_switch", self.now, tendon=sel.tendon_id,
                           ar=sel.ar, activation=sel.activation_level)
            self.listener("map", {"map": sel})

    def _publish_map(self, selection) -> None:
        if selection.map is not getattr(self, "_last_map", None):
            self._last_map = selection.map
            self.log.event("map_switch", self.now, tendon=selection.map.tendon_id,
                           ar=selection.map.ar,
                           activation=selection.map.activation_level)
            self.listener("map", {"map": selection.map})

    def _reference_at(self, t: float):
        if self._reference is None:
            q_ref = self._ref_hold
            u_ref = np.zeros(3)
        else:
            q_ref, u_ref = self._reference.sample(t)
        delta = 0.0
        if self.cfg.script.gravity_compensation:
            u_se = float(u_ref[1])
            if self.cfg.script.planner == PlannerKind.ASTAR or (
                self._reference is None
            ):
                u_se = float(self.model.gravity_torque(q_ref[1])[1])
            out = gravity_offset(
                u_se, float(q_ref[1]), self.cfg.impedance.vertical_stiffness,
                self.model.params.humerus_length,
            )
            delta = out.delta_z if out.valid else 0.0
        rot, pos = reference_from_human_state(q_ref, self.cal, delta_z=delta)
        return q_ref, rot, pos

    # -- main loop -----------------------------------------------------------

    def step_once(self) -> bool:
        """One control tick; returns False when the session has finished."""
        if self.faulted or self.tick >= self.n_ticks:
            return False
        cfg = self.cfg
        # pending goal events
        while self._goals and self._goals[0].time <= self.now + 1e-12:
            goal = self._goals.pop(0)
            self.set_goal_now(np.asarray(goal.target, dtype=float))

        if not self.paused:
            self._kinematics_step()
            if self.tick % cfg.estimator_divider == 0:
                self._estimator_step()
            if self.tick % cfg.planner_divider == 0:
                self._planner_step()

        q_ref, rot, pos = self._reference_at(self.now)
        try:
            if self.paused:
                out = None
            else:
                out = self.plant.step(self.dt, rot, pos, self._injection_torque())
        except SimulationFault as exc:
            self.faulted = True
            self.log.event("fault", self.now, message=str(exc))
            self.listener("fault", {"t": self.now, "message": str(exc)})
            return False

        if out is not None:
            self._wrench = out.sensed_wrench
        q_hat = self._kin.q if self._kin is not None else self.plant.q
        sigma = 0.0
        current_map = getattr(self, "_last_map", None)
        if current_map is None and self.subject_mode == SubjectMode.ACTIVE:
            current_map = self.rh.current_map
        if current_map is None:
            sel = self.selector.select(cfg.script.target_tendon,
                                       float(q_hat[2]), self._map_activation())
            self._last_map = sel.map
            current_map = sel.map
        sigma = current_map.evaluate(float(q_hat[0]), float(q_hat[1])).value

        self._executed.append(np.asarray(q_hat, dtype=float).copy())
        self.log.row(
            [self.now, *q_hat, *q_ref, *self._wrench, *self._alpha, sigma]
        )
        if self.tick % cfg.estimator_divider == 0:
            self.listener("state", {
                "t": self.now,
                "q": [float(v) for v in q_hat],
                "q_ref": [float(v) for v in q_ref],
                "wrench": [float(v) for v in self._wrench],
                "sigma": float(sigma),
                "paused": self.paused,
            })
        self.tick += 1
        return self.tick < self.n_ticks and not self.faulted

    def run(self) -> SessionResult:
        while self.step_once():
            pass
        return self.finish()

    def finish(self) -> SessionResult:
        rows = np.array([[float(v) for v in r.split(",")] for r in self.log.rows])
        meta = {
            "scenario": self.cfg.script.name,
            "mode": self.cfg.script.mode.value,
            "replans": self._replans,
            "faults": 1 if self.faulted else 0,
            "estimator_divider": self.cfg.estimator_divider,
        }
        metrics = compute_metrics(self.log.header, rows, meta) if len(rows) else {}
        self.log.event("session_end", self.now, faulted=self.faulted)
        self.log.finalize(metrics)
        self.listener("metric", dict(metrics))
        return SessionResult(
            log=self.log,
            metrics=metrics,
            final_state=self.plant.q.copy(),
            executed=np.array(self._executed) if self._executed else np.zeros((0, 6)),
            faulted=self.faulted,
        )


def replace_time(inj: Injection, t: float) -> Injection:
    return Injection(time=t, duration=inj.duration, kind=inj.kind,
                     magnitude=inj.magnitude, axis=inj.axis, muscle=inj.muscle)


def run_scenario(cfg: SessionConfig, out_dir: Path | None = None,
                 listener=None) -> SessionResult:
    """Headless end-to-end run of one scenario."""
    return SessionRunner(cfg, out_dir=out_dir, listener=listener).run()


def replay_metrics(session_dir: Path) -> str:
    """Recompute metrics.json content from the logged timeseries; byte-
    identical to the original for an untouched session directory."""
    session_dir = Path(session_dir)
    text = (session_dir / "timeseries.csv").read_text().strip().split("\n")
    header = text[0].split(",")
    rows = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    meta = {}
    for line in (session_dir / "log.jsonl").read_text().strip().split("\n"):
        event = json.loads(line)
        if event["event"] == "session_start":
            meta["scenario"] = event.get("scenario", "")
            meta["mode"] = event.get("mode", "")
            meta["estimator_divider"] = event.get("estimator_divider", 1)
        if event["event"] == "session_end":
            meta["faults"] = 1 if event.get("faulted") else 0
    meta["replans"] = sum(
        1
        for line in (session_dir / "log.jsonl").read_text().strip().split("\n")
        if json.loads(line)["event"] == "plan"
    )
    return format_metrics(compute_metrics(header, rows, meta))
