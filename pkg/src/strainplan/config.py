"""Config files: model parameters, scenario scripts, service settings.

Angles live in degrees inside YAML (readable for operators) and radians
everywhere in code.  Every file carries a schema_version so stale configs
fail loudly rather than subtly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .kinematics import FrameCalibration
from .planner import CostConfig, OcpConfig, TerminalMode
from .plant import ImpedanceConfig
from .scenario import (
    GoalEvent,
    Injection,
    PlannerKind,
    ScenarioScript,
    SubjectMode,
)
from .shoulder import (
    AGGREGATE,
    ArmDynamicsParams,
    JointBounds,
    MuscleTendonUnit,
    ShoulderModel,
    default_muscles,
)

SCHEMA_VERSION = 1
DEG = math.pi / 180.0


def _check_version(data: dict, where: str) -> None:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"{where}: schema_version {version!r} unsupported (expected "
            f"{SCHEMA_VERSION})"
        )


def _load_yaml(path: Path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data


# ---------------------------------------------------------------------------
# model


def model_from_dict(data: dict) -> ShoulderModel:
    section = data.get("model", {})
    dyn = section.get("dynamics", {})
    params = ArmDynamicsParams(**dyn) if dyn else ArmDynamicsParams()
    bounds_raw = section.get("bounds")
    if bounds_raw:
        bounds = JointBounds(
            pe=tuple(np.deg2rad(bounds_raw["pe_deg"])),
            se=tuple(np.deg2rad(bounds_raw["se_deg"])),
            ar=tuple(np.deg2rad(bounds_raw["ar_deg"])),
            v_max=float(bounds_raw.get("v_max", 5.0)),
        )
    else:
        bounds = JointBounds()
    muscles_raw = section.get("muscles")
    if muscles_raw:
        muscles = [
            MuscleTendonUnit(
                name=m["name"],
                origin=tuple(m["origin"]),
                insertion=tuple(m["insertion"]),
                tendon_slack_length=float(m["tendon_slack_length"]),
                max_isometric_force=float(m["max_isometric_force"]),
            )
            for m in muscles_raw
        ]
    else:
        muscles = default_muscles()
    model = ShoulderModel(
        muscles,
        params=params,
        bounds=bounds,
        wrap_radius=float(section.get("wrap_radius", 0.027)),
        fiber_gain=float(section.get("fiber_gain", 0.05)),
        passive_share=float(section.get("passive_share", 0.25)),
    )
    model.check_moment_arm_guard(samples=100)
    return model


def load_model(path: Path) -> ShoulderModel:
    data = _load_yaml(path)
    _check_version(data, str(path))
    return model_from_dict(data)


# ---------------------------------------------------------------------------
# map building settings


@dataclass(frozen=True)
class MapBuildSettings:
    tendons: tuple[str, ...] | None = None
    ar_step_deg: float = 15.0
    activation_max: float = 0.25
    activation_step: float = 0.05
    resolution: int = 40
    n_centers: tuple[int, int] = (9, 9)
    regularization: float = 1e-6

    def ar_bins(self, bounds: JointBounds) -> np.ndarray:
        step = math.radians(self.ar_step_deg)
        return np.arange(bounds.ar[0], bounds.ar[1] + 1e-9, step)

    def activation_bins(self) -> np.ndarray:
        return np.arange(0.0, self.activation_max + 1e-9, self.activation_step)


def map_settings_from_dict(data: dict) -> MapBuildSettings:
    raw = data.get("maps", {})
    kw = {}
    for key in ("ar_step_deg", "activation_max", "activation_step",
                "resolution", "regularization"):
        if key in raw:
            kw[key] = raw[key]
    if "tendons" in raw:
        kw["tendons"] = tuple(raw["tendons"])
    if "n_centers" in raw:
        kw["n_centers"] = tuple(raw["n_centers"])
    return MapBuildSettings(**kw)


# ---------------------------------------------------------------------------
# scenario


@dataclass(frozen=True)
class ScenarioBundle:
    script: ScenarioScript
    ocp: OcpConfig
    cost: CostConfig
    impedance: ImpedanceConfig
    model_data: dict = field(default_factory=dict)
    control_rate: float = 200.0
    estimator_divider: int = 10
    planner_divider: int = 20


def _state6(pose_deg, rates=(0.0, 0.0, 0.0)) -> tuple[float, ...]:
    pose = [float(v) * DEG for v in pose_deg]
    if len(pose) == 2:
        pose.append(0.0)
    return tuple(pose) + tuple(float(v) for v in rates)


def scenario_from_dict(data: dict) -> ScenarioBundle:
    raw = data.get("scenario")
    if raw is None:
        raise ConfigError("missing 'scenario' section")
    try:
        mode = SubjectMode(raw.get("mode", "PASSIVE"))
        planner = PlannerKind(raw.get("planner", "ocp"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    goals = tuple(
        GoalEvent(
            time=float(g["time"]),
            target=_state6([g["pe_deg"], g["se_deg"], g.get("ar_deg", 0.0)]),
        )
        for g in raw.get("goals", [])
    )
    injections = tuple(
        Injection(
            time=float(i["time"]),
            duration=float(i["duration"]),
            kind=i["kind"],
            magnitude=float(i["magnitude"]),
            axis=i.get("axis"),
            muscle=i.get("muscle"),
        )
        for i in raw.get("injections", [])
    )
    script = ScenarioScript(
        name=raw.get("name", "scenario"),
        mode=mode,
        planner=planner,
        initial_state=_state6(raw["initial_state_deg"]),
        goals=goals,
        injections=injections,
        duration=float(raw["duration"]),
        target_tendon=raw.get("target_tendon", AGGREGATE),
        gravity_compensation=bool(raw.get("gravity_compensation", True)),
        seed=int(raw.get("seed", 0)),
    )

    ocp_raw = dict(data.get("ocp", {}))
    if "mode" in ocp_raw:
        ocp_raw["mode"] = TerminalMode(ocp_raw["mode"])
    for key, default in (("epsilon_pose_deg", 2.0), ("epsilon_vel_deg", 2.0)):
        ocp_raw.setdefault(key, default)
    eps_pose = math.radians(ocp_raw.pop("epsilon_pose_deg")) ** 2
    eps_vel = math.radians(ocp_raw.pop("epsilon_vel_deg")) ** 2
    ocp_raw.setdefault("epsilon", (eps_pose,) * 3 + (eps_vel,) * 3)
    for key in ("u_min", "u_max"):
        if key in ocp_raw:
            ocp_raw[key] = tuple(ocp_raw[key])
    ocp = OcpConfig(**ocp_raw)

    cost_raw = dict(data.get("cost", {}))
    cost = CostConfig(**cost_raw) if cost_raw else CostConfig()

    imp_raw = data.get("impedance", {})
    if imp_raw:
        stiffness = np.diag(
            [imp_raw.get("stiffness_translational", 500.0)] * 3
            + [imp_raw.get("stiffness_rotational", 20.0)] * 3
        )
        damping = np.diag(
            [imp_raw.get("damping_translational", 60.0)] * 3
            + [imp_raw.get("damping_rotational", 4.0)] * 3
        )
        impedance = ImpedanceConfig(
            stiffness=stiffness,
            damping=damping,
            control_rate=float(imp_raw.get("control_rate", 200.0)),
        )
    else:
        impedance = ImpedanceConfig()

    rates = data.get("rates", {})
    return ScenarioBundle(
        script=script,
        ocp=ocp,
        cost=cost,
        impedance=impedance,
        model_data=data,
        control_rate=float(rates.get("control", 200.0)),
        estimator_divider=int(rates.get("estimator_divider", 10)),
        planner_divider=int(rates.get("planner_divider", 20)),
    )


def load_scenario(path: Path) -> ScenarioBundle:
    data = _load_yaml(path)
    _check_version(data, str(path))
    return scenario_from_dict(data)


def session_config_from_bundle(bundle: ScenarioBundle, model: ShoulderModel,
                               library) -> "SessionConfig":
    from .scenario import SessionConfig

    return SessionConfig(
        model=model,
        library=library,
        script=bundle.script,
        ocp=bundle.ocp,
        cost=bundle.cost,
        impedance=bundle.impedance,
        calibration=FrameCalibration.from_params(model.params),
        control_rate=bundle.control_rate,
        estimator_divider=bundle.estimator_divider,
        planner_divider=bundle.planner_divider,
    )
