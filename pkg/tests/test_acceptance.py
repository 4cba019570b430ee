"""Acceptance suite: every criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail
line per criterion.
"""

import json
import math
import time

import numpy as np
import pytest

from strainplan.activation import ActivationEstimator, EstimatorInput, solve_activations
from strainplan.baseline import astar_plan
from strainplan.kinematics import (
    FrameCalibration,
    ee_state_from_shoulder,
    estimate_angles,
    estimate_rates,
)
from strainplan.maps import MapLibrary, StrainGrid, StrainMap, build_library, fit_rbf, sample_grid
from strainplan.planner import (
    CostConfig,
    OcpConfig,
    PlannerInput,
    RecedingHorizonPlanner,
    TerminalMode,
    solve,
    transcribe,
)
from strainplan.plant import gravity_offset
from strainplan.scenario import (
    GoalEvent,
    Injection,
    PlannerKind,
    ScenarioScript,
    SessionConfig,
    SubjectMode,
    replay_metrics,
    run_scenario,
)
from strainplan.shoulder import AGGREGATE, JointAngles, default_model, rk4_step
from strainplan.sqp import SolveStatus

from conftest import DEG, random_pose, random_state
from test_baseline import dijkstra_cost, make_grid


def report(criterion: str, passed: bool, detail: str) -> None:
    print(f"\n[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    assert passed, f"{criterion}: {detail}"


ACTIVE_EPS = tuple([math.radians(2.0) ** 2] * 3 + [math.radians(5.0) ** 2] * 3)


@pytest.fixture(scope="module")
def aggregate_map(model):
    return fit_rbf(sample_grid(model, AGGREGATE, 0.0, 0.0, 40))


@pytest.fixture(scope="module")
def infra_library(model):
    return build_library(
        model,
        tendons=["infraspinatus", AGGREGATE],
        ar_bins=[0.0],
        activation_bins=np.arange(0.0, 0.251, 0.05),
        resolution=24,
        n_centers=(9, 9),
    )


def active_ocp(**kw):
    base = dict(horizon=1.0, n_intervals=10, epsilon=ACTIVE_EPS,
                mode=TerminalMode.VELOCITY_ONLY_TERMINAL)
    base.update(kw)
    return OcpConfig(**base)


def random_goal_pair(rng):
    start = np.array([
        rng.uniform(-50 * DEG, 90 * DEG),
        rng.uniform(65 * DEG, 135 * DEG),
        0.0, 0.0, 0.0, 0.0,
    ])
    goal = start + np.array([
        rng.uniform(-40 * DEG, 40 * DEG),
        rng.uniform(-30 * DEG, 30 * DEG),
        0.0, 0.0, 0.0, 0.0,
    ])
    goal[1] = np.clip(goal[1], 30 * DEG, 160 * DEG)
    return start, goal


# ---------------------------------------------------------------------------
# criterion 1: solver timing


def test_criterion_01_solver_timing(model, aggregate_map, infra_library):
    rng = np.random.default_rng(42)

    passive_cfg = OcpConfig(horizon=5.0, n_intervals=50,
                            mode=TerminalMode.FULL_TERMINAL)
    passive_times = []
    for _ in range(20):
        start, goal = random_goal_pair(rng)
        trans = transcribe(passive_cfg, CostConfig(), model, aggregate_map,
                           start, goal)
        t0 = time.perf_counter()
        solve(trans, passive_cfg, model=model, target=goal)
        passive_times.append(time.perf_counter() - t0)
    passive_median = float(np.median(passive_times))

    active_cfg = active_ocp()
    active_times = []
    for _ in range(20):
        start, goal = random_goal_pair(rng)
        trans = transcribe(active_cfg, CostConfig(w_goal=20.0), model,
                           aggregate_map, start, goal)
        t0 = time.perf_counter()
        solve(trans, active_cfg, model=model, target=goal)
        active_times.append(time.perf_counter() - t0)
    active_median = float(np.median(active_times))

    # receding horizon sustained over 60 simulated seconds (full loop)
    script = ScenarioScript(
        name="timing_rh", mode=SubjectMode.ACTIVE,
        initial_state=(60 * DEG, 60 * DEG, 0, 0, 0, 0),
        goals=(GoalEvent(0.0, (45 * DEG, 95 * DEG, 0, 0, 0, 0)),),
        duration=60.0, target_tendon=AGGREGATE,
    )
    cfg = SessionConfig(model=model, library=infra_library, script=script,
                        ocp=active_ocp(), cost=CostConfig(w_goal=20.0))
    result = run_scenario(cfg)
    rh_times = [s["wall_time"] for s in result.log.solves]
    rh_median = float(np.median(rh_times))
    rh_rate = 1.0 / rh_median

    ok = passive_median <= 5.0 and active_median <= 0.25 and rh_rate >= 8.0
    report(
        "criterion 1 (solver timing)",
        ok,
        f"passive median {passive_median:.2f}s (<=5), active median "
        f"{active_median:.3f}s (<=0.25), receding-horizon median rate "
        f"{rh_rate:.1f} Hz over {len(rh_times)} replans in 60 simulated s (>=8)",
    )


# ---------------------------------------------------------------------------
# criterion 2: constraint satisfaction on randomized instances


def test_criterion_02_constraint_satisfaction(model):
    rng = np.random.default_rng(7)
    converged = 0
    worst = {"defect": 0.0, "bound": 0.0, "initial": 0.0, "terminal": 0.0}
    n_instances = 50
    for i in range(n_instances):
        params = np.column_stack([
            rng.uniform(0.0, 10.0, 3),
            rng.uniform(-1.0, 2.5, 3),
            rng.uniform(0.3, 2.8, 3),
            rng.uniform(0.2, 0.8, 3),
            rng.uniform(0.2, 0.8, 3),
        ])
        smap = StrainMap(params=params, bias=0.0, ar=0.0, activation_level=0.0,
                         tendon_id=f"random{i}", fit_rms=0.0,
                         pe_range=(-math.pi / 2, math.pi),
                         se_range=(0.0, math.pi))
        start, goal = random_goal_pair(rng)
        if i % 5 == 0:
            goal = start + np.array([8 * DEG, -6 * DEG, 0, 0, 0, 0])
            cfg = active_ocp(mode=TerminalMode.FULL_TERMINAL, horizon=2.0,
                             n_intervals=20)
        else:
            cfg = active_ocp()
        trans = transcribe(cfg, CostConfig(w_goal=20.0), model, smap, start, goal)
        sol = solve(trans, cfg, model=model, target=goal)
        if sol.status != SolveStatus.CONVERGED:
            continue
        converged += 1
        worst["defect"] = max(worst["defect"], sol.defect_max)
        worst["bound"] = max(worst["bound"], sol.bound_violation)
        worst["initial"] = max(worst["initial"], sol.initial_residual)
        worst["terminal"] = max(worst["terminal"], sol.terminal_violation)

    ok = (
        converged >= 0.9 * n_instances
        and worst["defect"] <= 1e-6
        and worst["bound"] <= 1e-8
        and worst["initial"] <= 1e-6
        and worst["terminal"] <= 1e-8
    )
    report(
        "criterion 2 (constraint satisfaction)",
        ok,
        f"{converged}/{n_instances} converged; worst defect "
        f"{worst['defect']:.2e} (<=1e-6), bound {worst['bound']:.2e} (<=1e-8), "
        f"initial {worst['initial']:.2e} (<=1e-6), terminal "
        f"{worst['terminal']:.2e} (<=1e-8)",
    )


# ---------------------------------------------------------------------------
# criterion 3: gradient correctness


def test_criterion_03_gradients(model, aggregate_map):
    rng = np.random.default_rng(5)
    worst_dyn = 0.0
    for _ in range(100):
        q = random_state(rng, model.bounds, v_scale=2.0)
        u = rng.uniform(-15, 15, 3)
        jq, ju = model.dynamics_jacobians(q, u)
        h = 1e-6
        jq_fd = np.zeros((6, 6))
        ju_fd = np.zeros((6, 3))
        for j in range(6):
            dq = np.zeros(6)
            dq[j] = h
            jq_fd[:, j] = (
                model.forward_dynamics(q + dq, u, check_bounds=False)
                - model.forward_dynamics(q - dq, u, check_bounds=False)
            ) / (2 * h)
        for j in range(3):
            du = np.zeros(3)
            du[j] = h
            ju_fd[:, j] = (
                model.forward_dynamics(q, u + du, check_bounds=False)
                - model.forward_dynamics(q, u - du, check_bounds=False)
            ) / (2 * h)
        worst_dyn = max(
            worst_dyn,
            np.abs(jq - jq_fd).max() / max(1.0, np.abs(jq_fd).max()),
            np.abs(ju - ju_fd).max() / max(1.0, np.abs(ju_fd).max()),
        )

    worst_map = 0.0
    h = 1e-5
    for _ in range(100):
        pe = rng.uniform(-1.4, 3.0)
        se = rng.uniform(0.1, 3.0)
        _, d_pe, d_se, *_ = aggregate_map.raw_terms(pe, se)
        fd_pe = (aggregate_map.raw_terms(pe + h, se)[0]
                 - aggregate_map.raw_terms(pe - h, se)[0]) / (2 * h)
        fd_se = (aggregate_map.raw_terms(pe, se + h)[0]
                 - aggregate_map.raw_terms(pe, se - h)[0]) / (2 * h)
        worst_map = max(worst_map, abs(float(d_pe - fd_pe)),
                        abs(float(d_se - fd_se)))

    ok = worst_dyn <= 1e-5 and worst_map <= 1e-6
    report(
        "criterion 3 (gradient correctness)",
        ok,
        f"dynamics Jacobian rel err {worst_dyn:.2e} (<=1e-5) at 100 points; "
        f"map gradient abs err {worst_map:.2e} (<=1e-6) at 100 points",
    )


# ---------------------------------------------------------------------------
# criterion 4: energy conservation


def test_criterion_04_energy(undamped_model):
    q = np.array([0.4, 1.2, 0.1, 0.5, 0.3, 0.8])
    e0 = undamped_model.total_energy(q)
    for _ in range(10_000):
        q = rk4_step(undamped_model, q, np.zeros(3), 1e-4)
    drift = abs(undamped_model.total_energy(q) - e0) / abs(e0)
    report(
        "criterion 4 (energy conservation)",
        drift <= 1e-6,
        f"relative drift {drift:.2e} over 1 s of unforced undamped motion "
        f"(RK4 at dt=1e-4) (<=1e-6)",
    )


# ---------------------------------------------------------------------------
# criterion 5: strain dominance on a ridge map


def test_criterion_05_strain_dominance(model):
    ridge = StrainMap(
        params=np.array([[8.0, 0.7, 1.2, 0.25, 0.8]]), bias=0.0, ar=0.0,
        activation_level=0.0, tendon_id="ridge", fit_rms=0.0,
        pe_range=(-1.5, 3.0), se_range=(0.0, math.pi),
    )
    q0 = np.array([0.0, 1.2, 0.0, 0.0, 0.0, 0.0])
    qT = np.array([1.4, 1.2, 0.0, 0.0, 0.0, 0.0])
    cfg = OcpConfig(horizon=5.0, n_intervals=50, mode=TerminalMode.FULL_TERMINAL)
    cumulative = {}
    for w in (0.0, 1.0):
        trans = transcribe(cfg, CostConfig(w_strain=w), model, ridge, q0, qT)
        sol = solve(trans, cfg, model=model, target=qT)
        assert sol.status == SolveStatus.CONVERGED
        values, _, _ = ridge.evaluate_batch(sol.dense.states[:, 0],
                                            sol.dense.states[:, 1])
        cumulative[w] = float(np.trapezoid(values, sol.dense.times))
    frac = np.linspace(0.0, 1.0, 500)
    line_pe = q0[0] + (qT[0] - q0[0]) * frac
    line_se = q0[1] + (qT[1] - q0[1]) * frac
    line_vals, _, _ = ridge.evaluate_batch(line_pe, line_se)
    line_cum = float(np.trapezoid(line_vals, frac * cfg.horizon))

    ok = cumulative[1.0] <= line_cum and cumulative[1.0] < cumulative[0.0]
    report(
        "criterion 5 (strain dominance)",
        ok,
        f"optimized {cumulative[1.0]:.2f} <= straight-line {line_cum:.2f}; "
        f"w_strain 1 vs 0: {cumulative[1.0]:.2f} < {cumulative[0.0]:.2f}",
    )


# ---------------------------------------------------------------------------
# criterion 6: comparison against the graph-search baseline


def test_criterion_06_sota_comparison(model, infra_library):
    goals = (
        GoalEvent(0.0, (30 * DEG, 120 * DEG, 0, 0, 0, 0)),
        GoalEvent(5.0, (55 * DEG, 80 * DEG, 0, 0, 0, 0)),
        GoalEvent(10.0, (-30 * DEG, 110 * DEG, 0, 0, 0, 0)),
    )
    metrics = {}
    for planner in (PlannerKind.OCP, PlannerKind.ASTAR):
        cfg = SessionConfig(
            model=model, library=infra_library,
            ocp=OcpConfig(horizon=5.0, n_intervals=50,
                          mode=TerminalMode.FULL_TERMINAL),
            cost=CostConfig(),
            script=ScenarioScript(
                name=f"cmp_{planner.value}", mode=SubjectMode.PASSIVE,
                initial_state=(-20 * DEG, 115 * DEG, 0, 0, 0, 0),
                goals=goals, duration=15.5, planner=planner,
            ),
        )
        result = run_scenario(cfg)
        assert not result.faulted
        metrics[planner] = result.metrics

    ours, astar = metrics[PlannerKind.OCP], metrics[PlannerKind.ASTAR]

    # the graph planner itself is optimal on every tested grid
    rng = np.random.default_rng(3)
    astar_optimal = True
    for _ in range(5):
        grid = make_grid(rng.uniform(0, 8, rng.integers(12, 48, 2)))
        start = (rng.uniform(0, 1), rng.uniform(0, 1))
        goal = (rng.uniform(0, 1), rng.uniform(0, 1))
        w = float(rng.uniform(0.2, 1.5))
        path = astar_plan(grid, start, goal, strain_weight=w)
        astar_optimal &= abs(path.cost - dijkstra_cost(grid, start, goal, w)) < 1e-10

    ok = (
        ours["cumulative_strain"] <= astar["cumulative_strain"]
        and ours["peak_acceleration"] < astar["peak_acceleration"]
        and ours["peak_force"] <= astar["peak_force"]
        and astar_optimal
    )
    report(
        "criterion 6 (baseline comparison)",
        ok,
        f"cumulative strain {ours['cumulative_strain']:.1f} <= "
        f"{astar['cumulative_strain']:.1f}; peak acceleration "
        f"{ours['peak_acceleration']:.2f} < {astar['peak_acceleration']:.2f}; "
        f"peak force {ours['peak_force']:.2f} <= {astar['peak_force']:.2f}; "
        f"A* optimal vs Dijkstra on 5 random grids: {astar_optimal}",
    )


# ---------------------------------------------------------------------------
# criterion 7: online adaptation


def _fabricated_switch_library():
    """Two-bin library: benign map at activation 0, a strain wall appears on
    the direct route at activation 0.25."""
    pe_range = (-1.5, 3.0)
    se_range = (0.0, math.pi)
    benign = StrainMap(
        params=np.array([[0.5, 2.5, 0.3, 0.5, 0.5]]), bias=0.0, ar=0.0,
        activation_level=0.0, tendon_id="switch", fit_rms=0.0,
        pe_range=pe_range, se_range=se_range,
    )
    bumped = StrainMap(
        params=np.array([[20.0, 0.9, 1.35, 0.35, 0.5]]), bias=0.0, ar=0.0,
        activation_level=0.25, tendon_id="switch", fit_rms=0.0,
        pe_range=pe_range, se_range=se_range,
    )
    return MapLibrary(
        ar_bins=np.array([0.0]),
        activation_bins=np.array([0.0, 0.25]),
        tendons=("switch",),
        maps={("switch", 0, 0): benign, ("switch", 0, 1): bumped},
    )


def test_criterion_07a_map_step_replanning(model):
    lib = _fabricated_switch_library()
    bumped = lib.get("switch", 0, 1)
    cfg = active_ocp()
    # moderate goal weight: the strain wall must dominate the trade-off
    rh = RecedingHorizonPlanner(model, lib, "switch", cfg,
                                CostConfig(w_goal=10.0))
    q = np.array([0.3, 1.2, 0.0, 0.0, 0.0, 0.0])
    goal = np.array([1.6, 1.5, 0.0, 0.0, 0.0, 0.0])
    rh.set_goal(goal, 0.0, q)
    switch_at = 20
    pre_plan = None
    executed_after = []
    for k in range(70):
        now = 0.1 * k
        act = 0.0 if k < switch_at else 0.25
        rh.step(PlannerInput(q=q, activation=act, timestamp=now), now)
        if k == switch_at - 1:
            pre_plan = rh.latest.dense
        q = rh.latest.dense.sample(now + 0.1)[0].copy()
        if k >= switch_at:
            executed_after.append(q.copy())
    executed_after = np.array(executed_after)

    # threshold: 95th percentile of the pre-change plan's remaining strain
    # evaluated on the post-change map
    remaining = pre_plan.states
    pre_vals, _, _ = bumped.evaluate_batch(remaining[:, 0], remaining[:, 1])
    threshold = float(np.percentile(pre_vals, 95))
    post_vals, _, _ = bumped.evaluate_batch(executed_after[:, 0],
                                            executed_after[:, 1])
    worst_post = float(post_vals.max())

    ok = worst_post <= threshold and threshold > 1.0
    report(
        "criterion 7a (map-step replanning)",
        ok,
        f"post-switch executed strain max {worst_post:.2f} stays below the "
        f"95th percentile of the held plan's strain {threshold:.2f}",
    )


def test_criterion_07b_activation_driven_deviation(model, infra_library):
    base = dict(
        model=model, library=infra_library,
        ocp=active_ocp(), cost=CostConfig(w_goal=20.0),
    )
    runs = {}
    for active_subject in (False, True):
        injections = ()
        if active_subject:
            injections = (Injection(time=2.0, duration=5.0, kind="torque",
                                    axis=2, magnitude=3.0),)
        script = ScenarioScript(
            name="fig9", mode=SubjectMode.ACTIVE,
            initial_state=(60 * DEG, 60 * DEG, 0, 0, 0, 0),
            goals=(GoalEvent(0.0, (45 * DEG, 95 * DEG, 0, 0, 0, 0)),),
            injections=injections,
            duration=10.0, target_tendon="infraspinatus",
        )
        result = run_scenario(SessionConfig(script=script, **base))
        assert not result.faulted
        runs[active_subject] = result

    executed_passive = runs[False].executed[:, 0:2]
    executed_active = runs[True].executed[:, 0:2]
    n = min(len(executed_passive), len(executed_active))
    deviation = np.degrees(
        np.linalg.norm(executed_passive[:n] - executed_active[:n], axis=1)
    ).max()
    peak_alpha = runs[True].metrics["peak_activation"]

    ok = deviation >= 3.0 and peak_alpha > 0.02
    report(
        "criterion 7b (activation-driven deviation)",
        ok,
        f"executed-path deviation {deviation:.1f} deg (>=3) between active "
        f"and passive runs; peak estimated activation {peak_alpha:.3f}",
    )


# ---------------------------------------------------------------------------
# criterion 8: estimator correctness


def test_criterion_08_estimator(model):
    from test_activation import synthetic_model

    # 1-DoF / 2-muscle grid oracle
    arms2 = np.array([[0.03, -0.025], [0.0, 0.0], [0.0, 0.0]])
    model2 = synthetic_model(arms2, [400.0, 500.0])
    w2 = arms2[0] * np.array([400.0, 500.0])
    grid = np.arange(0.0, 1.0 + 1e-12, 1e-3)
    a1, a2 = np.meshgrid(grid, grid, indexing="ij")
    worst2 = 0.0
    for tau0 in (4.0, -3.0, 9.0):
        est = solve_activations(np.array([tau0, 0.0, 0.0]),
                                JointAngles(0.0, 1.0, 0.0), model2)
        feasible = np.abs(w2[0] * a1 + w2[1] * a2 - tau0) <= abs(w2).max() * 1.5e-3
        effort = np.where(feasible, a1**2 + a2**2, np.inf)
        idx = np.unravel_index(np.argmin(effort), effort.shape)
        oracle = np.array([grid[idx[0]], grid[idx[1]]])
        worst2 = max(worst2, float(np.abs(est.activations - oracle).max()))

    # 2-DoF / 4-muscle null-space oracle
    arms4 = np.array([
        [0.030, -0.020, 0.012, -0.025],
        [0.010, 0.025, -0.030, -0.008],
        [0.0, 0.0, 0.0, 0.0],
    ])
    f4 = [600.0, 500.0, 450.0, 550.0]
    model4 = synthetic_model(arms4, f4)
    w4 = arms4[:2] * np.asarray(f4)
    rng = np.random.default_rng(1)
    worst4 = 0.0
    for _ in range(3):
        alpha_true = rng.uniform(0.05, 0.6, 4)
        tau2 = w4 @ alpha_true
        est = solve_activations(np.array([tau2[0], tau2[1], 0.0]),
                                JointAngles(0.0, 1.0, 0.0), model4)
        particular = np.linalg.lstsq(w4, tau2, rcond=None)[0]
        _, _, vt = np.linalg.svd(w4)
        null = vt[2:].T

        def best(center, half, n):
            s = np.linspace(-half, half, n)
            s1, s2 = np.meshgrid(center[0] + s, center[1] + s, indexing="ij")
            cand = (particular[None, None, :] + s1[..., None] * null[:, 0]
                    + s2[..., None] * null[:, 1])
            inside = np.all((cand >= -1e-9) & (cand <= 1 + 1e-9), axis=-1)
            effort = np.where(inside, (cand**2).sum(axis=-1), np.inf)
            idx = np.unravel_index(np.argmin(effort), effort.shape)
            return np.array([s1[idx], s2[idx]]), np.clip(cand[idx], 0, 1)

        coarse, _ = best(np.zeros(2), 1.5, 601)
        _, oracle = best(coarse, 0.01, 401)
        worst4 = max(worst4, float(np.abs(est.activations - oracle).max()))

    # inverse-dynamics round trip
    rng = np.random.default_rng(2)
    worst_rt = 0.0
    from strainplan.activation import required_torque

    for _ in range(50):
        angles = random_pose(rng, model.bounds)
        vel = rng.uniform(-2, 2, 3)
        acc = rng.uniform(-5, 5, 3)
        ext = rng.uniform(-5, 5, 3)
        inp = EstimatorInput(angles=angles, velocities=vel, accelerations=acc,
                             external_torque=ext, timestamp=0.0)
        tau_m = required_torque(inp, model)
        q = np.concatenate([angles.as_array(), vel])
        qdot = model.forward_dynamics(q, tau_m + ext, check_bounds=False)
        worst_rt = max(worst_rt, float(np.abs(qdot[3:] - acc).max()))

    # sustained 20 Hz for 60 simulated seconds
    estimator = ActivationEstimator(model)
    angles = JointAngles(0.5, 1.0, 0.1)
    start = time.perf_counter()
    for k in range(1200):
        estimator.submit(EstimatorInput(
            angles=angles, velocities=np.zeros(3), accelerations=None,
            external_torque=model.gravity_torque(angles.se), timestamp=0.05 * k,
        ))
    wall = time.perf_counter() - start

    ok = worst2 <= 1.5e-3 and worst4 <= 1e-3 and worst_rt <= 1e-8 and wall <= 60.0
    report(
        "criterion 8 (estimator correctness)",
        ok,
        f"grid-oracle error 2-muscle {worst2:.1e}, 4-muscle {worst4:.1e} "
        f"(~<=1e-3); inverse-dynamics round trip {worst_rt:.1e} (<=1e-8); "
        f"1200 estimates in {wall:.1f}s wall (20 Hz for 60 s needs <=60)",
    )


# ---------------------------------------------------------------------------
# criterion 9: kinematic round trip


def test_criterion_09_kinematic_round_trip(model):
    cal = FrameCalibration.from_params(model.params)
    rng = np.random.default_rng(11)
    worst_angle = 0.0
    worst_rate = 0.0
    for _ in range(1000):
        q = np.concatenate([
            [rng.uniform(-1.5, 3.0), rng.uniform(0.05, math.pi - 0.05),
             rng.uniform(-1.5, 1.5)],
            rng.uniform(-2.0, 2.0, 3),
        ])
        ee = ee_state_from_shoulder(q, cal)
        est = estimate_angles(ee, cal)
        assert not est.singular
        worst_angle = max(worst_angle,
                          float(np.abs(est.angles.as_array() - q[:3]).max()))
        rates = estimate_rates(ee, est.angles, cal)
        worst_rate = max(worst_rate, float(np.abs(rates.rates - q[3:]).max()))
    ok = worst_angle <= 1e-9 and worst_rate <= 1e-8
    report(
        "criterion 9 (kinematic round trip)",
        ok,
        f"angle error {worst_angle:.1e} rad (<=1e-9) and rate error "
        f"{worst_rate:.1e} rad/s (<=1e-8) over 1000 random poses",
    )


# ---------------------------------------------------------------------------
# criterion 10: gravity compensation


def test_criterion_10_gravity_compensation(model):
    # formula arithmetic
    out = gravity_offset(10.0, math.pi / 2, 500.0, 0.3)
    formula_ok = abs(out.delta_z - 10.0 / (500.0 * 0.3)) < 1e-12

    # paired closed-loop holds
    from strainplan.kinematics import ee_pose_from_angles
    from strainplan.plant import CoupledPlant, ImpedanceConfig, \
        reference_from_human_state

    cal = FrameCalibration.from_params(model.params)
    imp = ImpedanceConfig()
    q_ref = np.array([0.2, 1.1, 0.0, 0.0, 0.0, 0.0])
    u_se = float(model.gravity_torque(q_ref[1])[1])
    errors = {}
    for use_offset in (False, True):
        delta = gravity_offset(u_se, q_ref[1], imp.vertical_stiffness,
                               model.params.humerus_length)
        plant = CoupledPlant(model, cal, imp, q_ref)
        ref_rot, ref_pos = reference_from_human_state(
            q_ref, cal, delta_z=delta.delta_z if use_offset else 0.0)
        for _ in range(2000):
            out_p = plant.step(0.005, ref_rot, ref_pos)
        _, target_pos = ee_pose_from_angles(q_ref, cal)
        errors[use_offset] = abs(out_p.ee.position[1] - target_pos[1])

    ok = formula_ok and errors[True] < errors[False]
    report(
        "criterion 10 (gravity compensation)",
        ok,
        f"vertical steady-state error {errors[True] * 1000:.2f} mm with "
        f"offset < {errors[False] * 1000:.2f} mm without; formula arithmetic "
        f"exact: {formula_ok}",
    )


# ---------------------------------------------------------------------------
# criterion 11: determinism through the logs


def test_criterion_11_determinism(model, infra_library, tmp_path):
    script = ScenarioScript(
        name="det", mode=SubjectMode.PASSIVE,
        initial_state=(-20 * DEG, 115 * DEG, 0, 0, 0, 0),
        goals=(GoalEvent(0.0, (20 * DEG, 120 * DEG, 0, 0, 0, 0)),),
        duration=2.0,
    )
    cfg = SessionConfig(
        model=model, library=infra_library, script=script,
        ocp=OcpConfig(horizon=2.0, n_intervals=20,
                      mode=TerminalMode.FULL_TERMINAL),
        cost=CostConfig(),
    )
    run_scenario(cfg, out_dir=tmp_path / "one")
    run_scenario(cfg, out_dir=tmp_path / "two")
    identical_runs = all(
        (tmp_path / "one" / f).read_bytes() == (tmp_path / "two" / f).read_bytes()
        for f in ("timeseries.csv", "log.jsonl", "metrics.json")
    )
    replay_ok = replay_metrics(tmp_path / "one") == \
        (tmp_path / "one" / "metrics.json").read_text()
    ok = identical_runs and replay_ok
    report(
        "criterion 11 (determinism)",
        ok,
        f"paired runs byte-identical: {identical_runs}; replay reproduces "
        f"metrics.json byte-identically: {replay_ok}",
    )
