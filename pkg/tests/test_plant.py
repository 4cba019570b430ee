import math

import numpy as np
import pytest

from strainplan.errors import SimulationFault
from strainplan.kinematics import FrameCalibration, ee_pose_from_angles
from strainplan.plant import (
    CoupledPlant,
    GravityOffset,
    ImpedanceConfig,
    gravity_offset,
    impedance_wrench,
    reference_from_human_state,
    rotation_error,
)
from strainplan.shoulder import ArmDynamicsParams, ShoulderModel, default_muscles

from conftest import DEG


@pytest.fixture(scope="module")
def cal(model):
    return FrameCalibration.from_params(model.params)


def make_plant(model, cal, q0, impedance=None):
    return CoupledPlant(model, cal, impedance or ImpedanceConfig(), np.asarray(q0, float))


# ---------------------------------------------------------------------------
# impedance law and gravity offset


def test_impedance_config_validation():
    with pytest.raises(ValueError):
        ImpedanceConfig(stiffness=np.eye(5))
    with pytest.raises(ValueError):
        ImpedanceConfig(damping=-np.eye(6))
    with pytest.raises(ValueError):
        ImpedanceConfig(control_rate=50.0)


def test_rotation_error_axis_angle():
    from strainplan.shoulder import rot_y

    err = rotation_error(rot_y(0.3), np.eye(3))
    assert np.allclose(err, [0.0, 0.3, 0.0], atol=1e-12)
    assert np.allclose(rotation_error(np.eye(3), np.eye(3)), 0.0)


def test_wrench_zero_at_reference(model, cal):
    plant = make_plant(model, cal, [0.3, 1.0, 0.0, 0.0, 0.0, 0.0])
    ee = plant.ee_state()
    wrench = impedance_wrench(plant.impedance, ee.rotation, ee.position, ee)
    assert np.allclose(wrench, 0.0, atol=1e-12)


def test_gravity_offset_formula():
    # 10 N m over 500 N/m, 0.3 m arm at horizontal elevation
    out = gravity_offset(10.0, math.pi / 2, 500.0, 0.3)
    assert out.valid
    assert out.delta_z == pytest.approx(10.0 / (500.0 * 0.3), rel=1e-12)
    assert gravity_offset(0.0, 1.0, 500.0, 0.3).delta_z == 0.0


def test_gravity_offset_singular_flagged():
    out = gravity_offset(5.0, 1e-5, 500.0, 0.3)
    assert out == GravityOffset(0.0, False)
    with pytest.raises(ValueError):
        gravity_offset(5.0, 1.0, 0.0, 0.3)


# ---------------------------------------------------------------------------
# plant stepping


def test_plant_at_rest_with_gravity_off(cal):
    params = ArmDynamicsParams(gravity=1e-12)
    model = ShoulderModel(default_muscles(), params=params)
    q0 = np.array([0.3, 1.0, 0.0, 0.0, 0.0, 0.0])
    plant = make_plant(model, cal, q0)
    ref_rot, ref_pos = ee_pose_from_angles(q0, cal)
    out = plant.step(0.005, ref_rot, ref_pos)
    assert np.allclose(out.applied_wrench, 0.0, atol=1e-9)
    assert np.abs(out.q - q0).max() < 1e-9


def test_newtons_third_law(model, cal):
    q0 = np.array([0.4, 1.1, 0.1, 0.0, 0.0, 0.0])
    plant = make_plant(model, cal, q0)
    ref_rot, ref_pos = ee_pose_from_angles(
        np.array([0.5, 1.2, 0.1, 0.0, 0.0, 0.0]), cal
    )
    out = plant.step(0.005, ref_rot, ref_pos)
    assert np.array_equal(out.sensed_wrench, -out.applied_wrench)


def test_rigid_brace_invariant(model, cal):
    # EE pose always equals the forward kinematics of the human state
    q0 = np.array([0.4, 1.1, 0.1, 0.0, 0.0, 0.0])
    plant = make_plant(model, cal, q0)
    ref_rot, ref_pos = ee_pose_from_angles(
        np.array([0.6, 1.0, 0.1, 0.0, 0.0, 0.0]), cal
    )
    for _ in range(50):
        out = plant.step(0.005, ref_rot, ref_pos)
        rot_fk, pos_fk = ee_pose_from_angles(out.q, cal)
        assert np.abs(out.ee.rotation - rot_fk).max() <= 1e-12
        assert np.abs(out.ee.position - pos_fk).max() <= 1e-12


def test_static_displacement_matches_linear_analysis(model, cal):
    # high stiffness holding against gravity: the steady-state elevation sag
    # satisfies torque balance  J' K J dq = -g(q)  to first order
    q_ref = np.array([0.0, 1.2, 0.0, 0.0, 0.0, 0.0])
    imp = ImpedanceConfig(
        stiffness=np.diag([2000.0, 2000.0, 2000.0, 80.0, 80.0, 80.0]),
        damping=np.diag([120.0, 120.0, 120.0, 8.0, 8.0, 8.0]),
    )
    plant = make_plant(model, cal, q_ref, impedance=imp)
    ref_rot, ref_pos = ee_pose_from_angles(q_ref, cal)
    for _ in range(3000):
        out = plant.step(0.005, ref_rot, ref_pos)
    assert np.linalg.norm(out.q[3:6]) < 1e-4  # settled

    from strainplan.kinematics import humerus_jacobian

    jac = humerus_jacobian(q_ref, cal)
    k_eff = jac.T @ imp.stiffness @ jac  # generalized stiffness, 3x3
    dq_pred = np.linalg.solve(k_eff, -model.gravity_torque(q_ref[1]))
    dq_actual = out.q[:3] - q_ref[:3]
    assert np.abs(dq_actual - dq_pred).max() < 0.25 * np.abs(dq_pred).max()


def test_passive_decay_without_reference(model, cal):
    # zero stiffness (no reference): pure damped pendulum, energy decreases
    q0 = np.array([0.3, 1.3, 0.0, 0.4, 0.2, 0.1])
    plant = make_plant(model, cal, q0)
    e0 = model.total_energy(q0)
    for _ in range(60):
        out = plant.step(0.005, None, None)
        assert np.allclose(out.applied_wrench, 0.0)
    assert model.total_energy(out.q) < e0


def test_injected_torque_shows_in_impedance_response(model, cal):
    # a held reference resists an injected axial torque; the sensed wrench
    # develops an opposing rotational component
    q0 = np.array([60 * DEG, 60 * DEG, 0.0, 0.0, 0.0, 0.0])
    plant = make_plant(model, cal, q0)
    ref_rot, ref_pos = ee_pose_from_angles(q0, cal)
    for _ in range(400):
        out = plant.step(0.005, ref_rot, ref_pos, injected_torque=[0.0, 0.0, 2.0])
    # axial rotation deviated and the robot pushes back
    assert out.q[2] > 0.01
    from strainplan.kinematics import humerus_jacobian

    tau_applied = humerus_jacobian(out.q, cal).T @ out.applied_wrench
    assert tau_applied[2] < -0.5  # opposing the injected +AR torque


def test_divergence_fault(model, cal):
    q0 = np.array([0.3, 1.0, 0.0, 0.0, 0.0, 0.0])
    plant = make_plant(model, cal, q0)
    with pytest.raises(SimulationFault):
        for _ in range(2000):
            plant.step(0.005, None, None, injected_torque=[50.0, 50.0, 50.0])


def test_gravity_offset_improves_vertical_tracking(model, cal):
    # paired closed-loop runs: holding a raised pose with and without the
    # planned-torque vertical offset; the supported run tracks closer
    q_ref = np.array([0.2, 1.1, 0.0, 0.0, 0.0, 0.0])
    u_se = float(model.gravity_torque(q_ref[1])[1])
    imp = ImpedanceConfig()
    k_up = imp.vertical_stiffness

    errors = {}
    for use_offset in (False, True):
        delta = gravity_offset(u_se, q_ref[1], k_up, model.params.humerus_length)
        assert delta.valid
        plant = make_plant(model, cal, q_ref, impedance=imp)
        ref_rot, ref_pos = reference_from_human_state(
            q_ref, cal, delta_z=delta.delta_z if use_offset else 0.0
        )
        for _ in range(2000):
            out = plant.step(0.005, ref_rot, ref_pos)
        target_rot, target_pos = ee_pose_from_angles(q_ref, cal)
        errors[use_offset] = abs(out.ee.position[1] - target_pos[1])
    assert errors[True] < errors[False]
