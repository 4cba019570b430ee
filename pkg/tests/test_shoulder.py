import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strainplan.errors import OutOfBoundsError, SingularPoseError
from strainplan.shoulder import (
    EPS_SINGULAR,
    JointAngles,
    KinematicState,
    MusculoskeletalState,
    default_model,
    euler_rate_matrix,
    humerus_direction,
    humerus_rotation,
    rk4_step,
)

from conftest import DEG, random_pose, random_state


def msk(angles, activations=(0.0,) * 6, velocities=(0.0, 0.0, 0.0)):
    return MusculoskeletalState(KinematicState(angles, velocities), activations)


# ---------------------------------------------------------------------------
# geometry and strain


def test_rest_pose_length_equals_slack(model):
    state = msk(JointAngles(0.0, 0.0, 0.0))
    for unit in model.muscles:
        assert model.tendon_length(unit, state) == pytest.approx(
            unit.tendon_slack_length, abs=1e-12
        )
        assert model.tendon_strain(unit, state) == pytest.approx(0.0, abs=1e-9)


def test_activation_raises_tendon_length_everywhere(model):
    rng = np.random.default_rng(7)
    for _ in range(100):
        angles = random_pose(rng, model.bounds)
        for i, unit in enumerate(model.muscles):
            low = model.tendon_length(unit, msk(angles))
            acts = [0.0] * 6
            acts[i] = 0.25
            high = model.tendon_length(unit, msk(angles, tuple(acts)))
            assert high >= low


def test_infraspinatus_strained_at_paper_probe_pose(model):
    # regression fixture computed from the analytic geometry
    state = msk(JointAngles(60 * DEG, 60 * DEG, 0.0))
    strain = model.tendon_strain(model.muscle("infraspinatus"), state)
    length = model.tendon_length(model.muscle("infraspinatus"), state)
    assert length > model.muscle("infraspinatus").tendon_slack_length
    assert strain == pytest.approx(8.1283, abs=2e-3)


def test_two_percent_strain_algebra(model):
    # at the rest pose only the active term stretches the tendon, so an
    # activation chosen to add exactly 2% of slack gives exactly 2% strain
    unit = model.muscle("infraspinatus")
    rest_path = model.path_length(unit, JointAngles(0.0, 0.0, 0.0))
    alpha = 0.02 * unit.tendon_slack_length / (model.fiber_gain * rest_path)
    assert 0.0 < alpha < 1.0
    acts = [0.0] * 6
    acts[list(model.muscle_names).index(unit.name)] = alpha
    strain = model.tendon_strain(unit, msk(JointAngles(0.0, 0.0, 0.0), tuple(acts)))
    assert strain == pytest.approx(2.0, abs=1e-9)


def test_out_of_bounds_pose_rejected(model):
    with pytest.raises(OutOfBoundsError):
        model.tendon_length(model.muscles[0], msk(JointAngles(0.0, -0.2, 0.0)))
    with pytest.raises(OutOfBoundsError):
        model.tendon_length(model.muscles[0], msk(JointAngles(3.5, 0.5, 0.0)))


def test_raw_strain_can_be_negative_clamped_is_not(model):
    pe = np.linspace(-math.pi / 2, math.pi, 25)
    se = np.linspace(0.05, math.pi - 0.05, 25)
    grid_pe, grid_se = np.meshgrid(pe, se)
    saw_negative = False
    for unit in model.muscles:
        raw = model.tendon_strain_arrays(unit, grid_pe, grid_se, 0.0, 0.0, clamped=False)
        clamped = model.tendon_strain_arrays(unit, grid_pe, grid_se, 0.0, 0.0)
        assert np.all(clamped >= 0.0)
        assert np.allclose(clamped, np.maximum(raw, 0.0))
        saw_negative |= bool(np.any(raw < 0))
    assert saw_negative  # slack tendons exist somewhere on the grid


def test_strain_lipschitz_sweep(model):
    # empirical Lipschitz bound over a fine sweep of each input direction
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(40):
        a = random_pose(rng, model.bounds)
        base = np.array([a.pe, a.se, a.ar, 0.3])
        for j in range(4):
            step = np.zeros(4)
            step[j] = 1e-4
            hi, lo = base + step, base - step
            for unit in model.muscles:
                s_hi = model.tendon_strain_arrays(unit, hi[0], hi[1], hi[2], hi[3])
                s_lo = model.tendon_strain_arrays(unit, lo[0], lo[1], lo[2], lo[3])
                worst = max(worst, abs(float(s_hi - s_lo)) / 2e-4)
    assert worst < 250.0  # percent strain per rad (or per unit activation)


def test_moment_arm_guard(model):
    model.check_moment_arm_guard(samples=150)


def test_activations_clamped_into_unit_interval():
    state = MusculoskeletalState(
        KinematicState(JointAngles(0.0, 0.5, 0.0)), (-0.5, 1.5, 0.3)
    )
    assert state.activations == (0.0, 1.0, 0.3)


# ---------------------------------------------------------------------------
# dynamics


def test_static_equilibrium(model):
    q = np.array([0.3, 1.0, 0.1, 0.0, 0.0, 0.0])
    u = model.gravity_torque(1.0)
    qdot = model.forward_dynamics(q, u)
    assert np.allclose(qdot, 0.0, atol=1e-12)


def test_pendulum_restoring_acceleration(model):
    # with zero rates the elevation axis decouples: I_t * se_dd = -m g L sin(se)
    se = 5e-3
    q = np.array([0.0, se, 0.0, 0.0, 0.0, 0.0])
    qdot = model.forward_dynamics(q, np.zeros(3))
    p = model.params
    expected = -p.arm_mass * p.gravity * p.com_distance * math.sin(se) / p.transverse_inertia
    assert qdot[4] == pytest.approx(expected, rel=1e-12)
    assert qdot[4] < 0.0


def test_singularity_raises(model):
    for se in (0.0, 5e-4, math.pi - 5e-4, math.pi):
        with pytest.raises(SingularPoseError):
            model.forward_dynamics(np.array([0.0, se, 0.0, 0.0, 0.0, 0.0]), np.zeros(3))


def test_energy_conservation_rk4(undamped_model):
    q = np.array([0.4, 1.2, 0.1, 0.5, 0.3, 0.8])
    e0 = undamped_model.total_energy(q)
    dt = 1e-4
    for _ in range(10_000):
        q = rk4_step(undamped_model, q, np.zeros(3), dt)
    drift = abs(undamped_model.total_energy(q) - e0) / abs(e0)
    assert drift <= 1e-6


def test_damping_dissipates_energy(model):
    # short window: the swing must not reach the se = 0 coordinate singularity
    q = np.array([0.4, 1.2, 0.1, 0.5, 0.3, 0.8])
    e0 = model.total_energy(q)
    for _ in range(200):
        q = rk4_step(model, q, np.zeros(3), 1e-3)
    assert q[1] > 0.3
    assert model.total_energy(q) < e0


def test_mass_matrix_spd(model):
    for se in np.linspace(EPS_SINGULAR, math.pi - EPS_SINGULAR, 50):
        m = model.mass_matrix(float(se))
        assert np.allclose(m, m.T)
        assert np.all(np.linalg.eigvalsh(m) > 0)


def test_dynamics_deterministic(model):
    q = np.array([0.4, 1.2, 0.1, 0.5, 0.3, 0.8])
    u = np.array([1.0, -2.0, 0.5])
    a = model.forward_dynamics(q, u)
    b = model.forward_dynamics(q, u)
    assert np.array_equal(a, b)


def test_forward_dynamics_batch_matches_scalar(model):
    rng = np.random.default_rng(11)
    qs = np.stack([random_state(rng, model.bounds) for _ in range(32)])
    us = rng.uniform(-10, 10, (32, 3))
    batch = model.forward_dynamics_batch(qs, us)
    for i in range(32):
        single = model.forward_dynamics(qs[i], us[i], check_bounds=False)
        assert np.allclose(batch[i], single, atol=1e-12)


# ---------------------------------------------------------------------------
# jacobians vs central finite differences


def fd_jacobians(model, q, u, h=1e-6):
    f = lambda qq, uu: model.forward_dynamics(qq, uu, check_bounds=False)
    jq = np.zeros((6, 6))
    ju = np.zeros((6, 3))
    for j in range(6):
        dq = np.zeros(6)
        dq[j] = h
        jq[:, j] = (f(q + dq, u) - f(q - dq, u)) / (2 * h)
    for j in range(3):
        du = np.zeros(3)
        du[j] = h
        ju[:, j] = (f(q, u + du) - f(q, u - du)) / (2 * h)
    return jq, ju


def test_jacobian_structure(model):
    q = np.array([0.3, 1.1, -0.2, 0.4, -0.6, 0.2])
    u = np.array([2.0, 5.0, -1.0])
    df_dq, df_du = model.dynamics_jacobians(q, u)
    assert np.allclose(df_du[0:3, :], 0.0)
    assert np.allclose(df_du[3:6, :], np.linalg.inv(model.mass_matrix(q[1])))
    assert np.allclose(df_dq[0:3, 0:3], 0.0)
    assert np.allclose(df_dq[0:3, 3:6], np.eye(3))


def test_jacobians_match_finite_differences(model):
    rng = np.random.default_rng(5)
    for _ in range(100):
        q = random_state(rng, model.bounds, v_scale=2.0)
        u = rng.uniform(-15, 15, 3)
        jq, ju = model.dynamics_jacobians(q, u)
        jq_fd, ju_fd = fd_jacobians(model, q, u)
        rel_q = np.abs(jq - jq_fd).max() / max(1.0, np.abs(jq_fd).max())
        rel_u = np.abs(ju - ju_fd).max() / max(1.0, np.abs(ju_fd).max())
        assert rel_q <= 1e-5
        assert rel_u <= 1e-5


# ---------------------------------------------------------------------------
# rotation kernels


def test_humerus_direction_matches_rotation():
    rng = np.random.default_rng(2)
    for _ in range(50):
        pe, se, ar = rng.uniform(-1.5, 1.5, 3)
        rot = humerus_rotation(pe, se, ar)
        beta = humerus_direction(pe, se)
        assert np.allclose(rot @ np.array([0.0, -1.0, 0.0]), beta, atol=1e-12)
        assert np.allclose(rot @ rot.T, np.eye(3), atol=1e-12)


def test_euler_rate_matrix_consistent_with_rotation_derivative():
    rng = np.random.default_rng(4)
    h = 1e-7
    for _ in range(30):
        theta = rng.uniform(0.2, 1.2, 3)
        rates = rng.uniform(-1, 1, 3)
        omega = euler_rate_matrix(theta[0], theta[1]) @ rates
        r0 = humerus_rotation(*(theta - h * rates))
        r1 = humerus_rotation(*(theta + h * rates))
        rdot = (r1 - r0) / (2 * h)
        skew = rdot @ humerus_rotation(*theta).T
        omega_fd = np.array([skew[2, 1], skew[0, 2], skew[1, 0]])
        assert np.allclose(omega, omega_fd, atol=1e-6)


# ---------------------------------------------------------------------------
# property-based checks


@settings(max_examples=60, deadline=None)
@given(
    pe=st.floats(-1.5, 3.1),
    se=st.floats(0.05, 3.09),
    ar=st.floats(-1.5, 1.5),
    act=st.floats(0.0, 1.0),
)
def test_clamped_strain_nonnegative_property(pe, se, ar, act):
    model = default_model()
    for unit in model.muscles:
        val = float(model.tendon_strain_arrays(unit, pe, se, ar, act))
        assert val >= 0.0


@settings(max_examples=40, deadline=None)
@given(
    pe=st.floats(-1.4, 3.0),
    se=st.floats(0.2, 2.9),
    ar=st.floats(-1.4, 1.4),
    a1=st.floats(0.0, 1.0),
    a2=st.floats(0.0, 1.0),
)
def test_length_monotone_in_activation_property(pe, se, ar, a1, a2):
    model = default_model()
    lo, hi = min(a1, a2), max(a1, a2)
    for unit in model.muscles:
        l_lo = float(model.tendon_length_arrays(unit, pe, se, ar, lo))
        l_hi = float(model.tendon_length_arrays(unit, pe, se, ar, hi))
        assert l_hi >= l_lo - 1e-12
