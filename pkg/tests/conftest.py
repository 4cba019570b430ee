import math

import numpy as np
import pytest

from strainplan.shoulder import AGGREGATE, JointAngles, default_model

DEG = math.pi / 180.0


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def tiny_library(model):
    """Aggregate-only library at one AR bin; enough for planner loops."""
    from strainplan.maps import build_library

    return build_library(
        model,
        tendons=[AGGREGATE],
        ar_bins=[0.0],
        activation_bins=[0.0, 0.25],
        resolution=24,
        n_centers=(9, 9),
    )


@pytest.fixture(scope="session")
def undamped_model():
    from strainplan.shoulder import ArmDynamicsParams, default_muscles, ShoulderModel

    params = ArmDynamicsParams(damping=0.0)
    return ShoulderModel(default_muscles(), params=params)


def random_pose(rng, bounds, margin=0.15):
    """Pose safely inside bounds and clear of the elevation singularity."""
    return JointAngles(
        rng.uniform(bounds.pe[0] + margin, bounds.pe[1] - margin),
        rng.uniform(bounds.se[0] + margin, bounds.se[1] - margin),
        rng.uniform(bounds.ar[0] + margin, bounds.ar[1] - margin),
    )


def random_state(rng, bounds, v_scale=1.0, margin=0.15):
    angles = random_pose(rng, bounds, margin)
    theta = angles.as_array()
    thetadot = rng.uniform(-v_scale, v_scale, 3)
    return np.concatenate([theta, thetadot])
