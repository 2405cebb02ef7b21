import dataclasses
import json
import math

import numpy as np
import pytest

from brakesim.brake import BrakeSpec
from brakesim.mechanism import (JointSpec, MechanismSpec, MotorSpec, SpringSpec,
                                TendonRoute)
from brakesim.scenario import load_scenario, scenario_to_dict


@pytest.fixture(scope="session")
def brake_2stack() -> BrakeSpec:
    """Brake built from the standard electrical constants, two stacks."""
    return BrakeSpec(voltage=1000.0, relative_permittivity=3.35,
                     dielectric_thickness=12.7e-6, overlap_area=0.8e-4,
                     friction_coefficient=0.71, pinion_pitch_diameter=0.012,
                     num_stacks=2)


@pytest.fixture(scope="session")
def brake_1stack(brake_2stack) -> BrakeSpec:
    return dataclasses.replace(brake_2stack, num_stacks=1)


def build_chain(n_joints: int, brake: BrakeSpec, springs: bool = False,
                tension_limit: float = 10.0) -> MechanismSpec:
    """Serial chain with an antagonistic tendon pair on one velocity motor."""
    spring = SpringSpec(stiffness=0.05, rest_angle=0.0) if springs else None
    joints = tuple(
        JointSpec(limits=(-math.radians(60), math.radians(60)), moment_arm=0.01,
                  rotational_inertia=2e-4, viscous_damping=5e-3,
                  link_length=0.04, link_radius=0.008, brake=brake,
                  extension_spring=spring)
        for _ in range(n_joints))
    tendons = (
        TendonRoute(motor=0, joints=tuple(range(n_joints)),
                    routing_signs=(1,) * n_joints, stiffness=1e5,
                    tension_limit=tension_limit, spool_sign=1),
        TendonRoute(motor=0, joints=tuple(range(n_joints)),
                    routing_signs=(-1,) * n_joints, stiffness=1e5,
                    tension_limit=tension_limit, spool_sign=-1),
    )
    motors = (MotorSpec(control_mode="velocity", spool_radius=0.01, max_speed=0.25,
                        position_limits=(-200.0, 200.0)),)
    return MechanismSpec(base_pose=(0.0, 0.0, 0.0), joints=joints,
                         tendons=tendons, motors=motors)


@pytest.fixture(scope="session")
def chain3(brake_2stack) -> MechanismSpec:
    return build_chain(3, brake_2stack)


@pytest.fixture(scope="session")
def chain10_scenario():
    return load_scenario("chain10")


@pytest.fixture(scope="session")
def hand_scenario():
    return load_scenario("hand2x3")


@pytest.fixture(scope="session")
def mini_hand_scenario(hand_scenario):
    """Reduced-budget variant of the hand scenario for fast end-to-end tests."""
    params = dataclasses.replace(hand_scenario.controller.params,
                                 num_rollouts=9, horizon=3, model_dt=0.005)
    controller = dataclasses.replace(hand_scenario.controller, params=params,
                                     timeout=2.0)
    return dataclasses.replace(hand_scenario, name="hand2x3-mini",
                               controller=controller)


@pytest.fixture(scope="session")
def mini_hand_scenario_path(mini_hand_scenario, tmp_path_factory):
    path = tmp_path_factory.mktemp("scenarios") / "hand2x3_mini.json"
    with open(path, "w") as f:
        json.dump(scenario_to_dict(mini_hand_scenario), f, indent=2)
    return path


def assert_states_equal(a, b):
    np.testing.assert_array_equal(a.joint_angles, b.joint_angles)
    np.testing.assert_array_equal(a.joint_velocities, b.joint_velocities)
    np.testing.assert_array_equal(a.brake_engaged, b.brake_engaged)
    np.testing.assert_array_equal(a.motor_positions, b.motor_positions)
    np.testing.assert_array_equal(a.object_position, b.object_position)
    np.testing.assert_array_equal(a.object_velocity, b.object_velocity)
    assert a.sim_time == pytest.approx(b.sim_time, abs=1e-12)
