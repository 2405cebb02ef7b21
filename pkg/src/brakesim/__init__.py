"""Planar simulation and control of tendon-driven mechanisms with
electrostatic joint brakes."""

from .brake import (
    BrakeSpec,
    attractive_force,
    max_brake_force,
    max_brake_torque,
    power_draw,
    specific_tension,
)
from .engine import (
    Command,
    IntegrationFault,
    IntegrationParams,
    Trajectory,
    rollout,
    rollout_batch,
    step,
)
from .mechanism import (
    FingerSpec,
    JointSpec,
    MechanismSpec,
    MotorSpec,
    ObjectSpec,
    SpringSpec,
    TendonRoute,
    WorldState,
    contact_wrench,
    fingertip_contacts,
    forward_kinematics,
    make_state,
    net_joint_torques,
    tendon_excursion,
    tendon_tensions,
)
from .stats import mann_whitney_u

__version__ = "0.1.0"
