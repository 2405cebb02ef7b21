"""Single-motor configuration-reaching controller for brake-equipped chains.

Every joint votes for the motor direction that moves it toward its target
given its tendon routing. The majority group moves while the minority holds
its brakes; as each moving joint enters tolerance it locks its own brake.
When the whole majority has locked, the motor reverses once and the minority
gets its turn, so a full configuration is reached with at most two movement
phases and one motor direction change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .engine import Command, IntegrationParams, Trajectory, rollout
from .mechanism import MechanismSpec, ObjectSpec, WorldState, reference_routing_signs

DEFAULT_TOLERANCE = math.radians(1.0)
DEFAULT_MOTOR_SPEED = 0.2  # rad/s


@dataclass(frozen=True)
class TargetConfig:
    """Desired joint configuration with a per-joint angular tolerance."""

    target_angles: np.ndarray  # rad
    tolerance: float = DEFAULT_TOLERANCE  # rad

    def __post_init__(self) -> None:
        object.__setattr__(self, "target_angles",
                           np.asarray(self.target_angles, dtype=float))
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")


@dataclass(frozen=True)
class VotingPhase:
    """Progress through one configuration-reaching run.

    ``votes`` records each joint's initial motor-direction vote; group
    membership never changes within a run. ``reached`` flags are monotone:
    once a joint locks its brake at its target it stays locked.
    """

    phase: str  # "majority" | "minority" | "done"
    majority_sign: int
    votes: np.ndarray  # (n,) in {-1, 0, +1}
    reached: np.ndarray  # (n,) bool


def vote(joint_index: int, current_angle: float, target_angle: float,
         routing_sign: int, tolerance: float) -> int:
    """Motor direction this joint wants: 0 when already within tolerance."""
    error = target_angle - current_angle
    if abs(error) <= tolerance:
        return 0
    direction = 1 if error > 0 else -1
    return routing_sign * direction


def init_phase(state: WorldState, target: TargetConfig,
               routing_signs: np.ndarray) -> VotingPhase:
    """Collect votes and pick the starting majority.

    A tie goes to the group containing the joint with the largest absolute
    error, which minimizes the worst remaining error and is deterministic.
    """
    q = state.joint_angles
    votes = np.array([vote(i, q[i], target.target_angles[i], int(routing_signs[i]),
                           target.tolerance)
                      for i in range(len(q))])
    reached = votes == 0
    n_pos = int(np.sum(votes == 1))
    n_neg = int(np.sum(votes == -1))
    if n_pos == 0 and n_neg == 0:
        return VotingPhase(phase="done", majority_sign=1, votes=votes, reached=reached)
    if n_pos > n_neg:
        majority = 1
    elif n_neg > n_pos:
        majority = -1
    else:
        errors = np.abs(target.target_angles - q)
        errors = np.where(votes == 0, -np.inf, errors)
        majority = int(votes[int(np.argmax(errors))])
    return VotingPhase(phase="majority", majority_sign=majority, votes=votes,
                       reached=reached)


def plan_step(state: WorldState, target: TargetConfig, phase: VotingPhase,
              motor_speed: float = DEFAULT_MOTOR_SPEED, motor_index: int = 0,
              n_motors: int = 1) -> tuple[Command, VotingPhase]:
    """One control tick: update reached flags, advance the phase if its whole
    group has locked, and emit the motor velocity plus brake configuration.

    Brakes are on for every joint except the current group's joints that have
    not reached their targets yet; abstaining and locked joints stay braked in
    both phases.
    """
    errors = target.target_angles - state.joint_angles
    reached = phase.reached | (np.abs(errors) <= target.tolerance)

    current = phase.phase
    if current == "majority":
        if np.all(reached[phase.votes == phase.majority_sign]):
            minority_left = (phase.votes == -phase.majority_sign) & ~reached
            current = "minority" if minority_left.any() else "done"
    if current == "minority":
        if np.all(reached[phase.votes == -phase.majority_sign]):
            current = "done"

    new_phase = replace(phase, phase=current, reached=reached)
    motor_commands = np.zeros(n_motors)
    if current == "done":
        brakes = np.ones(len(reached), dtype=bool)
        return Command(motor_commands=motor_commands, brake_engaged=brakes), new_phase

    sign = phase.majority_sign if current == "majority" else -phase.majority_sign
    movers = (phase.votes == sign) & ~reached
    motor_commands[motor_index] = sign * motor_speed
    return Command(motor_commands=motor_commands, brake_engaged=~movers), new_phase


@dataclass
class VotingRunResult:
    final_state: WorldState
    trajectory: Trajectory
    converged: bool
    phases_used: int
    direction_changes: int


def run_to_config(spec: MechanismSpec, state: WorldState, target: TargetConfig,
                  timeout: float, obj: Optional[ObjectSpec] = None,
                  motor_speed: float = DEFAULT_MOTOR_SPEED, motor_index: int = 0,
                  control_period: float = 0.01,
                  integration: Optional[IntegrationParams] = None) -> VotingRunResult:
    """Closed loop of plan_step and simulation until done or timeout.

    The target must lie within the joint limits. ``converged`` is true iff
    every joint ends within tolerance of its target.
    """
    if timeout <= 0:
        raise ValueError(f"timeout must be > 0, got {timeout}")
    limits_lo = np.array([j.limits[0] for j in spec.joints])
    limits_hi = np.array([j.limits[1] for j in spec.joints])
    t = target.target_angles
    if t.shape != (len(spec.joints),):
        raise ValueError(f"expected {len(spec.joints)} target angles, got shape {t.shape}")
    if np.any(t < limits_lo) or np.any(t > limits_hi):
        raise ValueError("target configuration lies outside the joint limits")

    if integration is None:
        integration = IntegrationParams(dt=0.001, control_substeps=1)
    substeps = max(1, round(control_period / integration.dt))

    routing_signs = reference_routing_signs(spec, motor_index)
    phase = init_phase(state, target, routing_signs)

    current = state.copy()
    states = [current.copy()]
    commands: list[Command] = []
    signs_seen: list[int] = []
    start_time = current.sim_time

    while current.sim_time - start_time < timeout:
        cmd, phase = plan_step(current, target, phase,
                               motor_speed=motor_speed, motor_index=motor_index,
                               n_motors=len(spec.motors))
        if phase.phase == "done":
            break
        motor_sign = int(np.sign(cmd.motor_commands[motor_index]))
        if motor_sign != 0 and (not signs_seen or signs_seen[-1] != motor_sign):
            signs_seen.append(motor_sign)
        tick = rollout(spec, obj, current, [cmd], integration.dt, substeps,
                       brake_latency=integration.brake_latency)
        current = tick.states[-1]
        states.append(current.copy())
        commands.append(cmd)

    errors = np.abs(target.target_angles - current.joint_angles)
    converged = bool(np.all(errors <= target.tolerance))
    trajectory = Trajectory(states=states, commands=commands,
                            dt=integration.dt * substeps)
    return VotingRunResult(
        final_state=current,
        trajectory=trajectory,
        converged=converged,
        phases_used=len(signs_seen),
        direction_changes=max(0, len(signs_seen) - 1),
    )
