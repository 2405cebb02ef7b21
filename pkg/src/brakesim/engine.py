"""Fixed-step deterministic time integration.

``step`` advances one world by one physics step; ``rollout`` holds each
control command for a fixed number of physics substeps and records the state
at every control tick. ``rollout_batch`` advances many worlds in lockstep for
sampling-based control; batched and sequential execution produce identical
results world by world.

The stick-slip brake constraint lives in the shared kernel: an engaged brake
removes up to its holding torque's worth of impulse every step, which yields
an exact breakaway threshold and exact sticking at rest.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _fastpath, _kernel
from ._kernel import IntegrationFault
from .mechanism import MechanismSpec, ObjectSpec, WorldState

__all__ = [
    "Command", "Trajectory", "IntegrationParams", "IntegrationFault",
    "step", "rollout", "rollout_batch", "BatchRollout",
]

MAX_PHYSICS_DT = 0.005  # s

DEFAULT_DRIVER_FREQUENCY = 15.0  # Hz, bipolar drive bookkeeping only


@dataclass
class Command:
    """One control tick's command.

    ``motor_commands`` holds a velocity (rad/s) for velocity-mode motors and
    a target position (rad) for position-mode motors. ``driver_frequency`` is
    the brake drive waveform frequency; it is recorded in logs and has no
    dynamic effect.
    """

    motor_commands: np.ndarray
    brake_engaged: np.ndarray
    driver_frequency: float = DEFAULT_DRIVER_FREQUENCY

    def __post_init__(self) -> None:
        self.motor_commands = np.asarray(self.motor_commands, dtype=float)
        self.brake_engaged = np.asarray(self.brake_engaged, dtype=bool)


@dataclass
class IntegrationParams:
    """Physics step size and control-tick bridging."""

    dt: float = 0.001  # s
    control_substeps: int = 200  # physics steps per control tick
    brake_latency: float = 0.0  # s, delay before a commanded brake change applies

    def __post_init__(self) -> None:
        if not 0.0 < self.dt <= MAX_PHYSICS_DT:
            raise ValueError(f"dt must be in (0, {MAX_PHYSICS_DT}] s, got {self.dt}")
        if self.control_substeps < 1:
            raise ValueError(f"control_substeps must be >= 1, got {self.control_substeps}")
        if self.brake_latency < 0:
            raise ValueError(f"brake_latency must be >= 0, got {self.brake_latency}")

    @property
    def control_period(self) -> float:
        return self.dt * self.control_substeps


@dataclass
class Trajectory:
    """Time-ordered states with the commands that produced them.

    ``states[k]`` is the state at the start of tick k; ``states[-1]`` is the
    final state, so there is one more state than command. ``dt`` is the
    control tick period.
    """

    states: list[WorldState]
    commands: list[Command]
    dt: float

    def __post_init__(self) -> None:
        if len(self.states) != len(self.commands) + 1:
            raise ValueError("trajectory must have exactly one more state than command")

    CSV_FLOAT_FORMAT = "%.9g"

    def csv_header(self) -> str:
        n = len(self.states[0].joint_angles)
        m = len(self.states[0].motor_positions)
        cols = (["t"]
                + [f"q{i}" for i in range(n)]
                + [f"dq{i}" for i in range(n)]
                + [f"brake{i}" for i in range(n)]
                + [f"motor{i}" for i in range(m)]
                + ["obj_x", "obj_y"])
        return ",".join(cols)

    def to_csv(self) -> str:
        fmt = self.CSV_FLOAT_FORMAT
        out = io.StringIO()
        out.write(self.csv_header() + "\n")
        for s in self.states:
            fields = [fmt % s.sim_time]
            fields += [fmt % v for v in s.joint_angles]
            fields += [fmt % v for v in s.joint_velocities]
            fields += [str(int(v)) for v in s.brake_engaged]
            fields += [fmt % v for v in s.motor_positions]
            fields += [fmt % s.object_position[0], fmt % s.object_position[1]]
            out.write(",".join(fields) + "\n")
        return out.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as f:
            f.write(self.to_csv())


def _check_command(spec: MechanismSpec, cmd: Command) -> None:
    n, m = len(spec.joints), len(spec.motors)
    if cmd.motor_commands.shape != (m,):
        raise ValueError(f"expected {m} motor commands, got shape {cmd.motor_commands.shape}")
    if cmd.brake_engaged.shape != (n,):
        raise ValueError(f"expected {n} brake flags, got shape {cmd.brake_engaged.shape}")


def _fault_diag(state_q: np.ndarray, sim_time: float) -> str:
    bad = np.flatnonzero(~np.isfinite(state_q))
    return (f"non-finite state at t={sim_time:.6f}s "
            f"(joint angles {bad.tolist() if bad.size else 'finite'}, "
            f"values {state_q.tolist()})")


def _advance(cm, obj, q, dq, mp, op, ov, cmd, brake, dt, n_sub,
             external_torques=None) -> None:
    """Run ``n_sub`` physics substeps in place.

    Uses the compiled loop when it covers the case (no external torques, no
    strict-slack routes); otherwise the numpy reference kernel. Both paths
    implement the same update.
    """
    if (_fastpath.NUMBA_AVAILABLE and external_torques is None
            and not cm.route_strict.any()):
        _fastpath.run_substeps(cm, obj, q, dq, mp, op, ov, cmd, brake, dt, n_sub)
    else:
        for _ in range(n_sub):
            _kernel.step_batch(cm, obj, q, dq, mp, op, ov, cmd, brake, dt,
                               external_torques=external_torques)


def step(spec: MechanismSpec, obj: Optional[ObjectSpec], state: WorldState,
         cmd: Command, dt: float,
         external_torques: Optional[Sequence[float]] = None) -> WorldState:
    """Advance one world by one physics step of size ``dt``.

    Pure with respect to ``state``: a new WorldState is returned. The brake
    flags of the result are exactly the commanded configuration.
    """
    if not 0.0 < dt <= MAX_PHYSICS_DT:
        raise ValueError(f"dt must be in (0, {MAX_PHYSICS_DT}] s, got {dt}")
    _check_command(spec, cmd)
    cm = _kernel.compile_mechanism(spec)

    q = state.joint_angles[None, :].copy()
    dq = state.joint_velocities[None, :].copy()
    mp = state.motor_positions[None, :].copy()
    op = state.object_position[None, :].copy()
    ov = state.object_velocity[None, :].copy()
    ext = None if external_torques is None else np.asarray(external_torques, dtype=float)[None, :]

    _advance(cm, obj, q, dq, mp, op, ov,
             cmd.motor_commands[None, :], cmd.brake_engaged[None, :],
             dt, 1, external_torques=ext)

    if not _kernel.finite_rows(q, dq, op, ov)[0]:
        raise IntegrationFault(_fault_diag(q[0], state.sim_time + dt))

    return WorldState(
        joint_angles=q[0],
        joint_velocities=dq[0],
        brake_engaged=cmd.brake_engaged.copy(),
        motor_positions=mp[0],
        object_position=op[0],
        object_velocity=ov[0],
        sim_time=state.sim_time + dt,
    )


def rollout(spec: MechanismSpec, obj: Optional[ObjectSpec], state: WorldState,
            commands: Sequence[Command], dt: float, control_substeps: int,
            brake_latency: float = 0.0,
            external_torques: Optional[Sequence[float]] = None) -> Trajectory:
    """Hold each command for ``control_substeps`` physics steps.

    Records the state at every control tick boundary. A nonzero
    ``brake_latency`` keeps the previous brake configuration active for that
    long after each tick boundary before the newly commanded one applies.
    """
    if len(commands) == 0:
        raise ValueError("command sequence must be non-empty")
    if not 0.0 < dt <= MAX_PHYSICS_DT:
        raise ValueError(f"dt must be in (0, {MAX_PHYSICS_DT}] s, got {dt}")
    if control_substeps < 1:
        raise ValueError(f"control_substeps must be >= 1, got {control_substeps}")
    cm = _kernel.compile_mechanism(spec)
    for cmd in commands:
        _check_command(spec, cmd)

    latency_steps = min(int(np.ceil(brake_latency / dt)), control_substeps) if brake_latency > 0 else 0
    ext = None if external_torques is None else np.asarray(external_torques, dtype=float)[None, :]

    q = state.joint_angles[None, :].copy()
    dq = state.joint_velocities[None, :].copy()
    mp = state.motor_positions[None, :].copy()
    op = state.object_position[None, :].copy()
    ov = state.object_velocity[None, :].copy()
    prev_brake = state.brake_engaged.copy()
    t = state.sim_time

    states = [state.copy()]
    for cmd in commands:
        new_brake = cmd.brake_engaged[None, :]
        old_brake = prev_brake[None, :]
        motor_cmd = cmd.motor_commands[None, :]
        if latency_steps:
            _advance(cm, obj, q, dq, mp, op, ov, motor_cmd, old_brake, dt,
                     latency_steps, external_torques=ext)
        _advance(cm, obj, q, dq, mp, op, ov, motor_cmd, new_brake, dt,
                 control_substeps - latency_steps, external_torques=ext)
        t += dt * control_substeps
        if not _kernel.finite_rows(q, dq, op, ov)[0]:
            raise IntegrationFault(_fault_diag(q[0], t))
        prev_brake = cmd.brake_engaged.copy()
        states.append(WorldState(
            joint_angles=q[0].copy(),
            joint_velocities=dq[0].copy(),
            brake_engaged=prev_brake.copy(),
            motor_positions=mp[0].copy(),
            object_position=op[0].copy(),
            object_velocity=ov[0].copy(),
            sim_time=t,
        ))

    return Trajectory(states=states, commands=list(commands), dt=dt * control_substeps)


@dataclass
class BatchRollout:
    """Tick-boundary snapshots of a batch of worlds rolled out in lockstep.

    Index layout: ``joint_angles[k, b]`` is world b's configuration at tick k
    (k = 0 is the shared initial state, k = horizon is the final state).
    """

    joint_angles: np.ndarray  # (T+1, B, n)
    object_positions: np.ndarray  # (T+1, B, 2)
    final_motor_positions: np.ndarray  # (B, m)
    final_joint_velocities: np.ndarray  # (B, n)
    final_object_velocities: np.ndarray  # (B, 2)
    ok: np.ndarray  # (B,) worlds that stayed finite throughout
    dt: float  # control tick period


def rollout_batch(spec: MechanismSpec, obj: Optional[ObjectSpec], state: WorldState,
                  motor_sequences: np.ndarray, brake_configs: np.ndarray,
                  dt: float, control_substeps: int) -> BatchRollout:
    """Roll out B command sequences from one shared initial state.

    ``motor_sequences`` has shape (B, T, n_motors); ``brake_configs`` has
    shape (B, n_joints) and is held constant over each world's horizon.
    Worlds that go non-finite are frozen and flagged instead of raising.
    """
    cm = _kernel.compile_mechanism(spec)
    motor_sequences = np.asarray(motor_sequences, dtype=float)
    b, horizon, m = motor_sequences.shape
    if m != cm.n_motors:
        raise ValueError(f"expected {cm.n_motors} motors, got {m}")
    brake_configs = np.asarray(brake_configs, dtype=bool)
    if brake_configs.shape != (b, cm.n_joints):
        raise ValueError(f"brake_configs must have shape ({b}, {cm.n_joints})")

    q = np.tile(state.joint_angles, (b, 1))
    dq = np.tile(state.joint_velocities, (b, 1))
    mp = np.tile(state.motor_positions, (b, 1))
    op = np.tile(state.object_position, (b, 1))
    ov = np.tile(state.object_velocity, (b, 1))

    qs = np.empty((horizon + 1, b, cm.n_joints))
    ops = np.empty((horizon + 1, b, 2))
    qs[0] = q
    ops[0] = op
    ok = np.ones(b, dtype=bool)

    for k in range(horizon):
        cmd = np.ascontiguousarray(motor_sequences[:, k, :])
        _advance(cm, obj, q, dq, mp, op, ov, cmd, brake_configs, dt,
                 control_substeps)
        ok &= _kernel.finite_rows(q, dq, op, ov)
        bad = ~ok
        if bad.any():
            # Freeze faulted worlds at their last finite snapshot so the
            # remaining worlds can continue.
            q[bad] = qs[k][bad]
            dq[bad] = 0.0
            op[bad] = ops[k][bad]
            ov[bad] = 0.0
        qs[k + 1] = q
        ops[k + 1] = op

    return BatchRollout(
        joint_angles=qs,
        object_positions=ops,
        final_motor_positions=mp,
        final_joint_velocities=dq,
        final_object_velocities=ov,
        ok=ok,
        dt=dt * control_substeps,
    )
