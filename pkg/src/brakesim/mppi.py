"""Sampling-based model-predictive controller over a hybrid action space.

Motor targets are continuous; the brake configuration is one of a small
enumerated set (for the two-finger hand: exactly one brake per finger off,
nine configurations). Cost-weighted averaging only makes sense for the
continuous part, so each sampled action sequence holds one brake
configuration for its whole horizon, the averages are computed per
configuration, and the discrete choice switches only when another
configuration's averaged plan is cheaper by a hysteresis margin.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernel
from .engine import (BatchRollout, Command, IntegrationFault, IntegrationParams,
                     Trajectory, rollout, rollout_batch)
from .mechanism import MechanismSpec, ObjectSpec, WorldState, fingertip_contacts


@dataclass(frozen=True)
class MppiParams:
    """Controller hyperparameters.

    ``num_rollouts`` counts sampled trajectories per control step and must be
    divisible by the number of brake configurations. ``model_dt`` is the
    physics step used inside predictive rollouts; the plant may integrate
    finer.
    """

    num_rollouts: int = 297
    horizon: int = 10  # control ticks
    temperature: float = 0.1
    contact_weight: float = 0.1  # per fingertip out of contact, per state
    distance_weight: float = 200.0  # per meter of terminal goal error
    switch_threshold: float = 0.25  # fractional cost drop required to switch config
    noise_std: float = 0.05  # rad, per motor per step
    control_rate: float = 5.0  # Hz
    contact_threshold: float = 0.004  # m
    seed: int = 0
    model_dt: float = 0.005  # s

    def __post_init__(self) -> None:
        if self.num_rollouts < 1:
            raise ValueError(f"num_rollouts must be >= 1, got {self.num_rollouts}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.switch_threshold < 0:
            raise ValueError(f"switch_threshold must be >= 0, got {self.switch_threshold}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if not self.control_rate > 0:
            raise ValueError(f"control_rate must be > 0, got {self.control_rate}")
        if not self.contact_threshold >= 0:
            raise ValueError(f"contact_threshold must be >= 0, got {self.contact_threshold}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if not 0 < self.model_dt <= 0.005:
            raise ValueError(f"model_dt must be in (0, 0.005] s, got {self.model_dt}")

    @property
    def control_period(self) -> float:
        return 1.0 / self.control_rate

    @property
    def model_substeps(self) -> int:
        return max(1, round(self.control_period / self.model_dt))


@dataclass(frozen=True)
class GoalSpec:
    """Horizontal object goal and the success tolerance on |x - goal_x|."""

    goal_x: float  # m
    success_tolerance: float = 0.001  # m

    def __post_init__(self) -> None:
        if not self.success_tolerance > 0:
            raise ValueError(f"success_tolerance must be > 0, got {self.success_tolerance}")


@dataclass(frozen=True)
class HybridAction:
    """Commanded motor targets plus one discrete brake configuration index."""

    motor_targets: np.ndarray  # (m,) rad
    brake_config: int


@dataclass
class MppiPlan:
    """Warm-start state carried between control steps: one averaged motor
    sequence per brake configuration."""

    sequences: np.ndarray  # (C, T, m)
    previous_config: Optional[int]
    step_index: int = 0


@dataclass(frozen=True)
class MppiDiagnostics:
    config_costs: np.ndarray  # (C,) cost of each configuration's averaged plan
    chosen_config: int
    sample_cost_min: float
    sample_cost_mean: float
    faulted_samples: int


def enumerate_brake_configs(finger_joint_groups: Sequence[Sequence[int]],
                            n_joints: int) -> np.ndarray:
    """All configurations with exactly one joint per finger unbraked.

    Ordering is lexicographic: the first finger's unbraked joint varies
    slowest, scanning each finger's joints in index order. Joints outside
    every group are left unbraked.
    """
    groups = [tuple(g) for g in finger_joint_groups]
    if any(len(g) == 0 for g in groups):
        raise ValueError("every finger must contain at least one joint")
    grouped = [j for g in groups for j in g]
    configs = []
    for free in itertools.product(*groups):
        row = np.zeros(n_joints, dtype=bool)
        row[grouped] = True
        row[list(free)] = False
        configs.append(row)
    return np.array(configs)


def default_brake_configs(spec: MechanismSpec) -> np.ndarray:
    """Finger-enumerated configurations, or all-off for fingerless mechanisms."""
    if spec.fingers is not None:
        groups = [f.joints for f in spec.fingers]
        return enumerate_brake_configs(groups, len(spec.joints))
    return np.zeros((1, len(spec.joints)), dtype=bool)


def trajectory_cost(traj: Trajectory, goal: GoalSpec, params: MppiParams,
                    spec: MechanismSpec, obj: ObjectSpec) -> float:
    """Cost of one horizon-length trajectory.

    Sums the number of fingertips out of contact over all horizon + 1 states
    (the initial state included) weighted by ``contact_weight``, plus the
    terminal horizontal goal error weighted by ``distance_weight``.
    """
    if len(traj.states) != params.horizon + 1:
        raise ValueError(
            f"expected {params.horizon + 1} states, got {len(traj.states)}")
    missing = 0
    for s in traj.states:
        contacts = fingertip_contacts(spec, s, obj, params.contact_threshold)
        missing += int(np.sum(~contacts))
    terminal = abs(goal.goal_x - traj.states[-1].object_position[0])
    return params.contact_weight * missing + params.distance_weight * terminal


def _batch_costs(rollouts: BatchRollout, goal: GoalSpec, params: MppiParams,
                 cm: "_kernel.CompiledMechanism", obj: ObjectSpec) -> np.ndarray:
    """Vectorized trajectory_cost over a BatchRollout; faulted worlds get inf."""
    n_ticks, b, _ = rollouts.joint_angles.shape
    missing = np.zeros(b)
    for k in range(n_ticks):
        _, _, ends = _kernel.fk_batch(cm, rollouts.joint_angles[k])
        tips = ends[:, cm.fingertip_links, :]
        rel = tips - rollouts.object_positions[k][:, None, :]
        dist = np.sqrt(rel[..., 0]**2 + rel[..., 1]**2)
        surface = dist - obj.radius - cm.fingertip_radius
        missing += np.sum(surface > params.contact_threshold, axis=1)
    terminal = np.abs(goal.goal_x - rollouts.object_positions[-1][:, 0])
    costs = params.contact_weight * missing + params.distance_weight * terminal
    return np.where(rollouts.ok, costs, np.inf)


def weighted_average(sequences: np.ndarray, costs: Sequence[float],
                     temperature: float) -> np.ndarray:
    """Softmin-weighted average of action sequences.

    Weights are exp(-(cost - min cost) / temperature), normalized to sum to
    one, which makes the result invariant to adding a constant to every cost.
    Sequences with infinite cost get zero weight.
    """
    seqs = np.asarray(sequences, dtype=float)
    if seqs.shape[0] == 0:
        raise ValueError("cannot average an empty sequence list")
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (seqs.shape[0],):
        raise ValueError("need exactly one cost per sequence")
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    finite = np.isfinite(costs)
    if not finite.any():
        raise ValueError("all sequence costs are infinite")
    best = costs[finite].min()
    weights = np.where(finite, np.exp(-(costs - best) / temperature), 0.0)
    weights /= weights.sum()
    return np.tensordot(weights, seqs, axes=(0, 0))


def select_config(per_config_costs: Sequence[float], previous_config: Optional[int],
                  switch_threshold: float) -> int:
    """Hysteresis rule for the discrete brake configuration.

    On the first step picks the global argmin. Afterwards, switches to the
    argmin only when its cost is below (1 - threshold) times the previous
    configuration's cost; ties break toward the lowest index.
    """
    costs = np.asarray(per_config_costs, dtype=float)
    best = int(np.argmin(costs))
    if previous_config is None:
        return best
    if not 0 <= previous_config < len(costs):
        raise ValueError(f"previous_config {previous_config} out of range")
    if costs[best] < (1.0 - switch_threshold) * costs[previous_config]:
        return best
    return previous_config


def init_plan(state: WorldState, n_configs: int, params: MppiParams,
              n_motors: int) -> MppiPlan:
    """Hold-current-position plan for every configuration."""
    seq = np.tile(state.motor_positions, (n_configs, params.horizon, 1))
    return MppiPlan(sequences=seq, previous_config=None, step_index=0)


def _sample_noise(params: MppiParams, config_index: int, sample_index: int,
                  step_index: int, shape: tuple[int, int]) -> np.ndarray:
    """Per-sample noise stream; the seed derivation makes every sample's
    stream independent of execution order and batch layout."""
    ss = np.random.SeedSequence((params.seed, step_index, config_index, sample_index))
    return np.random.default_rng(ss).normal(0.0, params.noise_std, shape)


def mppi_step(spec: MechanismSpec, obj: ObjectSpec, goal: GoalSpec,
              params: MppiParams, state: WorldState, plan: Optional[MppiPlan],
              brake_configs: Optional[np.ndarray] = None,
              ) -> tuple[HybridAction, MppiDiagnostics, MppiPlan]:
    """One control step of the hybrid controller.

    Per configuration: shift that configuration's previous averaged plan one
    step, sample ``num_rollouts / n_configs`` noisy variants, roll each out
    with the configuration's brakes held constant, and softmin-average them.
    Each configuration's averaged sequence is then re-simulated once to score
    it, the hysteresis rule picks the configuration, and the first action of
    its averaged sequence is emitted.
    """
    cm = _kernel.compile_mechanism(spec)
    if brake_configs is None:
        brake_configs = default_brake_configs(spec)
    n_configs, n_joints = brake_configs.shape
    if n_joints != cm.n_joints:
        raise ValueError(f"brake configs must have {cm.n_joints} columns")
    if params.num_rollouts % n_configs != 0:
        raise ValueError(
            f"num_rollouts ({params.num_rollouts}) must be divisible by the "
            f"number of brake configurations ({n_configs})")
    samples_per_config = params.num_rollouts // n_configs
    n_motors = cm.n_motors

    if plan is None:
        plan = init_plan(state, n_configs, params, n_motors)
    shifted = np.concatenate([plan.sequences[:, 1:], plan.sequences[:, -1:]], axis=1)

    sequences = np.empty((params.num_rollouts, params.horizon, n_motors))
    for c in range(n_configs):
        base = shifted[c]
        for k in range(samples_per_config):
            noise = _sample_noise(params, c, k, plan.step_index,
                                  (params.horizon, n_motors))
            sequences[c * samples_per_config + k] = base + noise
    np.clip(sequences, cm.pos_lo, cm.pos_hi, out=sequences)

    sample_brakes = np.repeat(brake_configs, samples_per_config, axis=0)
    sample_rollouts = rollout_batch(spec, obj, state, sequences, sample_brakes,
                                    params.model_dt, params.model_substeps)
    sample_costs = _batch_costs(sample_rollouts, goal, params, cm, obj)

    averaged = shifted.copy()
    has_samples = np.zeros(n_configs, dtype=bool)
    for c in range(n_configs):
        block = slice(c * samples_per_config, (c + 1) * samples_per_config)
        if np.isfinite(sample_costs[block]).any():
            averaged[c] = weighted_average(sequences[block], sample_costs[block],
                                           params.temperature)
            has_samples[c] = True

    plan_rollouts = rollout_batch(spec, obj, state, averaged, brake_configs,
                                  params.model_dt, params.model_substeps)
    config_costs = _batch_costs(plan_rollouts, goal, params, cm, obj)
    config_costs = np.where(has_samples, config_costs, np.inf)

    chosen = select_config(config_costs, plan.previous_config, params.switch_threshold)
    action = HybridAction(motor_targets=averaged[chosen, 0].copy(), brake_config=chosen)
    new_plan = MppiPlan(sequences=averaged, previous_config=chosen,
                        step_index=plan.step_index + 1)
    finite = np.isfinite(sample_costs)
    diagnostics = MppiDiagnostics(
        config_costs=config_costs,
        chosen_config=chosen,
        sample_cost_min=float(sample_costs[finite].min()) if finite.any() else math.inf,
        sample_cost_mean=float(sample_costs[finite].mean()) if finite.any() else math.inf,
        faulted_samples=int(np.sum(~finite)),
    )
    return action, diagnostics, new_plan


@dataclass
class TrialResult:
    """Outcome of one closed-loop manipulation trial."""

    success: bool
    time_to_goal: float  # s, the timeout value for failed trials
    final_error: float  # m, |goal_x - object x| at termination
    config_switches: int
    ticks: int
    trajectory: Trajectory
    stalled: bool  # terminated early by the no-progress rule
    fault: Optional[str] = None  # integration fault diagnostic, if any


def run_manipulation_trial(spec: MechanismSpec, obj: ObjectSpec, goal: GoalSpec,
                           params: MppiParams, state: WorldState,
                           brake_configs: Optional[np.ndarray] = None,
                           timeout: float = 180.0,
                           plant: Optional[IntegrationParams] = None,
                           no_progress_window: float = 60.0,
                           no_progress_min_improvement: float = 0.001,
                           ) -> TrialResult:
    """Closed loop: plan with the predictive model, execute on the plant.

    Terminates with success when the horizontal goal error drops below the
    goal's tolerance, with failure at ``timeout`` or when the best error so
    far has improved by less than ``no_progress_min_improvement`` over the
    last ``no_progress_window`` seconds. Failed trials report the timeout as
    their time-to-goal so aggregate timings stay comparable. A plant-side
    integration fault ends the trial as a failure with the diagnostic
    recorded; metrics come from the last valid state.
    """
    if plant is None:
        plant = IntegrationParams(dt=0.001,
                                  control_substeps=round(params.control_period / 0.001))
    if brake_configs is None:
        brake_configs = default_brake_configs(spec)

    current = state.copy()
    plan: Optional[MppiPlan] = None
    states = [current.copy()]
    commands: list[Command] = []
    switches = 0
    previous_choice: Optional[int] = None
    start = current.sim_time

    def error_of(s: WorldState) -> float:
        return abs(goal.goal_x - s.object_position[0])

    best_error_history: list[tuple[float, float]] = [(0.0, error_of(current))]
    success = False
    stalled = False
    fault: Optional[str] = None

    while current.sim_time - start < timeout - 0.5 * plant.control_period:
        action, _diag, plan = mppi_step(spec, obj, goal, params, current, plan,
                                        brake_configs=brake_configs)
        if previous_choice is not None and action.brake_config != previous_choice:
            switches += 1
        previous_choice = action.brake_config

        cmd = Command(motor_commands=action.motor_targets,
                      brake_engaged=brake_configs[action.brake_config])
        try:
            tick = rollout(spec, obj, current, [cmd], plant.dt,
                           plant.control_substeps,
                           brake_latency=plant.brake_latency)
        except IntegrationFault as exc:
            fault = str(exc)
            break
        current = tick.states[-1]
        states.append(current.copy())
        commands.append(cmd)

        elapsed = current.sim_time - start
        err = error_of(current)
        best = min(best_error_history[-1][1], err)
        best_error_history.append((elapsed, best))
        if err < goal.success_tolerance:
            success = True
            break
        if elapsed >= no_progress_window:
            cutoff = elapsed - no_progress_window
            past_best = next(b for t, b in reversed(best_error_history) if t <= cutoff)
            if past_best - best < no_progress_min_improvement:
                stalled = True
                break

    elapsed = current.sim_time - start
    trajectory = Trajectory(states=states, commands=commands, dt=plant.control_period)
    return TrialResult(
        success=success,
        time_to_goal=elapsed if success else timeout,
        final_error=error_of(current),
        config_switches=switches,
        ticks=len(commands),
        trajectory=trajectory,
        stalled=stalled,
        fault=fault,
    )
