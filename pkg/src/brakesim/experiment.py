"""Experiment orchestration and metrics.

Runs the brake-vs-no-brake in-hand manipulation study (arms x seeds, optional
process parallelism), chain waypoint sequences under the voting controller,
and the brake metric table. Metrics serialize to JSON with sorted keys and
repr floats, so identical inputs produce byte-identical files regardless of
the parallelism degree.

Timing convention: failed trials (timeout or stall) report the scenario
timeout as their time-to-goal and their termination-time error, so aggregates
and rank tests stay defined even when an arm never succeeds. The comparison
therefore includes failures; this differs from hardware practice of
aggregating successes only, and keeps the test well-defined when one arm has
no successes.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .brake import BrakeSpec, attractive_force, max_brake_force, max_brake_torque, power_draw
from .engine import DEFAULT_DRIVER_FREQUENCY, IntegrationParams
from .mppi import default_brake_configs, run_manipulation_trial
from .scenario import MppiConfig, Scenario, VotingConfig, initial_world_state
from .stats import mann_whitney_u
from .voting import TargetConfig, run_to_config

ARM_NAMES = ("brakes_on", "brakes_off")


@dataclass
class TrialRecord:
    seed: int
    success: bool
    time_to_goal_s: float
    final_error_mm: float
    config_switches: int
    stalled: bool
    trajectory_path: Optional[str]
    fault: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "success": self.success,
            "time_to_goal_s": self.time_to_goal_s,
            "final_error_mm": self.final_error_mm,
            "config_switches": self.config_switches,
            "stalled": self.stalled,
            "trajectory_path": self.trajectory_path,
            "fault": self.fault,
        }


def aggregate_records(records: Sequence[TrialRecord]) -> dict:
    """Summary statistics over one arm's trial records."""
    times = np.array([r.time_to_goal_s for r in records])
    errors = np.array([r.final_error_mm for r in records])
    return {
        "n_trials": len(records),
        "success_count": int(sum(r.success for r in records)),
        "mean_time_s": float(times.mean()),
        "std_time_s": float(times.std(ddof=0)),
        "median_time_s": float(np.median(times)),
        "mean_error_mm": float(errors.mean()),
        "std_error_mm": float(errors.std(ddof=0)),
        "median_error_mm": float(np.median(errors)),
    }


@dataclass
class ExperimentResult:
    scenario_name: str
    seeds: list[int]
    arms: dict[str, list[TrialRecord]]
    comparison: Optional[dict]

    def to_dict(self) -> dict:
        data: dict = {
            "scenario": self.scenario_name,
            "seeds": list(self.seeds),
            "driver_frequency_hz": DEFAULT_DRIVER_FREQUENCY,
            "arms": {
                arm: {
                    "records": [r.to_dict() for r in records],
                    "aggregate": aggregate_records(records),
                }
                for arm, records in self.arms.items()
            },
        }
        if self.comparison is not None:
            data["comparison"] = self.comparison
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _require_mppi(scenario: Scenario) -> MppiConfig:
    if not isinstance(scenario.controller, MppiConfig):
        raise ValueError(
            f"scenario {scenario.name!r} does not define an mppi controller")
    if scenario.object_spec is None:
        raise ValueError(f"scenario {scenario.name!r} has no object to manipulate")
    return scenario.controller


def run_hand_trial(scenario: Scenario, brakes_on: bool, seed: int,
                   out_dir: Optional[Union[str, Path]] = None,
                   arm_name: Optional[str] = None,
                   goal_x: Optional[float] = None) -> TrialRecord:
    """One manipulation trial; optionally writes its trajectory CSV."""
    config = _require_mppi(scenario)
    params = replace(config.params, seed=seed)
    goal = config.goal if goal_x is None else replace(config.goal, goal_x=goal_x)
    mech = scenario.mechanism
    if brakes_on:
        brake_configs = default_brake_configs(mech)
    else:
        brake_configs = np.zeros((1, len(mech.joints)), dtype=bool)
    plant = IntegrationParams(
        dt=scenario.integration.dt,
        control_substeps=round(params.control_period / scenario.integration.dt),
        brake_latency=scenario.integration.brake_latency)
    state = initial_world_state(scenario)
    result = run_manipulation_trial(
        mech, scenario.object_spec, goal, params, state,
        brake_configs=brake_configs, timeout=config.timeout, plant=plant,
        no_progress_window=config.no_progress_window,
        no_progress_min_improvement=config.no_progress_min_improvement)

    trajectory_path = None
    if out_dir is not None:
        arm = arm_name or ("brakes_on" if brakes_on else "brakes_off")
        rel = f"{arm}/seed_{seed:03d}.csv"
        target = Path(out_dir) / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        result.trajectory.write_csv(target)
        trajectory_path = rel

    return TrialRecord(
        seed=seed,
        success=result.success,
        time_to_goal_s=result.time_to_goal,
        final_error_mm=result.final_error * 1000.0,
        config_switches=result.config_switches,
        stalled=result.stalled,
        trajectory_path=trajectory_path,
        fault=result.fault,
    )


def _trial_task(args: tuple) -> tuple[str, TrialRecord]:
    scenario, arm, seed, out_dir, goal_x = args
    record = run_hand_trial(scenario, brakes_on=(arm == "brakes_on"), seed=seed,
                            out_dir=out_dir, arm_name=arm, goal_x=goal_x)
    return arm, record


def run_experiment(scenario: Scenario, arms: Sequence[str], seeds: Sequence[int],
                   out_dir: Optional[Union[str, Path]] = None, threads: int = 1,
                   goal_x: Optional[float] = None) -> ExperimentResult:
    """Run every (arm, seed) trial and compare arms with the rank test.

    Results are a pure function of (scenario, arms, seeds): trials are
    independent, so the parallelism degree changes nothing but wall time.
    """
    if len(seeds) == 0:
        raise ValueError("at least one seed is required")
    for arm in arms:
        if arm not in ARM_NAMES:
            raise ValueError(f"unknown arm {arm!r}; expected one of {ARM_NAMES}")
    _require_mppi(scenario)

    tasks = [(scenario, arm, seed, None if out_dir is None else str(out_dir), goal_x)
             for arm in arms for seed in seeds]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_trial_task, tasks))
    else:
        outcomes = [_trial_task(t) for t in tasks]

    results: dict[str, list[TrialRecord]] = {arm: [] for arm in arms}
    for arm, record in outcomes:
        results[arm].append(record)
    for arm in results:
        results[arm].sort(key=lambda r: r.seed)

    comparison = None
    if "brakes_on" in results and "brakes_off" in results:
        on, off = results["brakes_on"], results["brakes_off"]
        u_time, p_time = mann_whitney_u([r.time_to_goal_s for r in on],
                                        [r.time_to_goal_s for r in off])
        u_err, p_err = mann_whitney_u([r.final_error_mm for r in on],
                                      [r.final_error_mm for r in off])
        comparison = {
            "time_to_goal": {"u_statistic": u_time, "p_value": p_time},
            "final_error": {"u_statistic": u_err, "p_value": p_err},
        }

    result = ExperimentResult(
        scenario_name=scenario.name,
        seeds=list(seeds),
        arms=results,
        comparison=comparison,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(result.to_json())
    return result


def load_waypoints(path: Union[str, Path], n_joints: int) -> list[np.ndarray]:
    """Waypoint configurations in degrees, one list of joint angles per entry."""
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, list) or not data:
        raise ValueError(f"{path}: expected a non-empty list of waypoint configurations")
    waypoints = []
    for i, row in enumerate(data):
        if not isinstance(row, list) or len(row) != n_joints:
            raise ValueError(f"{path}: waypoint {i} must list {n_joints} angles in degrees")
        waypoints.append(np.deg2rad(np.asarray(row, dtype=float)))
    return waypoints


def run_chain_waypoints(scenario: Scenario, waypoints: Sequence[np.ndarray],
                        out_dir: Optional[Union[str, Path]] = None) -> dict:
    """Drive the voting controller through a waypoint sequence.

    Returns the summary dict (also written to ``summary.json``); per-waypoint
    trajectories go to ``waypoint_XX.csv``. Wall-clock fields describe the
    run machine and are excluded from determinism guarantees.
    """
    if not isinstance(scenario.controller, VotingConfig):
        raise ValueError(f"scenario {scenario.name!r} does not define a voting controller")
    config = scenario.controller
    state = initial_world_state(scenario)
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

    entries = []
    total_sim = 0.0
    for i, target_angles in enumerate(waypoints):
        target = TargetConfig(target_angles=target_angles, tolerance=config.tolerance)
        started = time.perf_counter()
        run = run_to_config(scenario.mechanism, state, target,
                            timeout=config.timeout, obj=scenario.object_spec,
                            motor_speed=config.motor_speed,
                            control_period=config.control_period,
                            integration=scenario.integration)
        wall = time.perf_counter() - started
        state = run.final_state
        errors_deg = np.rad2deg(np.abs(target_angles - state.joint_angles))
        sim_elapsed = run.trajectory.states[-1].sim_time - run.trajectory.states[0].sim_time
        total_sim += sim_elapsed
        entry = {
            "waypoint": i,
            "converged": run.converged,
            "per_joint_error_deg": [float(e) for e in errors_deg],
            "max_error_deg": float(errors_deg.max()),
            "phases_used": run.phases_used,
            "direction_changes": run.direction_changes,
            "sim_time_s": float(sim_elapsed),
            "wall_time_s": wall,
        }
        if out is not None:
            rel = f"waypoint_{i:02d}.csv"
            run.trajectory.write_csv(out / rel)
            entry["trajectory_path"] = rel
        entries.append(entry)

    summary = {
        "scenario": scenario.name,
        "n_waypoints": len(entries),
        "all_converged": all(e["converged"] for e in entries),
        "total_sim_time_s": total_sim,
        "driver_frequency_hz": DEFAULT_DRIVER_FREQUENCY,
        "waypoints": entries,
    }
    if out is not None:
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


BRAKE_TABLE_HEADER = "num_stacks,attractive_force_N,holding_force_N,holding_torque_Nm,power_W"


def emit_brake_table(base_spec: BrakeSpec, max_stacks: int) -> str:
    """CSV of brake metrics for stack counts 1..max_stacks."""
    if max_stacks < 1:
        raise ValueError(f"max_stacks must be >= 1, got {max_stacks}")
    lines = [BRAKE_TABLE_HEADER]
    for n in range(1, max_stacks + 1):
        spec = replace(base_spec, num_stacks=n)
        lines.append(",".join([
            str(n),
            "%.9g" % attractive_force(spec),
            "%.9g" % max_brake_force(spec),
            "%.9g" % max_brake_torque(spec),
            "%.9g" % power_draw(spec),
        ]))
    return "\n".join(lines) + "\n"
