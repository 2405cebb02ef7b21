"""Scenario configuration files.

A scenario is a JSON document that fully determines an experiment: the
mechanism, the brake electrical parameters, the optional manipulated object,
the controller and its parameters, and the integrator settings. The loader is
strict: unknown keys anywhere in the tree are rejected, every error carries
the dotted path of the offending key, and JSON syntax errors keep their
line/column from the parser.

Angles are radians throughout (only the separate chain waypoint files use
degrees). Two canonical scenarios ship with the package: ``chain10`` (ten
joints, one velocity motor, antagonistic tendon pair) and ``hand2x3`` (two
fingers of three joints, two position motors, extension springs, object).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .brake import BrakeSpec
from .engine import IntegrationParams
from .mechanism import (FingerSpec, JointSpec, MechanismSpec, MotorSpec,
                        ObjectSpec, SpringSpec, TendonRoute, WallSpec,
                        WorldState, make_state)
from .mppi import GoalSpec, MppiParams

# Joint limits beyond this magnitude require allow_wide_limits in the file.
CONVENTIONAL_LIMIT = math.radians(60.0)


class ScenarioError(ValueError):
    """Scenario file failed to parse or validate."""


@dataclass(frozen=True)
class VotingConfig:
    """Controller block for configuration-reaching runs."""

    motor_speed: float = 0.2  # rad/s
    tolerance: float = math.radians(1.0)  # rad
    control_period: float = 0.01  # s
    timeout: float = 120.0  # s per waypoint


@dataclass(frozen=True)
class MppiConfig:
    """Controller block for the in-hand manipulation task."""

    params: MppiParams
    goal: GoalSpec
    timeout: float = 180.0  # s
    no_progress_window: float = 60.0  # s
    no_progress_min_improvement: float = 0.001  # m


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    seed: int
    allow_wide_limits: bool
    brake_default: BrakeSpec
    mechanism: MechanismSpec
    object_spec: Optional[ObjectSpec]
    object_start: Optional[tuple[float, float]]
    controller: Union[VotingConfig, MppiConfig]
    integration: IntegrationParams
    initial_joint_angles: tuple[float, ...]
    initial_motor_positions: Optional[tuple[float, ...]]


class _Node:
    """Strict dict reader that tracks its path and rejects leftovers."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise ScenarioError(f"{path}: expected an object, got {type(data).__name__}")
        self.data = dict(data)
        self.path = path

    def child(self, key: str) -> "_Node":
        return _Node(self.take(key), f"{self.path}.{key}")

    def take(self, key: str, default: Any = ...) -> Any:
        if key in self.data:
            return self.data.pop(key)
        if default is ...:
            raise ScenarioError(f"{self.path}.{key}: required key is missing")
        return default

    def take_number(self, key: str, default: Any = ...) -> float:
        value = self.take(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"{self.path}.{key}: expected a number, got {value!r}")
        return float(value)

    def take_int(self, key: str, default: Any = ...) -> int:
        value = self.take(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"{self.path}.{key}: expected an integer, got {value!r}")
        return value

    def take_bool(self, key: str, default: Any = ...) -> bool:
        value = self.take(key, default)
        if not isinstance(value, bool):
            raise ScenarioError(f"{self.path}.{key}: expected a boolean, got {value!r}")
        return value

    def take_str(self, key: str, default: Any = ...) -> str:
        value = self.take(key, default)
        if not isinstance(value, str):
            raise ScenarioError(f"{self.path}.{key}: expected a string, got {value!r}")
        return value

    def take_numbers(self, key: str, length: Optional[int] = None,
                     default: Any = ...) -> Optional[tuple[float, ...]]:
        value = self.take(key, default)
        if value is None:
            return None
        if not isinstance(value, list) or any(
                isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise ScenarioError(f"{self.path}.{key}: expected a list of numbers, got {value!r}")
        if length is not None and len(value) != length:
            raise ScenarioError(
                f"{self.path}.{key}: expected {length} numbers, got {len(value)}")
        return tuple(float(v) for v in value)

    def take_list(self, key: str, default: Any = ...) -> list:
        value = self.take(key, default)
        if not isinstance(value, list):
            raise ScenarioError(f"{self.path}.{key}: expected a list, got {value!r}")
        return value

    def finish(self) -> None:
        if self.data:
            keys = ", ".join(sorted(self.data))
            raise ScenarioError(f"{self.path}: unknown keys: {keys}")


def _wrap(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _read_brake(node: _Node) -> BrakeSpec:
    spec = _wrap(node.path, BrakeSpec,
                 voltage=node.take_number("voltage"),
                 relative_permittivity=node.take_number("relative_permittivity"),
                 dielectric_thickness=node.take_number("dielectric_thickness"),
                 overlap_area=node.take_number("overlap_area"),
                 friction_coefficient=node.take_number("friction_coefficient"),
                 pinion_pitch_diameter=node.take_number("pinion_pitch_diameter"),
                 num_stacks=node.take_int("num_stacks", 1),
                 interfaces_per_stack=node.take_int("interfaces_per_stack", 2))
    node.finish()
    return spec


def _read_joint(node: _Node, default_brake: BrakeSpec, allow_wide: bool) -> JointSpec:
    limits = node.take_numbers("limits", 2)
    if not allow_wide and (limits[0] < -CONVENTIONAL_LIMIT - 1e-12
                           or limits[1] > CONVENTIONAL_LIMIT + 1e-12):
        raise ScenarioError(
            f"{node.path}.limits: {limits} exceeds the +/-60 degree convention; "
            f"set allow_wide_limits to true to override")
    spring_raw = node.take("extension_spring", None)
    spring = None
    if spring_raw is not None:
        spring_node = _Node(spring_raw, f"{node.path}.extension_spring")
        spring = _wrap(spring_node.path, SpringSpec,
                       stiffness=spring_node.take_number("stiffness"),
                       rest_angle=spring_node.take_number("rest_angle"))
        spring_node.finish()
    brake_raw = node.take("brake", None)
    brake = default_brake if brake_raw is None else _read_brake(
        _Node(brake_raw, f"{node.path}.brake"))
    joint = _wrap(node.path, JointSpec,
                  limits=limits,
                  moment_arm=node.take_number("moment_arm"),
                  rotational_inertia=node.take_number("rotational_inertia"),
                  viscous_damping=node.take_number("viscous_damping"),
                  link_length=node.take_number("link_length"),
                  link_radius=node.take_number("link_radius"),
                  brake=brake,
                  extension_spring=spring)
    node.finish()
    return joint


def _read_tendon(node: _Node) -> TendonRoute:
    joints = node.take_list("joints")
    signs = node.take_list("routing_signs")
    route = _wrap(node.path, TendonRoute,
                  motor=node.take_int("motor"),
                  joints=tuple(int(j) for j in joints),
                  routing_signs=tuple(int(s) for s in signs),
                  stiffness=node.take_number("stiffness"),
                  slack_allowed=node.take_bool("slack_allowed", True),
                  tension_limit=node.take_number("tension_limit", 50.0),
                  spool_sign=node.take_int("spool_sign", 1))
    node.finish()
    return route


def _read_motor(node: _Node) -> MotorSpec:
    motor = _wrap(node.path, MotorSpec,
                  control_mode=node.take_str("control_mode"),
                  spool_radius=node.take_number("spool_radius"),
                  max_speed=node.take_number("max_speed"),
                  position_gain=node.take_number("position_gain", 40.0),
                  position_limits=node.take_numbers("position_limits", 2,
                                                    (-math.pi, math.pi)))
    node.finish()
    return motor


def _read_finger(node: _Node) -> FingerSpec:
    finger = _wrap(node.path, FingerSpec,
                   joints=tuple(int(j) for j in node.take_list("joints")),
                   base_offset=node.take_numbers("base_offset", 3, (0.0, 0.0, 0.0)))
    node.finish()
    return finger


def _read_mechanism(node: _Node, default_brake: BrakeSpec,
                    allow_wide: bool) -> tuple[MechanismSpec, tuple[float, ...],
                                               Optional[tuple[float, ...]]]:
    joints = tuple(_read_joint(_Node(j, f"{node.path}.joints[{i}]"), default_brake,
                               allow_wide)
                   for i, j in enumerate(node.take_list("joints")))
    tendons = tuple(_read_tendon(_Node(t, f"{node.path}.tendons[{i}]"))
                    for i, t in enumerate(node.take_list("tendons")))
    motors = tuple(_read_motor(_Node(m, f"{node.path}.motors[{i}]"))
                   for i, m in enumerate(node.take_list("motors")))
    fingers_raw = node.take("fingers", None)
    fingers = None
    if fingers_raw is not None:
        if not isinstance(fingers_raw, list):
            raise ScenarioError(f"{node.path}.fingers: expected a list or null")
        fingers = tuple(_read_finger(_Node(f, f"{node.path}.fingers[{i}]"))
                        for i, f in enumerate(fingers_raw))
    walls = []
    for i, w in enumerate(node.take_list("walls", [])):
        wnode = _Node(w, f"{node.path}.walls[{i}]")
        walls.append(_wrap(wnode.path, WallSpec,
                           start=wnode.take_numbers("start", 2),
                           end=wnode.take_numbers("end", 2),
                           radius=wnode.take_number("radius")))
        wnode.finish()
    base_pose = node.take_numbers("base_pose", 3, (0.0, 0.0, 0.0))
    limit_stiffness = node.take_number("limit_stiffness", 50.0)
    initial_q = node.take_numbers("initial_joint_angles", len(joints),
                                  tuple(0.0 for _ in joints))
    initial_mp = node.take_numbers("initial_motor_positions", len(motors), None)
    spec = _wrap(node.path, MechanismSpec,
                 base_pose=base_pose, joints=joints, tendons=tendons,
                 motors=motors, fingers=fingers, walls=tuple(walls),
                 limit_stiffness=limit_stiffness)
    node.finish()
    return spec, initial_q, initial_mp


def _read_object(node: _Node) -> tuple[ObjectSpec, tuple[float, float]]:
    start = node.take_numbers("initial_position", 2)
    spec = _wrap(node.path, ObjectSpec,
                 radius=node.take_number("radius"),
                 mass=node.take_number("mass"),
                 table_friction_viscous=node.take_number("table_friction_viscous"),
                 table_friction_coulomb=node.take_number("table_friction_coulomb"),
                 contact_stiffness=node.take_number("contact_stiffness"),
                 contact_damping=node.take_number("contact_damping"),
                 surface_friction=node.take_number("surface_friction"))
    node.finish()
    return spec, (start[0], start[1])


def _read_controller(node: _Node, seed: int) -> Union[VotingConfig, MppiConfig]:
    kind = node.take_str("type")
    if kind == "voting":
        config = VotingConfig(
            motor_speed=node.take_number("motor_speed", 0.2),
            tolerance=node.take_number("tolerance", math.radians(1.0)),
            control_period=node.take_number("control_period", 0.01),
            timeout=node.take_number("timeout", 120.0))
        node.finish()
        return config
    if kind == "mppi":
        params = _wrap(node.path, MppiParams,
                       num_rollouts=node.take_int("num_rollouts", 297),
                       horizon=node.take_int("horizon", 10),
                       temperature=node.take_number("temperature", 0.1),
                       contact_weight=node.take_number("contact_weight", 0.1),
                       distance_weight=node.take_number("distance_weight", 200.0),
                       switch_threshold=node.take_number("switch_threshold", 0.25),
                       noise_std=node.take_number("noise_std", 0.05),
                       control_rate=node.take_number("control_rate", 5.0),
                       contact_threshold=node.take_number("contact_threshold", 0.004),
                       model_dt=node.take_number("model_dt", 0.005),
                       seed=seed)
        goal = _wrap(node.path, GoalSpec,
                     goal_x=node.take_number("goal_x"),
                     success_tolerance=node.take_number("success_tolerance", 0.001))
        config = MppiConfig(
            params=params, goal=goal,
            timeout=node.take_number("timeout", 180.0),
            no_progress_window=node.take_number("no_progress_window", 60.0),
            no_progress_min_improvement=node.take_number(
                "no_progress_min_improvement", 0.001))
        node.finish()
        return config
    raise ScenarioError(f"{node.path}.type: unknown controller type {kind!r}")


def scenario_from_dict(data: dict, origin: str = "scenario") -> Scenario:
    root = _Node(data, origin)
    name = root.take_str("name")
    description = root.take_str("description", "")
    seed = root.take_int("seed", 0)
    allow_wide = root.take_bool("allow_wide_limits", False)
    brake_default = _read_brake(root.child("brake_defaults"))
    mechanism, initial_q, initial_mp = _read_mechanism(
        root.child("mechanism"), brake_default, allow_wide)

    object_raw = root.take("object", None)
    object_spec, object_start = (None, None)
    if object_raw is not None:
        object_spec, object_start = _read_object(_Node(object_raw, f"{origin}.object"))

    controller = _read_controller(root.child("controller"), seed)

    integration_raw = root.take("integration", None)
    if integration_raw is None:
        integration = IntegrationParams()
    else:
        inode = _Node(integration_raw, f"{origin}.integration")
        integration = _wrap(inode.path, IntegrationParams,
                            dt=inode.take_number("dt", 0.001),
                            control_substeps=inode.take_int("control_substeps", 200),
                            brake_latency=inode.take_number("brake_latency", 0.0))
        inode.finish()

    root.finish()

    period = (controller.control_period if isinstance(controller, VotingConfig)
              else controller.params.control_period)
    if abs(integration.dt * integration.control_substeps - period) > 1e-9:
        raise ScenarioError(
            f"{origin}.integration: dt * control_substeps = "
            f"{integration.dt * integration.control_substeps} does not match the "
            f"controller period {period}")

    lo = np.array([j.limits[0] for j in mechanism.joints])
    hi = np.array([j.limits[1] for j in mechanism.joints])
    q0 = np.asarray(initial_q)
    if np.any(q0 < lo) or np.any(q0 > hi):
        raise ScenarioError(f"{origin}.mechanism.initial_joint_angles: outside joint limits")

    return Scenario(
        name=name, description=description, seed=seed,
        allow_wide_limits=allow_wide, brake_default=brake_default,
        mechanism=mechanism, object_spec=object_spec, object_start=object_start,
        controller=controller, integration=integration,
        initial_joint_angles=initial_q, initial_motor_positions=initial_mp)


def packaged_scenario_path(name: str) -> Path:
    return Path(str(resources.files("brakesim") / "scenarios" / f"{name}.json"))


def load_scenario(path_or_name: Union[str, Path]) -> Scenario:
    """Load a scenario from a JSON file or by shipped-scenario name."""
    path = Path(path_or_name)
    if not path.exists() and path.suffix == "" and path.name == str(path_or_name):
        packaged = packaged_scenario_path(path.name)
        if packaged.exists():
            path = packaged
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path_or_name}")
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    return scenario_from_dict(data, origin=str(path))


def _brake_to_dict(spec: BrakeSpec) -> dict:
    return {
        "voltage": spec.voltage,
        "relative_permittivity": spec.relative_permittivity,
        "dielectric_thickness": spec.dielectric_thickness,
        "overlap_area": spec.overlap_area,
        "friction_coefficient": spec.friction_coefficient,
        "pinion_pitch_diameter": spec.pinion_pitch_diameter,
        "num_stacks": spec.num_stacks,
        "interfaces_per_stack": spec.interfaces_per_stack,
    }


def scenario_to_dict(scenario: Scenario) -> dict:
    """Inverse of the loader: the result parses back to an equal Scenario."""
    mech = scenario.mechanism
    joints = []
    for joint in mech.joints:
        entry: dict[str, Any] = {
            "limits": list(joint.limits),
            "moment_arm": joint.moment_arm,
            "rotational_inertia": joint.rotational_inertia,
            "viscous_damping": joint.viscous_damping,
            "link_length": joint.link_length,
            "link_radius": joint.link_radius,
        }
        if joint.extension_spring is not None:
            entry["extension_spring"] = {
                "stiffness": joint.extension_spring.stiffness,
                "rest_angle": joint.extension_spring.rest_angle,
            }
        if joint.brake != scenario.brake_default:
            entry["brake"] = _brake_to_dict(joint.brake)
        joints.append(entry)
    mechanism: dict[str, Any] = {
        "base_pose": list(mech.base_pose),
        "joints": joints,
        "tendons": [{
            "motor": r.motor,
            "joints": list(r.joints),
            "routing_signs": list(r.routing_signs),
            "stiffness": r.stiffness,
            "slack_allowed": r.slack_allowed,
            "tension_limit": r.tension_limit,
            "spool_sign": r.spool_sign,
        } for r in mech.tendons],
        "motors": [{
            "control_mode": m.control_mode,
            "spool_radius": m.spool_radius,
            "max_speed": m.max_speed,
            "position_gain": m.position_gain,
            "position_limits": list(m.position_limits),
        } for m in mech.motors],
        "limit_stiffness": mech.limit_stiffness,
        "initial_joint_angles": list(scenario.initial_joint_angles),
    }
    if mech.fingers is not None:
        mechanism["fingers"] = [{
            "joints": list(f.joints),
            "base_offset": list(f.base_offset),
        } for f in mech.fingers]
    if mech.walls:
        mechanism["walls"] = [{
            "start": list(w.start),
            "end": list(w.end),
            "radius": w.radius,
        } for w in mech.walls]
    if scenario.initial_motor_positions is not None:
        mechanism["initial_motor_positions"] = list(scenario.initial_motor_positions)

    controller: dict[str, Any]
    if isinstance(scenario.controller, VotingConfig):
        c = scenario.controller
        controller = {
            "type": "voting",
            "motor_speed": c.motor_speed,
            "tolerance": c.tolerance,
            "control_period": c.control_period,
            "timeout": c.timeout,
        }
    else:
        c = scenario.controller
        p = c.params
        controller = {
            "type": "mppi",
            "num_rollouts": p.num_rollouts,
            "horizon": p.horizon,
            "temperature": p.temperature,
            "contact_weight": p.contact_weight,
            "distance_weight": p.distance_weight,
            "switch_threshold": p.switch_threshold,
            "noise_std": p.noise_std,
            "control_rate": p.control_rate,
            "contact_threshold": p.contact_threshold,
            "model_dt": p.model_dt,
            "goal_x": c.goal.goal_x,
            "success_tolerance": c.goal.success_tolerance,
            "timeout": c.timeout,
            "no_progress_window": c.no_progress_window,
            "no_progress_min_improvement": c.no_progress_min_improvement,
        }

    data: dict[str, Any] = {
        "name": scenario.name,
        "description": scenario.description,
        "seed": scenario.seed,
        "allow_wide_limits": scenario.allow_wide_limits,
        "brake_defaults": _brake_to_dict(scenario.brake_default),
        "mechanism": mechanism,
        "controller": controller,
        "integration": {
            "dt": scenario.integration.dt,
            "control_substeps": scenario.integration.control_substeps,
            "brake_latency": scenario.integration.brake_latency,
        },
    }
    if scenario.object_spec is not None:
        data["object"] = {
            "radius": scenario.object_spec.radius,
            "mass": scenario.object_spec.mass,
            "table_friction_viscous": scenario.object_spec.table_friction_viscous,
            "table_friction_coulomb": scenario.object_spec.table_friction_coulomb,
            "contact_stiffness": scenario.object_spec.contact_stiffness,
            "contact_damping": scenario.object_spec.contact_damping,
            "surface_friction": scenario.object_spec.surface_friction,
            "initial_position": list(scenario.object_start),
        }
    return data


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    with open(path, "w") as f:
        json.dump(scenario_to_dict(scenario), f, indent=2)
        f.write("\n")


def initial_world_state(scenario: Scenario) -> WorldState:
    """Initial WorldState for a scenario.

    When the file omits motor positions they are set so every tendon starts
    exactly taut with zero tension.
    """
    return make_state(
        scenario.mechanism,
        joint_angles=scenario.initial_joint_angles,
        motor_positions=scenario.initial_motor_positions,
        object_position=scenario.object_start,
    )
