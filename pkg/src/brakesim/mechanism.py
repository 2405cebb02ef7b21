"""Data model and force computations for planar tendon-coupled mechanisms.

A mechanism is one or more serial chains of revolute joints in a top-down
plane (gravity acts out of plane). Joints carry electrostatic brakes, optional
extension springs, viscous damping, and one-sided joint-limit penalties.
Motors wind tendons on spools; tendons are stiff-elastic and can only pull.
A free cylindrical object can slide on the table and interact with the links
through a penalty contact model.

All public functions are pure. Specs are frozen dataclasses; ``WorldState``
is a value type whose copies may be stepped independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .brake import BrakeSpec

# Tangential contact friction is regularized: full Coulomb force is reached
# once the slip speed exceeds this scale (m/s).
FRICTION_REG_SPEED = 0.005


@dataclass(frozen=True)
class SpringSpec:
    """Torsional extension spring: torque = -stiffness * (angle - rest_angle)."""

    stiffness: float  # N*m/rad
    rest_angle: float  # rad

    def __post_init__(self) -> None:
        if not self.stiffness > 0:
            raise ValueError(f"spring stiffness must be > 0, got {self.stiffness}")


@dataclass(frozen=True)
class JointSpec:
    """One revolute joint and the link it drives.

    ``moment_arm`` is the tendon lever radius about the joint axis, shared by
    every route through this joint. ``link_radius`` is the capsule half-width
    used for contact.
    """

    limits: tuple[float, float]  # rad, (lower, upper)
    moment_arm: float  # m
    rotational_inertia: float  # kg*m^2, lumped
    viscous_damping: float  # N*m*s/rad
    link_length: float  # m
    link_radius: float  # m
    brake: BrakeSpec
    extension_spring: Optional[SpringSpec] = None

    def __post_init__(self) -> None:
        lo, hi = self.limits
        if not lo < hi:
            raise ValueError(f"joint limits must satisfy lower < upper, got {self.limits}")
        if not self.moment_arm > 0:
            raise ValueError(f"moment_arm must be > 0, got {self.moment_arm}")
        if not self.rotational_inertia > 0:
            raise ValueError(f"rotational_inertia must be > 0, got {self.rotational_inertia}")
        if self.viscous_damping < 0:
            raise ValueError(f"viscous_damping must be >= 0, got {self.viscous_damping}")
        if not self.link_length > 0:
            raise ValueError(f"link_length must be > 0, got {self.link_length}")
        if self.link_radius < 0:
            raise ValueError(f"link_radius must be >= 0, got {self.link_radius}")


@dataclass(frozen=True)
class TendonRoute:
    """One tendon from a motor spool through a set of coupled joints.

    ``routing_signs[i]`` is the sign of the torque produced on coupled joint
    ``joints[i]`` per unit tension. ``spool_sign`` is the winding direction on
    the motor spool: +1 means positive motor rotation reels this tendon in,
    -1 means it pays it out (antagonistic pairs share a motor with opposite
    spool signs).
    """

    motor: int
    joints: tuple[int, ...]
    routing_signs: tuple[int, ...]
    stiffness: float  # N/m
    slack_allowed: bool = True
    tension_limit: float = 50.0  # N
    spool_sign: int = 1

    def __post_init__(self) -> None:
        if len(self.joints) == 0:
            raise ValueError("a tendon route must couple at least one joint")
        if len(self.routing_signs) != len(self.joints):
            raise ValueError("routing_signs must have one entry per coupled joint")
        if any(s not in (-1, 1) for s in self.routing_signs):
            raise ValueError(f"routing_signs must be -1 or +1, got {self.routing_signs}")
        if not self.stiffness > 0:
            raise ValueError(f"tendon stiffness must be > 0, got {self.stiffness}")
        if not self.tension_limit > 0:
            raise ValueError(f"tension_limit must be > 0, got {self.tension_limit}")
        if self.spool_sign not in (-1, 1):
            raise ValueError(f"spool_sign must be -1 or +1, got {self.spool_sign}")


@dataclass(frozen=True)
class MotorSpec:
    """Tendon spool motor.

    In velocity mode the command is a spool velocity in rad/s; in position
    mode it is a target spool angle tracked by a stiff first-order servo with
    rate gain ``position_gain`` (1/s), slew-limited to ``max_speed``.
    """

    control_mode: str  # "velocity" | "position"
    spool_radius: float  # m
    max_speed: float  # rad/s
    position_gain: float = 40.0  # 1/s
    position_limits: tuple[float, float] = (-math.pi, math.pi)  # rad

    def __post_init__(self) -> None:
        if self.control_mode not in ("velocity", "position"):
            raise ValueError(f"control_mode must be 'velocity' or 'position', got {self.control_mode!r}")
        if not self.spool_radius > 0:
            raise ValueError(f"spool_radius must be > 0, got {self.spool_radius}")
        if not self.max_speed > 0:
            raise ValueError(f"max_speed must be > 0, got {self.max_speed}")
        if not self.position_gain > 0:
            raise ValueError(f"position_gain must be > 0, got {self.position_gain}")
        lo, hi = self.position_limits
        if not lo < hi:
            raise ValueError(f"position_limits must satisfy lower < upper, got {self.position_limits}")


@dataclass(frozen=True)
class FingerSpec:
    """A serial sub-chain of joints mounted at an offset from the base pose."""

    joints: tuple[int, ...]
    base_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)  # x, y, heading

    def __post_init__(self) -> None:
        if len(self.joints) == 0:
            raise ValueError("a finger must contain at least one joint")
        expected = tuple(range(self.joints[0], self.joints[0] + len(self.joints)))
        if self.joints != expected:
            raise ValueError(f"finger joints must be contiguous ascending indices, got {self.joints}")


@dataclass(frozen=True)
class WallSpec:
    """Static capsule obstacle (e.g. the palm) that only the object touches.

    Contact reactions on walls go to ground; walls exert forces on the object
    with the same penalty law as links but produce no joint torques.
    """

    start: tuple[float, float]
    end: tuple[float, float]
    radius: float

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise ValueError(f"wall radius must be >= 0, got {self.radius}")
        if self.start == self.end:
            raise ValueError("wall must have distinct endpoints")


@dataclass(frozen=True)
class ObjectSpec:
    """Free cylindrical object sliding on the table plane."""

    radius: float  # m
    mass: float  # kg
    table_friction_viscous: float  # N*s/m
    table_friction_coulomb: float  # N
    contact_stiffness: float  # N/m
    contact_damping: float  # N*s/m
    surface_friction: float  # dimensionless

    def __post_init__(self) -> None:
        for name in ("radius", "mass", "contact_stiffness"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("table_friction_viscous", "table_friction_coulomb",
                     "contact_damping", "surface_friction"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class MechanismSpec:
    """Topology of the whole mechanism.

    Without ``fingers`` the joints form one serial chain rooted at
    ``base_pose``. With ``fingers``, each finger is its own chain rooted at
    ``base_pose`` composed with the finger's ``base_offset``; the finger
    groups must partition the joints.
    """

    base_pose: tuple[float, float, float]
    joints: tuple[JointSpec, ...]
    tendons: tuple[TendonRoute, ...]
    motors: tuple[MotorSpec, ...]
    fingers: Optional[tuple[FingerSpec, ...]] = None
    walls: tuple[WallSpec, ...] = ()
    limit_stiffness: float = 50.0  # N*m/rad, one-sided penalty beyond a limit

    def __post_init__(self) -> None:
        n = len(self.joints)
        if n == 0:
            raise ValueError("mechanism must have at least one joint")
        if len(self.motors) == 0:
            raise ValueError("mechanism must have at least one motor")
        if not self.limit_stiffness >= 0:
            raise ValueError(f"limit_stiffness must be >= 0, got {self.limit_stiffness}")
        coupled = set()
        for route in self.tendons:
            if not 0 <= route.motor < len(self.motors):
                raise ValueError(f"tendon references unknown motor {route.motor}")
            for j in route.joints:
                if not 0 <= j < n:
                    raise ValueError(f"tendon references unknown joint {j}")
            coupled.update(route.joints)
        missing = sorted(set(range(n)) - coupled)
        if missing:
            raise ValueError(f"joints {missing} are not coupled to any tendon")
        if self.fingers is not None:
            seen: list[int] = []
            for finger in self.fingers:
                seen.extend(finger.joints)
            if sorted(seen) != list(range(n)):
                raise ValueError("finger groups must partition the mechanism's joints")

    def chain_groups(self) -> list[tuple[tuple[float, float, float], tuple[int, ...]]]:
        """(root pose, joint indices) per kinematic chain."""
        bx, by, bth = self.base_pose
        if self.fingers is None:
            return [(self.base_pose, tuple(range(len(self.joints))))]
        chains = []
        for finger in self.fingers:
            ox, oy, oth = finger.base_offset
            cos_b, sin_b = math.cos(bth), math.sin(bth)
            root = (bx + cos_b * ox - sin_b * oy,
                    by + sin_b * ox + cos_b * oy,
                    bth + oth)
            chains.append((root, finger.joints))
        return chains


@dataclass
class WorldState:
    """Full simulation state. A value: copy before stepping independently."""

    joint_angles: np.ndarray  # (n,) rad
    joint_velocities: np.ndarray  # (n,) rad/s
    brake_engaged: np.ndarray  # (n,) bool, last commanded configuration
    motor_positions: np.ndarray  # (m,) rad
    object_position: np.ndarray = field(default_factory=lambda: np.zeros(2))
    object_velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    sim_time: float = 0.0

    def copy(self) -> "WorldState":
        return WorldState(
            joint_angles=self.joint_angles.copy(),
            joint_velocities=self.joint_velocities.copy(),
            brake_engaged=self.brake_engaged.copy(),
            motor_positions=self.motor_positions.copy(),
            object_position=self.object_position.copy(),
            object_velocity=self.object_velocity.copy(),
            sim_time=self.sim_time,
        )


def make_state(spec: MechanismSpec,
               joint_angles: Optional[Sequence[float]] = None,
               motor_positions: Optional[Sequence[float]] = None,
               object_position: Optional[Sequence[float]] = None) -> WorldState:
    """Initial state with brakes off and zero velocities.

    When ``motor_positions`` is omitted the spools are placed so that every
    tendon is exactly taut with zero stretch (zero initial tension).
    """
    n = len(spec.joints)
    q = np.zeros(n) if joint_angles is None else np.asarray(joint_angles, dtype=float)
    if q.shape != (n,):
        raise ValueError(f"expected {n} joint angles, got shape {q.shape}")
    if motor_positions is None:
        mp = np.zeros(len(spec.motors))
        for route in spec.tendons:
            motor = spec.motors[route.motor]
            exc = tendon_excursion(spec, q, route)
            mp[route.motor] = exc / (route.spool_sign * motor.spool_radius)
    else:
        mp = np.asarray(motor_positions, dtype=float)
        if mp.shape != (len(spec.motors),):
            raise ValueError(f"expected {len(spec.motors)} motor positions, got shape {mp.shape}")
    obj_p = np.zeros(2) if object_position is None else np.asarray(object_position, dtype=float)
    return WorldState(
        joint_angles=q,
        joint_velocities=np.zeros(n),
        brake_engaged=np.zeros(n, dtype=bool),
        motor_positions=mp,
        object_position=obj_p,
        object_velocity=np.zeros(2),
    )


@dataclass(frozen=True)
class FKResult:
    """Per-link planar geometry: link i runs from ``starts[i]`` to ``ends[i]``."""

    starts: np.ndarray  # (n, 2) joint positions
    ends: np.ndarray  # (n, 2) distal ends
    headings: np.ndarray  # (n,) absolute link headings, rad
    fingertips: np.ndarray  # (n_chains, 2) distal end of each chain


def forward_kinematics(spec: MechanismSpec, joint_angles: Sequence[float]) -> FKResult:
    """Compose each chain's link poses from the base pose outward."""
    from . import _kernel

    q = np.asarray(joint_angles, dtype=float)
    if q.shape != (len(spec.joints),):
        raise ValueError(f"expected {len(spec.joints)} joint angles, got shape {q.shape}")
    cm = _kernel.compile_mechanism(spec)
    heading, starts, ends = _kernel.fk_batch(cm, q[None, :])
    tips = ends[0, cm.fingertip_links]
    return FKResult(starts=starts[0], ends=ends[0], headings=heading[0], fingertips=tips)


def tendon_excursion(spec: MechanismSpec, joint_angles: Sequence[float],
                     route: TendonRoute) -> float:
    """Tendon length taken up at the joints: sum of sign * arm * angle."""
    q = np.asarray(joint_angles, dtype=float)
    total = 0.0
    for sign, j in zip(route.routing_signs, route.joints):
        total += sign * spec.joints[j].moment_arm * q[j]
    return total


def tendon_tensions(spec: MechanismSpec, state: WorldState) -> np.ndarray:
    """Tension per route from spool take-up against the elastic tendon.

    Tension is stiffness times positive stretch (take-up minus excursion),
    clamped to the route's tension limit and never negative.
    """
    from . import _kernel

    cm = _kernel.compile_mechanism(spec)
    return _kernel.tensions_batch(cm, state.joint_angles[None, :],
                                  state.motor_positions[None, :])[0]


@dataclass(frozen=True)
class ContactResult:
    """Penalty contact between the object and every link capsule.

    ``link_forces[i]`` is the force the object receives from link i; the link
    receives the exact negation at ``points[i]``. ``joint_torques`` maps those
    reactions through the chain Jacobians. Wall forces act on the object only;
    their reactions are grounded.
    """

    object_force: np.ndarray  # (2,) total, including wall contributions
    link_forces: np.ndarray  # (n, 2) on the object, zero where inactive
    points: np.ndarray  # (n, 2) contact points
    active: np.ndarray  # (n,) bool
    joint_torques: np.ndarray  # (n,)
    wall_forces: np.ndarray  # (n_walls, 2) on the object


def contact_wrench(spec: MechanismSpec, state: WorldState, obj: ObjectSpec) -> ContactResult:
    """Capsule-vs-circle penalty contact with damped normals and regularized
    Coulomb friction capped at surface_friction times the normal force."""
    from . import _kernel

    cm = _kernel.compile_mechanism(spec)
    heading, starts, ends = _kernel.fk_batch(cm, state.joint_angles[None, :])
    forces, points, active, tau = _kernel.contact_batch(
        cm, obj, starts, ends,
        state.joint_velocities[None, :],
        state.object_position[None, :],
        state.object_velocity[None, :])
    wall_forces = _kernel.wall_contact_batch(
        cm, obj, state.object_position[None, :], state.object_velocity[None, :])
    return ContactResult(
        object_force=forces[0].sum(axis=0) + wall_forces[0].sum(axis=0),
        link_forces=forces[0],
        points=points[0],
        active=active[0],
        joint_torques=tau[0],
        wall_forces=wall_forces[0],
    )


def fingertip_contacts(spec: MechanismSpec, state: WorldState, obj: ObjectSpec,
                       threshold: float) -> np.ndarray:
    """Per-fingertip flag: surface-to-surface distance <= threshold.

    The boundary is closed: a distance exactly at the threshold counts as
    contact. Fingertip radius is the distal link's capsule radius.
    """
    fk = forward_kinematics(spec, state.joint_angles)
    tips = fk.fingertips
    tip_radius = np.array([spec.joints[chain[-1]].link_radius
                           for _, chain in spec.chain_groups()])
    dist = np.linalg.norm(tips - state.object_position[None, :], axis=1)
    return (dist - obj.radius - tip_radius) <= threshold


def net_joint_torques(spec: MechanismSpec, state: WorldState, tensions: Sequence[float],
                      obj: Optional[ObjectSpec] = None,
                      external_torques: Optional[Sequence[float]] = None) -> np.ndarray:
    """Net torque on each joint.

    Sums tendon torques (sign * arm * tension per route), spring torques,
    viscous damping, one-sided joint-limit penalties, contact reactions when
    an object is supplied, and any external torques.
    """
    from . import _kernel

    cm = _kernel.compile_mechanism(spec)
    t = np.asarray(tensions, dtype=float)
    if t.shape != (len(spec.tendons),):
        raise ValueError(f"expected {len(spec.tendons)} tensions, got shape {t.shape}")
    if np.any(t < 0):
        raise ValueError("tendon tensions must be non-negative")
    tau = _kernel.passive_torques_batch(cm, state.joint_angles[None, :],
                                        state.joint_velocities[None, :], t[None, :])
    if obj is not None:
        tau = tau + contact_wrench(spec, state, obj).joint_torques[None, :]
    if external_torques is not None:
        tau = tau + np.asarray(external_torques, dtype=float)[None, :]
    return tau[0]


def potential_energy(spec: MechanismSpec, state: WorldState,
                     obj: Optional[ObjectSpec] = None) -> float:
    """Total stored elastic energy: tendon stretch, springs, limit and
    contact penalties.

    Valid as a potential for the torque field only while every tendon is
    below its tension limit (the clamp is not conservative).
    """
    q = state.joint_angles
    energy = 0.0
    for route in spec.tendons:
        motor = spec.motors[route.motor]
        take_up = route.spool_sign * motor.spool_radius * state.motor_positions[route.motor]
        stretch = take_up - tendon_excursion(spec, q, route)
        if stretch > 0:
            energy += 0.5 * route.stiffness * stretch**2
    for j, joint in enumerate(spec.joints):
        if joint.extension_spring is not None:
            s = joint.extension_spring
            energy += 0.5 * s.stiffness * (q[j] - s.rest_angle)**2
        lo, hi = joint.limits
        if q[j] > hi:
            energy += 0.5 * spec.limit_stiffness * (q[j] - hi)**2
        elif q[j] < lo:
            energy += 0.5 * spec.limit_stiffness * (lo - q[j])**2
    if obj is not None:
        fk = forward_kinematics(spec, q)
        segments = [(fk.starts[i], fk.ends[i], spec.joints[i].link_radius)
                    for i in range(len(spec.joints))]
        segments += [(np.asarray(w.start), np.asarray(w.end), w.radius)
                     for w in spec.walls]
        for p, e, radius in segments:
            d = e - p
            t = float(np.clip(np.dot(state.object_position - p, d) / np.dot(d, d), 0.0, 1.0))
            closest = p + t * d
            dist = float(np.linalg.norm(state.object_position - closest))
            pen = (radius + obj.radius) - dist
            if pen > 0:
                energy += 0.5 * obj.contact_stiffness * pen**2
    return energy


def kinetic_energy(spec: MechanismSpec, state: WorldState,
                   obj: Optional[ObjectSpec] = None) -> float:
    """Lumped joint kinetic energy plus the object's translational energy."""
    inertia = np.array([j.rotational_inertia for j in spec.joints])
    energy = 0.5 * float(np.sum(inertia * state.joint_velocities**2))
    if obj is not None:
        energy += 0.5 * obj.mass * float(np.dot(state.object_velocity, state.object_velocity))
    return energy


def reference_routing_signs(spec: MechanismSpec, motor: int = 0) -> np.ndarray:
    """Per-joint torque sign for positive rotation of the given motor.

    Uses the motor's positively wound route (spool_sign +1): reeling that
    tendon in torques each coupled joint by its routing sign. Joints the
    route does not couple get sign 0.
    """
    signs = np.zeros(len(spec.joints), dtype=int)
    for route in spec.tendons:
        if route.motor == motor and route.spool_sign == 1:
            for sign, j in zip(route.routing_signs, route.joints):
                signs[j] = sign
            return signs
    raise ValueError(f"motor {motor} has no positively wound tendon route")
