"""Vectorized physics core shared by the public mechanism ops and the engine.

Everything here operates on batches: arrays carry a leading axis B of
independent worlds stepped in lockstep. The public single-world API calls in
with B = 1; the sampling controller calls in with B equal to its rollout
count. Row b of every output depends only on row b of the inputs, so batched
and one-at-a-time execution produce bit-identical results.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .mechanism import FRICTION_REG_SPEED, MechanismSpec, ObjectSpec

from .brake import max_brake_torque


class IntegrationFault(RuntimeError):
    """Raised when integration produces non-finite state or violates a model
    assumption (e.g. slack in a route declared taut)."""


@dataclass(frozen=True)
class CompiledMechanism:
    """Flat array tables derived from a MechanismSpec, built once per spec."""

    n_joints: int
    n_motors: int
    n_routes: int
    # per joint
    limit_lo: np.ndarray
    limit_hi: np.ndarray
    inv_inertia: np.ndarray
    damping: np.ndarray
    spring_k: np.ndarray
    spring_rest: np.ndarray
    link_len: np.ndarray
    link_len2: np.ndarray
    link_rad: np.ndarray
    holding_torque: np.ndarray  # brake torque capacity when engaged
    limit_k: float
    # chains: (start, stop, base_x, base_y, base_heading)
    chains: tuple[tuple[int, int, float, float, float], ...]
    chain_start: np.ndarray  # (n_chains,) int64
    chain_stop: np.ndarray  # (n_chains,) int64
    chain_base_x: np.ndarray
    chain_base_y: np.ndarray
    chain_base_th: np.ndarray
    ancestor_f: np.ndarray  # (n, n) float, 1.0 where joint j drives link i
    fingertip_links: np.ndarray  # (n_chains,) distal link index per chain
    fingertip_radius: np.ndarray  # (n_chains,)
    # per route
    route_matrix: np.ndarray  # (r, n) routing sign * moment arm
    route_k: np.ndarray
    route_limit: np.ndarray
    route_motor: np.ndarray
    spool_factor: np.ndarray  # spool_sign * spool_radius
    route_strict: np.ndarray  # bool, slack not allowed
    # per motor
    velocity_mode: np.ndarray  # bool
    max_speed: np.ndarray
    pos_gain: np.ndarray
    pos_lo: np.ndarray
    pos_hi: np.ndarray
    # static walls (object-only contact)
    wall_a: np.ndarray  # (w, 2) segment starts
    wall_b: np.ndarray  # (w, 2) segment ends
    wall_len2: np.ndarray  # (w,)
    wall_rad: np.ndarray  # (w,)


_COMPILE_CACHE: dict[int, CompiledMechanism] = {}


def compile_mechanism(spec: MechanismSpec) -> CompiledMechanism:
    cached = _COMPILE_CACHE.get(id(spec))
    if cached is not None:
        return cached

    n = len(spec.joints)
    chains = []
    ancestor = np.zeros((n, n))
    for (bx, by, bth), joints in spec.chain_groups():
        start, stop = joints[0], joints[-1] + 1
        chains.append((start, stop, bx, by, bth))
        for i in range(start, stop):
            ancestor[i, start:i + 1] = 1.0

    link_len = np.array([j.link_length for j in spec.joints])
    cm = CompiledMechanism(
        n_joints=n,
        n_motors=len(spec.motors),
        n_routes=len(spec.tendons),
        limit_lo=np.array([j.limits[0] for j in spec.joints]),
        limit_hi=np.array([j.limits[1] for j in spec.joints]),
        inv_inertia=np.array([1.0 / j.rotational_inertia for j in spec.joints]),
        damping=np.array([j.viscous_damping for j in spec.joints]),
        spring_k=np.array([j.extension_spring.stiffness if j.extension_spring else 0.0
                           for j in spec.joints]),
        spring_rest=np.array([j.extension_spring.rest_angle if j.extension_spring else 0.0
                              for j in spec.joints]),
        link_len=link_len,
        link_len2=link_len**2,
        link_rad=np.array([j.link_radius for j in spec.joints]),
        holding_torque=np.array([max_brake_torque(j.brake) for j in spec.joints]),
        limit_k=spec.limit_stiffness,
        chains=tuple(chains),
        chain_start=np.array([c[0] for c in chains], dtype=np.int64),
        chain_stop=np.array([c[1] for c in chains], dtype=np.int64),
        chain_base_x=np.array([c[2] for c in chains]),
        chain_base_y=np.array([c[3] for c in chains]),
        chain_base_th=np.array([c[4] for c in chains]),
        ancestor_f=ancestor,
        fingertip_links=np.array([stop - 1 for _, stop, *_ in chains], dtype=int),
        fingertip_radius=np.array([spec.joints[stop - 1].link_radius
                                   for _, stop, *_ in chains]),
        route_matrix=_route_matrix(spec),
        route_k=np.array([r.stiffness for r in spec.tendons]),
        route_limit=np.array([r.tension_limit for r in spec.tendons]),
        route_motor=np.array([r.motor for r in spec.tendons], dtype=int),
        spool_factor=np.array([r.spool_sign * spec.motors[r.motor].spool_radius
                               for r in spec.tendons]),
        route_strict=np.array([not r.slack_allowed for r in spec.tendons], dtype=bool),
        velocity_mode=np.array([m.control_mode == "velocity" for m in spec.motors], dtype=bool),
        max_speed=np.array([m.max_speed for m in spec.motors]),
        pos_gain=np.array([m.position_gain for m in spec.motors]),
        pos_lo=np.array([m.position_limits[0] for m in spec.motors]),
        pos_hi=np.array([m.position_limits[1] for m in spec.motors]),
        wall_a=np.array([w.start for w in spec.walls]).reshape(-1, 2),
        wall_b=np.array([w.end for w in spec.walls]).reshape(-1, 2),
        wall_len2=np.array([(w.end[0] - w.start[0])**2 + (w.end[1] - w.start[1])**2
                            for w in spec.walls]),
        wall_rad=np.array([w.radius for w in spec.walls]),
    )

    _COMPILE_CACHE[id(spec)] = cm
    weakref.finalize(spec, _COMPILE_CACHE.pop, id(spec), None)
    return cm


def _route_matrix(spec: MechanismSpec) -> np.ndarray:
    mat = np.zeros((len(spec.tendons), len(spec.joints)))
    for r, route in enumerate(spec.tendons):
        for sign, j in zip(route.routing_signs, route.joints):
            mat[r, j] = sign * spec.joints[j].moment_arm
    return mat


def fk_batch(cm: CompiledMechanism, q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Link headings and segment endpoints for a batch of configurations."""
    b = q.shape[0]
    heading = np.empty((b, cm.n_joints))
    starts = np.empty((b, cm.n_joints, 2))
    ends = np.empty((b, cm.n_joints, 2))
    for (s, e, bx, by, bth) in cm.chains:
        h = bth + np.cumsum(q[:, s:e], axis=1)
        heading[:, s:e] = h
        step_x = cm.link_len[s:e] * np.cos(h)
        step_y = cm.link_len[s:e] * np.sin(h)
        ex = bx + np.cumsum(step_x, axis=1)
        ey = by + np.cumsum(step_y, axis=1)
        ends[:, s:e, 0] = ex
        ends[:, s:e, 1] = ey
        starts[:, s:e, 0] = ex - step_x
        starts[:, s:e, 1] = ey - step_y
    return heading, starts, ends


def tensions_batch(cm: CompiledMechanism, q: np.ndarray, mp: np.ndarray) -> np.ndarray:
    """Stiff-elastic tendon tensions, clamped to [0, tension_limit]."""
    excursion = q @ cm.route_matrix.T
    take_up = mp[:, cm.route_motor] * cm.spool_factor
    stretch = take_up - excursion
    if cm.route_strict.any():
        slack = stretch[:, cm.route_strict] < -1e-6
        if slack.any():
            raise IntegrationFault("slack developed in a tendon route declared taut")
    return np.clip(cm.route_k * stretch, 0.0, cm.route_limit)


def passive_torques_batch(cm: CompiledMechanism, q: np.ndarray, dq: np.ndarray,
                          tensions: np.ndarray) -> np.ndarray:
    """Tendon + spring + damping + joint-limit torques (no contact)."""
    tau = tensions @ cm.route_matrix
    tau += cm.spring_k * (cm.spring_rest - q)
    tau -= cm.damping * dq
    tau += cm.limit_k * np.maximum(cm.limit_lo - q, 0.0)
    tau -= cm.limit_k * np.maximum(q - cm.limit_hi, 0.0)
    return tau


def contact_batch(cm: CompiledMechanism, obj: ObjectSpec, starts: np.ndarray,
                  ends: np.ndarray, dq: np.ndarray, op: np.ndarray,
                  ov: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Penalty contact of every link capsule against the object circle.

    Returns (forces on object per link (B,n,2), contact points (B,n,2),
    active mask (B,n), joint torques from the link reactions (B,n)).
    """
    d = ends - starts
    rel0 = op[:, None, :] - starts
    tproj = (rel0[..., 0] * d[..., 0] + rel0[..., 1] * d[..., 1]) / cm.link_len2
    np.clip(tproj, 0.0, 1.0, out=tproj)
    points = starts + tproj[..., None] * d
    rel = op[:, None, :] - points
    dist = np.sqrt(rel[..., 0]**2 + rel[..., 1]**2)
    pen = (cm.link_rad + obj.radius) - dist
    active = pen > 0.0

    b, n = dist.shape
    if not active.any():
        zeros2 = np.zeros((b, n, 2))
        return zeros2, points, active, np.zeros((b, n))

    safe = np.maximum(dist, 1e-12)
    nx = rel[..., 0] / safe
    ny = rel[..., 1] / safe

    # Velocity of the contact point on the link: each ancestor joint j
    # contributes dq_j * perp(point - joint_position).
    dx = points[..., 0][:, :, None] - starts[..., 0][:, None, :]
    dy = points[..., 1][:, :, None] - starts[..., 1][:, None, :]
    vpx = -np.einsum('bij,bj,ij->bi', dy, dq, cm.ancestor_f, optimize=True)
    vpy = np.einsum('bij,bj,ij->bi', dx, dq, cm.ancestor_f, optimize=True)
    vrx = ov[:, 0][:, None] - vpx
    vry = ov[:, 1][:, None] - vpy

    separation_rate = vrx * nx + vry * ny
    fn = obj.contact_stiffness * pen - obj.contact_damping * separation_rate
    np.maximum(fn, 0.0, out=fn)
    fn *= active

    # Regularized Coulomb friction along the tangent perp(normal) = (-ny, nx).
    vt = -vrx * ny + vry * nx
    ft = -obj.surface_friction * fn * np.clip(vt / FRICTION_REG_SPEED, -1.0, 1.0)
    fx = fn * nx - ft * ny
    fy = fn * ny + ft * nx

    # Reaction -F at the contact point, mapped through each ancestor joint.
    cross = dx * (-fy[:, :, None]) - dy * (-fx[:, :, None])
    tau = np.einsum('bij,ij->bj', cross, cm.ancestor_f, optimize=True)
    forces = np.stack([fx, fy], axis=-1)
    return forces, points, active, tau


def wall_contact_batch(cm: CompiledMechanism, obj: ObjectSpec, op: np.ndarray,
                       ov: np.ndarray) -> np.ndarray:
    """Forces on the object from static wall capsules, (B, n_walls, 2).

    Same penalty and friction law as link contact; the wall is stationary so
    the relative velocity is the object velocity itself.
    """
    n_w = cm.wall_rad.shape[0]
    b = op.shape[0]
    if n_w == 0:
        return np.zeros((b, 0, 2))
    a = cm.wall_a[None, :, :]
    d = (cm.wall_b - cm.wall_a)[None, :, :]
    rel0 = op[:, None, :] - a
    tproj = (rel0[..., 0] * d[..., 0] + rel0[..., 1] * d[..., 1]) / cm.wall_len2
    np.clip(tproj, 0.0, 1.0, out=tproj)
    points = a + tproj[..., None] * d
    rel = op[:, None, :] - points
    dist = np.sqrt(rel[..., 0]**2 + rel[..., 1]**2)
    pen = (cm.wall_rad + obj.radius) - dist
    active = pen > 0.0
    if not active.any():
        return np.zeros((b, n_w, 2))
    safe = np.maximum(dist, 1e-12)
    nx = rel[..., 0] / safe
    ny = rel[..., 1] / safe
    separation = ov[:, 0][:, None] * nx + ov[:, 1][:, None] * ny
    fn = obj.contact_stiffness * pen - obj.contact_damping * separation
    np.maximum(fn, 0.0, out=fn)
    fn *= active
    vt = -ov[:, 0][:, None] * ny + ov[:, 1][:, None] * nx
    ft = -obj.surface_friction * fn * np.clip(vt / FRICTION_REG_SPEED, -1.0, 1.0)
    fx = fn * nx - ft * ny
    fy = fn * ny + ft * nx
    return np.stack([fx, fy], axis=-1)


def advance_motors(cm: CompiledMechanism, mp: np.ndarray, cmd: np.ndarray,
                   dt: float) -> None:
    """Integrate motor spool positions one step, in place.

    Velocity-mode motors follow the commanded rate; position-mode motors run
    a slew-limited first-order servo toward the (limit-clamped) target.
    """
    target = np.clip(cmd, cm.pos_lo, cm.pos_hi)
    servo = cm.pos_gain * (target - mp)
    rate = np.where(cm.velocity_mode, cmd, servo)
    np.clip(rate, -cm.max_speed, cm.max_speed, out=rate)
    mp += rate * dt
    np.clip(mp, cm.pos_lo, cm.pos_hi, out=mp)


def step_batch(cm: CompiledMechanism, obj: ObjectSpec | None,
               q: np.ndarray, dq: np.ndarray, mp: np.ndarray,
               op: np.ndarray, ov: np.ndarray,
               cmd_motor: np.ndarray, brake_on: np.ndarray, dt: float,
               external_torques: np.ndarray | None = None) -> None:
    """One semi-implicit Euler step for a batch of worlds, in place.

    Braked joints follow an exactly capped Coulomb law: the brake impulse
    removes up to holding_torque * dt / inertia of velocity each step, so a
    resting joint stays exactly at rest (stick) until the applied torque
    exceeds the holding torque, and a slipping joint always sees the full
    opposing holding torque until the brake captures it at zero velocity.
    """
    advance_motors(cm, mp, cmd_motor, dt)

    tensions = tensions_batch(cm, q, mp)
    tau = passive_torques_batch(cm, q, dq, tensions)
    if external_torques is not None:
        tau += external_torques

    if obj is not None:
        _, starts, ends = fk_batch(cm, q)
        forces, _, _, tau_contact = contact_batch(cm, obj, starts, ends, dq, op, ov)
        tau += tau_contact
        object_force = forces.sum(axis=1)
        object_force += wall_contact_batch(cm, obj, op, ov).sum(axis=1)
    else:
        object_force = None

    v_half = dq + (dt * cm.inv_inertia) * tau
    brake_cap = cm.holding_torque * (dt * cm.inv_inertia)
    slip = np.maximum(np.abs(v_half) - brake_cap, 0.0)
    dq[:] = np.where(brake_on, np.sign(v_half) * slip, v_half)
    q += dq * dt

    if obj is not None:
        force = object_force - obj.table_friction_viscous * ov
        v_half_o = ov + (dt / obj.mass) * force
        speed = np.sqrt(v_half_o[:, 0]**2 + v_half_o[:, 1]**2)
        coulomb_cap = obj.table_friction_coulomb * dt / obj.mass
        scale = np.maximum(1.0 - coulomb_cap / np.maximum(speed, 1e-15), 0.0)
        ov[:] = v_half_o * scale[:, None]
        op += ov * dt


def finite_rows(q: np.ndarray, dq: np.ndarray, op: np.ndarray,
                ov: np.ndarray) -> np.ndarray:
    """Per-world mask of rows whose state is entirely finite."""
    ok = np.isfinite(q).all(axis=1) & np.isfinite(dq).all(axis=1)
    ok &= np.isfinite(op).all(axis=1) & np.isfinite(ov).all(axis=1)
    return ok
