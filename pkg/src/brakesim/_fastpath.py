"""Optional numba acceleration of the substep loop.

Mirrors ``_kernel.step_batch`` exactly (same update order, same clamping
rules) but runs many substeps per call in compiled code. The engine falls
back to the numpy reference when numba is unavailable, an external torque is
supplied, or a route forbids slack; a regression test keeps the two paths
within floating-point agreement.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn
        return deco if not (args and callable(args[0])) else args[0]

from .mechanism import FRICTION_REG_SPEED


@njit(cache=True)
def _run_substeps(n_sub, dt, q, dq, mp, op, ov, cmd, brake,
                  has_object, obj_radius, obj_mass, obj_visc, obj_coulomb,
                  obj_kc, obj_cc, obj_mu,
                  limit_lo, limit_hi, inv_inertia, joint_damping, spring_k,
                  spring_rest, link_len, link_len2, link_rad, holding_torque,
                  limit_k, chain_start, chain_stop, base_x, base_y, base_th,
                  route_matrix, route_k, route_limit, route_motor, spool_factor,
                  velocity_mode, max_speed, pos_gain, pos_lo, pos_hi,
                  wall_a, wall_b, wall_len2, wall_rad):
    n_b = q.shape[0]
    n = q.shape[1]
    n_m = mp.shape[1]
    n_r = route_matrix.shape[0]
    n_c = chain_start.shape[0]

    tau = np.empty(n)
    sx = np.empty(n)
    sy = np.empty(n)
    ex = np.empty(n)
    ey = np.empty(n)

    for _ in range(n_sub):
        for b in range(n_b):
            # Motor spools: commanded rate or slew-limited servo.
            for k in range(n_m):
                if velocity_mode[k]:
                    rate = cmd[b, k]
                else:
                    tgt = min(max(cmd[b, k], pos_lo[k]), pos_hi[k])
                    rate = pos_gain[k] * (tgt - mp[b, k])
                rate = min(max(rate, -max_speed[k]), max_speed[k])
                mp[b, k] += rate * dt
                mp[b, k] = min(max(mp[b, k], pos_lo[k]), pos_hi[k])

            # Tendon tensions and their joint torques.
            for j in range(n):
                tau[j] = 0.0
            for r in range(n_r):
                excursion = 0.0
                for j in range(n):
                    excursion += route_matrix[r, j] * q[b, j]
                stretch = spool_factor[r] * mp[b, route_motor[r]] - excursion
                tension = route_k[r] * stretch
                if tension < 0.0:
                    tension = 0.0
                elif tension > route_limit[r]:
                    tension = route_limit[r]
                if tension > 0.0:
                    for j in range(n):
                        tau[j] += route_matrix[r, j] * tension

            # Springs, damping, joint limits.
            for j in range(n):
                tau[j] += spring_k[j] * (spring_rest[j] - q[b, j])
                tau[j] -= joint_damping[j] * dq[b, j]
                if q[b, j] < limit_lo[j]:
                    tau[j] += limit_k * (limit_lo[j] - q[b, j])
                elif q[b, j] > limit_hi[j]:
                    tau[j] -= limit_k * (q[b, j] - limit_hi[j])

            fob_x = 0.0
            fob_y = 0.0
            if has_object:
                # Forward kinematics per chain.
                for c in range(n_c):
                    h = base_th[c]
                    px = base_x[c]
                    py = base_y[c]
                    for i in range(chain_start[c], chain_stop[c]):
                        h += q[b, i]
                        sx[i] = px
                        sy[i] = py
                        px += link_len[i] * np.cos(h)
                        py += link_len[i] * np.sin(h)
                        ex[i] = px
                        ey[i] = py

                ox = op[b, 0]
                oy = op[b, 1]
                for c in range(n_c):
                    for i in range(chain_start[c], chain_stop[c]):
                        dx = ex[i] - sx[i]
                        dy = ey[i] - sy[i]
                        t = ((ox - sx[i]) * dx + (oy - sy[i]) * dy) / link_len2[i]
                        if t < 0.0:
                            t = 0.0
                        elif t > 1.0:
                            t = 1.0
                        cx = sx[i] + t * dx
                        cy = sy[i] + t * dy
                        rx = ox - cx
                        ry = oy - cy
                        dist = np.sqrt(rx * rx + ry * ry)
                        pen = (link_rad[i] + obj_radius) - dist
                        if pen <= 0.0:
                            continue
                        safe = dist if dist > 1e-12 else 1e-12
                        nx = rx / safe
                        ny = ry / safe
                        vpx = 0.0
                        vpy = 0.0
                        for j in range(chain_start[c], i + 1):
                            vpx -= dq[b, j] * (cy - sy[j])
                            vpy += dq[b, j] * (cx - sx[j])
                        vrx = ov[b, 0] - vpx
                        vry = ov[b, 1] - vpy
                        separation = vrx * nx + vry * ny
                        fn = obj_kc * pen - obj_cc * separation
                        if fn < 0.0:
                            fn = 0.0
                        vt = -vrx * ny + vry * nx
                        sat = vt / FRICTION_REG_SPEED
                        if sat > 1.0:
                            sat = 1.0
                        elif sat < -1.0:
                            sat = -1.0
                        ft = -obj_mu * fn * sat
                        fx = fn * nx - ft * ny
                        fy = fn * ny + ft * nx
                        fob_x += fx
                        fob_y += fy
                        for j in range(chain_start[c], i + 1):
                            tau[j] += (cx - sx[j]) * (-fy) - (cy - sy[j]) * (-fx)

                # Static wall capsules push the object only.
                for w in range(wall_rad.shape[0]):
                    dx = wall_b[w, 0] - wall_a[w, 0]
                    dy = wall_b[w, 1] - wall_a[w, 1]
                    t = ((ox - wall_a[w, 0]) * dx + (oy - wall_a[w, 1]) * dy) / wall_len2[w]
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                    cx = wall_a[w, 0] + t * dx
                    cy = wall_a[w, 1] + t * dy
                    rx = ox - cx
                    ry = oy - cy
                    dist = np.sqrt(rx * rx + ry * ry)
                    pen = (wall_rad[w] + obj_radius) - dist
                    if pen <= 0.0:
                        continue
                    safe = dist if dist > 1e-12 else 1e-12
                    nx = rx / safe
                    ny = ry / safe
                    separation = ov[b, 0] * nx + ov[b, 1] * ny
                    fn = obj_kc * pen - obj_cc * separation
                    if fn < 0.0:
                        fn = 0.0
                    vt = -ov[b, 0] * ny + ov[b, 1] * nx
                    sat = vt / FRICTION_REG_SPEED
                    if sat > 1.0:
                        sat = 1.0
                    elif sat < -1.0:
                        sat = -1.0
                    ft = -obj_mu * fn * sat
                    fob_x += fn * nx - ft * ny
                    fob_y += fn * ny + ft * nx

            # Joint integration with the exactly capped brake impulse.
            for j in range(n):
                v_half = dq[b, j] + dt * inv_inertia[j] * tau[j]
                if brake[b, j]:
                    cap = holding_torque[j] * dt * inv_inertia[j]
                    mag = abs(v_half) - cap
                    if mag <= 0.0:
                        v_new = 0.0
                    elif v_half > 0.0:
                        v_new = mag
                    else:
                        v_new = -mag
                else:
                    v_new = v_half
                dq[b, j] = v_new
                q[b, j] += v_new * dt

            if has_object:
                fx = fob_x - obj_visc * ov[b, 0]
                fy = fob_y - obj_visc * ov[b, 1]
                vhx = ov[b, 0] + dt / obj_mass * fx
                vhy = ov[b, 1] + dt / obj_mass * fy
                speed = np.sqrt(vhx * vhx + vhy * vhy)
                if speed < 1e-15:
                    speed = 1e-15
                scale = 1.0 - (obj_coulomb * dt / obj_mass) / speed
                if scale < 0.0:
                    scale = 0.0
                ov[b, 0] = vhx * scale
                ov[b, 1] = vhy * scale
                op[b, 0] += ov[b, 0] * dt
                op[b, 1] += ov[b, 1] * dt


def run_substeps(cm, obj, q, dq, mp, op, ov, cmd, brake, dt, n_sub) -> None:
    """Dispatch to the compiled loop with flattened tables."""
    if obj is None:
        obj_args = (False, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    else:
        obj_args = (True, obj.radius, obj.mass, obj.table_friction_viscous,
                    obj.table_friction_coulomb, obj.contact_stiffness,
                    obj.contact_damping, obj.surface_friction)
    _run_substeps(n_sub, dt, q, dq, mp, op, ov, cmd, brake, *obj_args,
                  cm.limit_lo, cm.limit_hi, cm.inv_inertia, cm.damping,
                  cm.spring_k, cm.spring_rest, cm.link_len, cm.link_len2,
                  cm.link_rad, cm.holding_torque, cm.limit_k,
                  cm.chain_start, cm.chain_stop, cm.chain_base_x,
                  cm.chain_base_y, cm.chain_base_th,
                  cm.route_matrix, cm.route_k, cm.route_limit, cm.route_motor,
                  cm.spool_factor, cm.velocity_mode, cm.max_speed, cm.pos_gain,
                  cm.pos_lo, cm.pos_hi,
                  cm.wall_a, cm.wall_b, cm.wall_len2, cm.wall_rad)
