"""Compiled inner loop of the cloth integrator.

One function runs N substeps of position-based dynamics:

  1. predict: semi-implicit Euler under gravity for free particles,
     kinematic targets for pinned particles;
  2. project: Gauss-Seidel pass over all distance constraints in a fixed
     order, repeated ``iterations`` times, with a ground clamp after each
     pass;
  3. update: velocities from position change, then Coulomb-style friction
     for particles the ground clamp touched this substep.

Everything is sequential and allocation-order independent, so results are
bit-for-bit reproducible for identical inputs.  ``cache=True`` persists the
compiled code across processes.
"""

from __future__ import annotations

import numba
import numpy as np

# Kinetic friction as a fraction of the static coefficient, and the
# tangential speed (m/s) above which a contacting particle counts as
# sliding.  Classic Coulomb contact: starting to slide takes more force
# than staying in motion.
KINETIC_RATIO = 0.4
V_SLIDE = 0.01

_sig = numba.int64(
    numba.float64[:, ::1],   # pos (N, 3), updated in place
    numba.float64[:, ::1],   # vel (N, 3), updated in place
    numba.int64[:, ::1],     # edges (E, 2)
    numba.float64[::1],      # rest (E,)
    numba.float64[::1],      # k_edge (E,) stiffness per edge in [0, 1]
    numba.float64[::1],      # inv_mass (N,)
    numba.int64[::1],        # pin_idx (P,) sorted particle indices
    numba.float64[:, :, ::1],  # pin_targets (S_t, P, 3)
    numba.boolean,           # targets_per_step: row per substep vs row 0
    numba.float64[::1],      # ground_z (N,)
    numba.float64,           # gravity (positive magnitude)
    numba.float64,           # dt
    numba.int64,             # iterations
    numba.float64,           # friction coefficient mu
    numba.int64,             # n_sub: substeps to run
    numba.float64,           # vel_tol: <= 0 disables early stop
    numba.int64,             # need_consec: consecutive calm substeps to stop
    numba.int64[::1],        # consec (1,) in/out: calm-substep counter
)


@numba.njit(_sig, cache=True)
def run_substeps(pos, vel, edges, rest, k_edge, inv_mass, pin_idx,
                 pin_targets, targets_per_step, ground_z, gravity, dt,
                 iterations, mu, n_sub, vel_tol, need_consec, consec):
    n = pos.shape[0]
    n_edges = edges.shape[0]
    n_pin = pin_idx.shape[0]
    pred = np.empty((n, 3), dtype=np.float64)
    pre_vz = np.empty(n, dtype=np.float64)
    depth = np.zeros(n, dtype=np.float64)
    contact = np.zeros(n, dtype=np.uint8)
    pinned = np.zeros(n, dtype=np.uint8)
    for p in range(n_pin):
        pinned[pin_idx[p]] = 1

    steps_done = 0
    for s in range(n_sub):
        row = s if targets_per_step else 0
        # 1. predict
        for i in range(n):
            if pinned[i] == 1:
                pre_vz[i] = vel[i, 2]
                continue
            vz = vel[i, 2] - gravity * dt
            pre_vz[i] = vz
            pred[i, 0] = pos[i, 0] + vel[i, 0] * dt
            pred[i, 1] = pos[i, 1] + vel[i, 1] * dt
            pred[i, 2] = pos[i, 2] + vz * dt
            vel[i, 2] = vz
        for p in range(n_pin):
            i = pin_idx[p]
            pred[i, 0] = pin_targets[row, p, 0]
            pred[i, 1] = pin_targets[row, p, 1]
            pred[i, 2] = pin_targets[row, p, 2]

        # 2. project constraints, clamping to ground after every pass.
        # Sweep direction alternates per pass so corrections propagate
        # both ways along the edge list instead of biasing one way.
        for i in range(n):
            contact[i] = 0
        for it in range(iterations):
            forward = it % 2 == 0
            for k in range(n_edges):
                e = k if forward else n_edges - 1 - k
                a = edges[e, 0]
                b = edges[e, 1]
                wa = 0.0 if pinned[a] == 1 else inv_mass[a]
                wb = 0.0 if pinned[b] == 1 else inv_mass[b]
                wsum = wa + wb
                if wsum <= 0.0:
                    continue
                dx = pred[b, 0] - pred[a, 0]
                dy = pred[b, 1] - pred[a, 1]
                dz = pred[b, 2] - pred[a, 2]
                d = np.sqrt(dx * dx + dy * dy + dz * dz)
                if d < 1e-12:
                    continue
                corr = k_edge[e] * (d - rest[e]) / (d * wsum)
                pred[a, 0] += wa * corr * dx
                pred[a, 1] += wa * corr * dy
                pred[a, 2] += wa * corr * dz
                pred[b, 0] -= wb * corr * dx
                pred[b, 1] -= wb * corr * dy
                pred[b, 2] -= wb * corr * dz
            for i in range(n):
                if pinned[i] == 0 and pred[i, 2] < ground_z[i]:
                    depth[i] = ground_z[i] - pred[i, 2]
                    pred[i, 2] = ground_z[i]
                    contact[i] = 1

        # Coulomb stiction at position level: a contacting particle whose
        # tangential travel this substep stays under mu_eff * (clamp depth)
        # sticks where it was; larger travel is shortened by that bound.
        # Static/kinetic split: a particle already sliding (tangential speed
        # from the previous substep above V_SLIDE) feels the lower kinetic
        # coefficient, so resting cloth anchors hard while material that
        # lands moving can still spread flat before it stops.
        mu_kinetic = KINETIC_RATIO * mu
        for i in range(n):
            if contact[i] == 1 and pinned[i] == 0:
                tx = pred[i, 0] - pos[i, 0]
                ty = pred[i, 1] - pos[i, 1]
                t_len = np.sqrt(tx * tx + ty * ty)
                v_sq = vel[i, 0] * vel[i, 0] + vel[i, 1] * vel[i, 1]
                if v_sq > V_SLIDE * V_SLIDE:
                    bound = mu_kinetic * depth[i]
                else:
                    bound = mu * depth[i]
                if t_len <= bound:
                    pred[i, 0] = pos[i, 0]
                    pred[i, 1] = pos[i, 1]
                elif t_len > 1e-12:
                    scale = (t_len - bound) / t_len
                    pred[i, 0] = pos[i, 0] + tx * scale
                    pred[i, 1] = pos[i, 1] + ty * scale

        # 3. velocities from positions; friction where the ground pushed back
        max_sq = 0.0
        for i in range(n):
            vx = (pred[i, 0] - pos[i, 0]) / dt
            vy = (pred[i, 1] - pos[i, 1]) / dt
            vz = (pred[i, 2] - pos[i, 2]) / dt
            if contact[i] == 1:
                dvn = -pre_vz[i]  # downward speed absorbed by the ground
                if dvn > 0.0:
                    vt = np.sqrt(vx * vx + vy * vy)
                    if vt > 1e-12:
                        if vt <= mu * dvn:
                            # static catch: the impact impulse can stop it
                            scale = 0.0
                        else:
                            scale = (vt - mu_kinetic * dvn) / vt
                            if scale < 0.0:
                                scale = 0.0
                        vx *= scale
                        vy *= scale
            vel[i, 0] = vx
            vel[i, 1] = vy
            vel[i, 2] = vz
            pos[i, 0] = pred[i, 0]
            pos[i, 1] = pred[i, 1]
            pos[i, 2] = pred[i, 2]
            sq = vx * vx + vy * vy + vz * vz
            if sq > max_sq:
                max_sq = sq

        steps_done += 1
        if vel_tol > 0.0:
            if max_sq < vel_tol * vel_tol:
                consec[0] += 1
                if consec[0] >= need_consec:
                    break
            else:
                consec[0] = 0

    return steps_done


@numba.njit(numba.void(numba.float64[:, :, ::1], numba.float64, numba.float64,
                       numba.float64, numba.int64, numba.uint8[:, ::1]),
            cache=True)
def rasterize_tris(tris, ox, oy, side, n_px, out):
    """Mark every pixel whose center lies inside any triangle's xy projection.

    ``tris`` is (T, 3, 2): triangle corners in workspace xy.  ``out`` is the
    (n_px, n_px) image with row 0 at the north edge (largest y).  Pixel
    centers sit at x = ox + (col + 0.5) * px, y = oy + side - (row + 0.5) * px.
    Boundary pixels count as covered (inclusive test).
    """
    px = side / n_px
    for t in range(tris.shape[0]):
        ax, ay = tris[t, 0, 0], tris[t, 0, 1]
        bx, by = tris[t, 1, 0], tris[t, 1, 1]
        cx, cy = tris[t, 2, 0], tris[t, 2, 1]
        area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if abs(area2) < 1e-18:
            continue  # vertical flap: projects to a zero-area segment
        xmin = min(ax, min(bx, cx))
        xmax = max(ax, max(bx, cx))
        ymin = min(ay, min(by, cy))
        ymax = max(ay, max(by, cy))
        c_lo = int(np.floor((xmin - ox) / px - 0.5))
        c_hi = int(np.ceil((xmax - ox) / px - 0.5))
        r_lo = int(np.floor((oy + side - ymax) / px - 0.5))
        r_hi = int(np.ceil((oy + side - ymin) / px - 0.5))
        if c_lo < 0:
            c_lo = 0
        if c_hi > n_px - 1:
            c_hi = n_px - 1
        if r_lo < 0:
            r_lo = 0
        if r_hi > n_px - 1:
            r_hi = n_px - 1
        for r in range(r_lo, r_hi + 1):
            py = oy + side - (r + 0.5) * px
            for c in range(c_lo, c_hi + 1):
                pxx = ox + (c + 0.5) * px
                d1 = (bx - ax) * (py - ay) - (by - ay) * (pxx - ax)
                d2 = (cx - bx) * (py - by) - (cy - by) * (pxx - bx)
                d3 = (ax - cx) * (py - cy) - (ay - cy) * (pxx - cx)
                neg = d1 < 0.0 or d2 < 0.0 or d3 < 0.0
                pos_ = d1 > 0.0 or d2 > 0.0 or d3 > 0.0
                if not (neg and pos_):
                    out[r, c] = 1
