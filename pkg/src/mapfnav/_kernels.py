"""Compiled numeric inner loops: supercover visibility and ORCA velocity selection.

Everything here is straight float64 math with a fixed processing order, so
results are bit-reproducible across runs.  With numba installed the functions
are JIT-compiled (cached on disk); without it they run as plain Python with
identical semantics.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco

# Near-gridline points count as touching the cells on both sides (conservative).
GRID_EPS = 1e-9
# Parallel-line threshold inside the velocity linear programs.
DET_EPS = 1e-10
# Slack when dropping obstacle lines already covered by earlier ones.
COVER_EPS = 1e-6

INF = math.inf


@njit(cache=True)
def _touches_blocked(mask, x, y):
    H = mask.shape[0]
    W = mask.shape[1]
    rx = math.floor(x + 0.5)
    ry = math.floor(y + 0.5)
    on_vx = abs(x - rx) <= GRID_EPS
    on_vy = abs(y - ry) <= GRID_EPS
    c1 = int(rx) if on_vx else int(math.floor(x))
    c0 = c1 - 1 if on_vx else c1
    r1 = int(ry) if on_vy else int(math.floor(y))
    r0 = r1 - 1 if on_vy else r1
    for c in range(c0, c1 + 1):
        for r in range(r0, r1 + 1):
            if c < 0 or c >= W or r < 0 or r >= H:
                return True  # outside the map counts as blocked
            if mask[r, c] != 0:
                return True
    return False


@njit(cache=True)
def line_of_sight_kernel(mask, ax, ay, bx, by):
    """Supercover segment test: False iff a-b touches any blocked cell."""
    dx = bx - ax
    dy = by - ay
    H = mask.shape[0]
    W = mask.shape[1]
    ts = np.empty(W + H + 6, np.float64)
    n = 0
    ts[n] = 0.0
    n += 1
    ts[n] = 1.0
    n += 1
    if dx != 0.0:
        lo = min(ax, bx)
        hi = max(ax, bx)
        for gx in range(int(math.ceil(lo)), int(math.floor(hi)) + 1):
            t = (gx - ax) / dx
            if 0.0 < t < 1.0:
                ts[n] = t
                n += 1
    if dy != 0.0:
        lo = min(ay, by)
        hi = max(ay, by)
        for gy in range(int(math.ceil(lo)), int(math.floor(hi)) + 1):
            t = (gy - ay) / dy
            if 0.0 < t < 1.0:
                ts[n] = t
                n += 1
    tt = np.sort(ts[:n])
    for i in range(n):
        if _touches_blocked(mask, ax + tt[i] * dx, ay + tt[i] * dy):
            return False
    for i in range(n - 1):
        tm = 0.5 * (tt[i] + tt[i + 1])
        if _touches_blocked(mask, ax + tm * dx, ay + tm * dy):
            return False
    return True


@njit(cache=True)
def _hash_dir(id_a, id_b):
    """Deterministic pseudo-random unit vector for an agent pair.

    Antisymmetric in the order of ids, so two exactly coincident agents push
    in opposite directions.
    """
    lo = np.uint64(min(id_a, id_b))
    hi = np.uint64(max(id_a, id_b))
    h = lo * np.uint64(2654435761) + hi * np.uint64(40503)
    h = (h ^ (h >> np.uint64(13))) * np.uint64(97531)
    angle = float(h % np.uint64(6283185)) * 1e-6
    if id_a > id_b:
        angle += math.pi
    return math.cos(angle), math.sin(angle)


@njit(cache=True)
def _agent_lines(px, py, vx, vy, rad, self_id, nbr, tau, dt, lines, m, overlapped):
    """Append one ORCA line per neighbor row [x,y,vx,vy,r,id]; return new count.

    Reciprocity factor 1/2: the line passes through v + u/2.  Permitted side
    is the left of the stored direction.  `overlapped` selects which rows to
    process: 1 = only neighbors whose avoidance discs already overlap ours
    (their separation constraints go first and stay hard in the fallback),
    0 = only the rest.
    """
    inv_tau = 1.0 / tau
    for i in range(nbr.shape[0]):
        rpx = nbr[i, 0] - px
        rpy = nbr[i, 1] - py
        rvx = vx - nbr[i, 2]
        rvy = vy - nbr[i, 3]
        dist_sq = rpx * rpx + rpy * rpy
        cr = rad + nbr[i, 4]
        cr_sq = cr * cr
        if (dist_sq <= cr_sq) != (overlapped == 1):
            continue
        if dist_sq > cr_sq:
            wx = rvx - inv_tau * rpx
            wy = rvy - inv_tau * rpy
            w_sq = wx * wx + wy * wy
            dot1 = wx * rpx + wy * rpy
            if dot1 < 0.0 and dot1 * dot1 > cr_sq * w_sq:
                # project on the cut-off circle
                wl = math.sqrt(w_sq)
                uwx = wx / wl
                uwy = wy / wl
                dirx = uwy
                diry = -uwx
                ux = (cr * inv_tau - wl) * uwx
                uy = (cr * inv_tau - wl) * uwy
            else:
                # project on the nearer leg of the truncated cone
                leg = math.sqrt(dist_sq - cr_sq)
                if rpx * wy - rpy * wx > 0.0:
                    dirx = (rpx * leg - rpy * cr) / dist_sq
                    diry = (rpx * cr + rpy * leg) / dist_sq
                else:
                    dirx = -(rpx * leg + rpy * cr) / dist_sq
                    diry = -(-rpx * cr + rpy * leg) / dist_sq
                dot2 = rvx * dirx + rvy * diry
                ux = dot2 * dirx - rvx
                uy = dot2 * diry - rvy
        else:
            # already overlapping: separate within one time step
            inv_dt = 1.0 / dt
            wx = rvx - inv_dt * rpx
            wy = rvy - inv_dt * rpy
            wl = math.sqrt(wx * wx + wy * wy)
            if wl > 1e-12:
                uwx = wx / wl
                uwy = wy / wl
            elif dist_sq > 1e-24:
                d = math.sqrt(dist_sq)
                uwx = -rpx / d
                uwy = -rpy / d
            else:
                uwx, uwy = _hash_dir(self_id, int(nbr[i, 5]))
            dirx = uwy
            diry = -uwx
            ux = (cr * inv_dt - wl) * uwx
            uy = (cr * inv_dt - wl) * uwy
        lines[m, 0] = vx + 0.5 * ux
        lines[m, 1] = vy + 0.5 * uy
        lines[m, 2] = dirx
        lines[m, 3] = diry
        m += 1
    return m


@njit(cache=True)
def _pt_seg_dist_sq(px, py, ax, ay, bx, by):
    abx = bx - ax
    aby = by - ay
    apx = px - ax
    apy = py - ay
    denom = abx * abx + aby * aby
    if denom > 0.0:
        t = (apx * abx + apy * aby) / denom
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    else:
        t = 0.0
    dx = apx - t * abx
    dy = apy - t * aby
    return dx * dx + dy * dy


@njit(cache=True)
def _obstacle_lines(px, py, vx, vy, rad, inv_tau, segs, cand, lines, range_sq):
    """ORCA lines for boundary segments near the agent (full responsibility).

    segs rows: [ax, ay, bx, by, ux, uy, prev_ux, prev_uy, next_ux, next_uy,
    convex_a, convex_b] where directions follow the boundary with blocked
    space on the left.  Candidates are processed nearest-first so redundant
    constraints can be dropped.  Returns the number of lines written.

    (vx, vy) is the agent's current velocity; it selects which boundary
    piece of each velocity obstacle carries the constraint.
    """
    nc0 = cand.shape[0]
    d = np.empty(nc0, np.float64)
    order = np.empty(nc0, np.int64)
    nc = 0
    for i in range(nc0):
        s = cand[i]
        ds = _pt_seg_dist_sq(px, py, segs[s, 0], segs[s, 1], segs[s, 2], segs[s, 3])
        if ds > range_sq:
            continue
        # skip back-facing segments (agent strictly on the blocked side);
        # the front boundary always lies between and carries the constraint
        if segs[s, 4] * (py - segs[s, 1]) - segs[s, 5] * (px - segs[s, 0]) > 0.0:
            continue
        d[nc] = ds
        order[nc] = s
        nc += 1
    for i in range(1, nc):
        dv = d[i]
        ov = order[i]
        j = i - 1
        while j >= 0 and (d[j] > dv or (d[j] == dv and order[j] > ov)):
            d[j + 1] = d[j]
            order[j + 1] = order[j]
            j -= 1
        d[j + 1] = dv
        order[j + 1] = ov

    m = 0
    r_sq = rad * rad
    for ci in range(nc):
        s = order[ci]
        p1x = segs[s, 0] - px
        p1y = segs[s, 1] - py
        p2x = segs[s, 2] - px
        p2y = segs[s, 3] - py

        covered = False
        for j in range(m):
            q1 = (inv_tau * p1x - lines[j, 0]) * lines[j, 3] - (inv_tau * p1y - lines[j, 1]) * lines[j, 2]
            q2 = (inv_tau * p2x - lines[j, 0]) * lines[j, 3] - (inv_tau * p2y - lines[j, 1]) * lines[j, 2]
            if q1 - inv_tau * rad >= -COVER_EPS and q2 - inv_tau * rad >= -COVER_EPS:
                covered = True
                break
        if covered:
            continue

        dist_sq1 = p1x * p1x + p1y * p1y
        dist_sq2 = p2x * p2x + p2y * p2y
        obx = segs[s, 2] - segs[s, 0]
        oby = segs[s, 3] - segs[s, 1]
        ob_sq = obx * obx + oby * oby
        sp = 0.5 if ob_sq == 0.0 else -(p1x * obx + p1y * oby) / ob_sq
        dlx = -p1x - sp * obx
        dly = -p1y - sp * oby
        dist_sq_line = dlx * dlx + dly * dly

        ux_ = segs[s, 4]
        uy_ = segs[s, 5]
        pux = segs[s, 6]
        puy = segs[s, 7]
        nux = segs[s, 8]
        nuy = segs[s, 9]
        conv1 = segs[s, 10] != 0.0
        conv2 = segs[s, 11] != 0.0

        if sp < 0.0 and dist_sq1 <= r_sq:
            # collision with the left endpoint
            if conv1 and dist_sq1 > 1e-24:
                ln = math.sqrt(dist_sq1)
                lines[m, 0] = 0.0
                lines[m, 1] = 0.0
                lines[m, 2] = -p1y / ln
                lines[m, 3] = p1x / ln
                m += 1
            continue
        elif sp > 1.0 and dist_sq2 <= r_sq:
            # collision with the right endpoint (deferred to the next segment
            # when the agent sits on its side)
            if conv2 and p2x * nuy - p2y * nux >= 0.0 and dist_sq2 > 1e-24:
                ln = math.sqrt(dist_sq2)
                lines[m, 0] = 0.0
                lines[m, 1] = 0.0
                lines[m, 2] = -p2y / ln
                lines[m, 3] = p2x / ln
                m += 1
            continue
        elif 0.0 <= sp <= 1.0 and dist_sq_line <= r_sq:
            # collision with the segment interior
            lines[m, 0] = 0.0
            lines[m, 1] = 0.0
            lines[m, 2] = -ux_
            lines[m, 3] = -uy_
            m += 1
            continue

        # No collision: build the two legs of the truncated velocity obstacle.
        same_vertex = False
        if sp < 0.0 and dist_sq_line <= r_sq:
            # obliquely viewed, both legs from the left endpoint
            if not conv1:
                continue
            same_vertex = True
            p2x = p1x
            p2y = p1y
            leg1 = math.sqrt(dist_sq1 - r_sq)
            llx = (p1x * leg1 - p1y * rad) / dist_sq1
            lly = (p1x * rad + p1y * leg1) / dist_sq1
            rlx = (p1x * leg1 + p1y * rad) / dist_sq1
            rly = (-p1x * rad + p1y * leg1) / dist_sq1
            conv1_eff = conv1
            conv2_eff = conv1
            pu1x = pux
            pu1y = puy
            u2x = ux_
            u2y = uy_
        elif sp > 1.0 and dist_sq_line <= r_sq:
            # obliquely viewed, both legs from the right endpoint
            if not conv2:
                continue
            same_vertex = True
            p1x = p2x
            p1y = p2y
            leg2 = math.sqrt(dist_sq2 - r_sq)
            llx = (p1x * leg2 - p1y * rad) / dist_sq2
            lly = (p1x * rad + p1y * leg2) / dist_sq2
            rlx = (p1x * leg2 + p1y * rad) / dist_sq2
            rly = (-p1x * rad + p1y * leg2) / dist_sq2
            conv1_eff = conv2
            conv2_eff = conv2
            pu1x = ux_
            pu1y = uy_
            u2x = nux
            u2y = nuy
        else:
            if conv1:
                leg1 = math.sqrt(dist_sq1 - r_sq)
                llx = (p1x * leg1 - p1y * rad) / dist_sq1
                lly = (p1x * rad + p1y * leg1) / dist_sq1
            else:
                llx = -ux_
                lly = -uy_
            if conv2:
                leg2 = math.sqrt(dist_sq2 - r_sq)
                rlx = (p2x * leg2 + p2y * rad) / dist_sq2
                rly = (-p2x * rad + p2y * leg2) / dist_sq2
            else:
                rlx = ux_
                rly = uy_
            conv1_eff = conv1
            conv2_eff = conv2
            pu1x = pux
            pu1y = puy
            u2x = nux
            u2y = nuy

        # Legs pointing into a neighboring edge are replaced by that edge
        # ("foreign" legs constrain but get no line of their own).
        left_foreign = False
        right_foreign = False
        if conv1_eff and llx * (-pu1y) - lly * (-pu1x) >= 0.0:
            llx = -pu1x
            lly = -pu1y
            left_foreign = True
        if conv2_eff and rlx * u2y - rly * u2x <= 0.0:
            rlx = u2x
            rly = u2y
            right_foreign = True

        lcx = inv_tau * p1x
        lcy = inv_tau * p1y
        rcx = inv_tau * p2x
        rcy = inv_tau * p2y
        cvx = rcx - lcx
        cvy = rcy - lcy
        cut_sq = cvx * cvx + cvy * cvy
        if same_vertex or cut_sq == 0.0:
            t = 0.5
            same_vertex = True
        else:
            t = ((vx - lcx) * cvx + (vy - lcy) * cvy) / cut_sq
        t_left = (vx - lcx) * llx + (vy - lcy) * lly
        t_right = (vx - rcx) * rlx + (vy - rcy) * rly

        if (t < 0.0 and t_left < 0.0) or (same_vertex and t_left < 0.0 and t_right < 0.0):
            wx = vx - lcx
            wy = vy - lcy
            wl = math.sqrt(wx * wx + wy * wy)
            if wl > 1e-12:
                uwx = wx / wl
                uwy = wy / wl
            else:
                ln = math.sqrt(dist_sq1)
                uwx = -p1x / ln
                uwy = -p1y / ln
            lines[m, 0] = lcx + rad * inv_tau * uwx
            lines[m, 1] = lcy + rad * inv_tau * uwy
            lines[m, 2] = uwy
            lines[m, 3] = -uwx
            m += 1
            continue
        elif t > 1.0 and t_right < 0.0:
            wx = vx - rcx
            wy = vy - rcy
            wl = math.sqrt(wx * wx + wy * wy)
            if wl > 1e-12:
                uwx = wx / wl
                uwy = wy / wl
            else:
                ln = math.sqrt(dist_sq2)
                uwx = -p2x / ln
                uwy = -p2y / ln
            lines[m, 0] = rcx + rad * inv_tau * uwx
            lines[m, 1] = rcy + rad * inv_tau * uwy
            lines[m, 2] = uwy
            lines[m, 3] = -uwx
            m += 1
            continue

        dsq_cut = INF
        if not same_vertex and 0.0 <= t <= 1.0:
            qx = vx - (lcx + t * cvx)
            qy = vy - (lcy + t * cvy)
            dsq_cut = qx * qx + qy * qy
        dsq_left = INF
        if t_left >= 0.0:
            qx = vx - (lcx + t_left * llx)
            qy = vy - (lcy + t_left * lly)
            dsq_left = qx * qx + qy * qy
        dsq_right = INF
        if t_right >= 0.0:
            qx = vx - (rcx + t_right * rlx)
            qy = vy - (rcy + t_right * rly)
            dsq_right = qx * qx + qy * qy

        if dsq_cut <= dsq_left and dsq_cut <= dsq_right:
            lines[m, 0] = lcx + rad * inv_tau * uy_
            lines[m, 1] = lcy + rad * inv_tau * (-ux_)
            lines[m, 2] = -ux_
            lines[m, 3] = -uy_
            m += 1
        elif dsq_left <= dsq_right:
            if left_foreign:
                continue
            lines[m, 0] = lcx + rad * inv_tau * (-lly)
            lines[m, 1] = lcy + rad * inv_tau * llx
            lines[m, 2] = llx
            lines[m, 3] = lly
            m += 1
        else:
            if right_foreign:
                continue
            lines[m, 0] = rcx + rad * inv_tau * (-rly)
            lines[m, 1] = rcy + rad * inv_tau * rlx
            lines[m, 2] = rlx
            lines[m, 3] = rly
            m += 1
    return m


@njit(cache=True)
def _lp1(lines, line_no, radius, optx, opty, dir_opt, res):
    """Optimize on one line subject to the disk and the lines before it."""
    px = lines[line_no, 0]
    py = lines[line_no, 1]
    dx = lines[line_no, 2]
    dy = lines[line_no, 3]
    dot = px * dx + py * dy
    disc = dot * dot + radius * radius - (px * px + py * py)
    if disc < 0.0:
        return False
    sq = math.sqrt(disc)
    t_left = -dot - sq
    t_right = -dot + sq
    for i in range(line_no):
        denom = dx * lines[i, 3] - dy * lines[i, 2]
        numer = lines[i, 2] * (py - lines[i, 1]) - lines[i, 3] * (px - lines[i, 0])
        if abs(denom) <= DET_EPS:
            if numer < 0.0:
                return False
            continue
        t = numer / denom
        if denom >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return False
    if dir_opt:
        t = t_right if optx * dx + opty * dy > 0.0 else t_left
    else:
        t = dx * (optx - px) + dy * (opty - py)
        if t < t_left:
            t = t_left
        elif t > t_right:
            t = t_right
    res[0] = px + t * dx
    res[1] = py + t * dy
    return True


@njit(cache=True)
def _lp2(lines, n, radius, optx, opty, dir_opt, res):
    """Incremental 2D LP; returns n on success, else the index of failure."""
    if dir_opt:
        res[0] = optx * radius
        res[1] = opty * radius
    elif optx * optx + opty * opty > radius * radius:
        norm = math.sqrt(optx * optx + opty * opty)
        res[0] = optx / norm * radius
        res[1] = opty / norm * radius
    else:
        res[0] = optx
        res[1] = opty
    for i in range(n):
        if lines[i, 2] * (lines[i, 1] - res[1]) - lines[i, 3] * (lines[i, 0] - res[0]) > 0.0:
            tx = res[0]
            ty = res[1]
            if not _lp1(lines, i, radius, optx, opty, dir_opt, res):
                res[0] = tx
                res[1] = ty
                return i
    return n


@njit(cache=True)
def _lp3(lines, n, num_obst, begin, radius, res):
    """Least-violation fallback; the first num_obst lines stay hard."""
    dist = 0.0
    for i in range(begin, n):
        if lines[i, 2] * (lines[i, 1] - res[1]) - lines[i, 3] * (lines[i, 0] - res[0]) > dist:
            proj = np.empty((num_obst + i, 4), np.float64)
            for k in range(num_obst):
                proj[k, 0] = lines[k, 0]
                proj[k, 1] = lines[k, 1]
                proj[k, 2] = lines[k, 2]
                proj[k, 3] = lines[k, 3]
            pn = num_obst
            for j in range(num_obst, i):
                det_ij = lines[i, 2] * lines[j, 3] - lines[i, 3] * lines[j, 2]
                if abs(det_ij) <= DET_EPS:
                    if lines[i, 2] * lines[j, 2] + lines[i, 3] * lines[j, 3] > 0.0:
                        continue
                    proj[pn, 0] = 0.5 * (lines[i, 0] + lines[j, 0])
                    proj[pn, 1] = 0.5 * (lines[i, 1] + lines[j, 1])
                else:
                    sj = (lines[j, 2] * (lines[i, 1] - lines[j, 1])
                          - lines[j, 3] * (lines[i, 0] - lines[j, 0])) / det_ij
                    proj[pn, 0] = lines[i, 0] + sj * lines[i, 2]
                    proj[pn, 1] = lines[i, 1] + sj * lines[i, 3]
                ddx = lines[j, 2] - lines[i, 2]
                ddy = lines[j, 3] - lines[i, 3]
                nrm = math.sqrt(ddx * ddx + ddy * ddy)
                proj[pn, 2] = ddx / nrm
                proj[pn, 3] = ddy / nrm
                pn += 1
            tx = res[0]
            ty = res[1]
            if _lp2(proj, pn, radius, -lines[i, 3], lines[i, 2], True, res) < pn:
                res[0] = tx
                res[1] = ty
            dist = lines[i, 2] * (lines[i, 1] - res[1]) - lines[i, 3] * (lines[i, 0] - res[0])


@njit(cache=True)
def solve_velocity_lines(lines, n, num_obst, vpx, vpy, vmax):
    """Closest feasible velocity to (vpx, vpy) inside the vmax disk.

    If even the hard prefix is jointly infeasible (the failure index lands
    inside it), the prefix is truncated at the failure point so the fallback
    still returns a bounded least-violation answer.
    """
    res = np.empty(2, np.float64)
    fail = _lp2(lines, n, vmax, vpx, vpy, False, res)
    if fail < n:
        _lp3(lines, n, min(num_obst, fail), fail, vmax, res)
    speed = math.sqrt(res[0] * res[0] + res[1] * res[1])
    if speed > vmax:
        res[0] *= vmax / speed
        res[1] *= vmax / speed
    return res


@njit(cache=True)
def step_velocities_kernel(pos, vel, radius, ids, orca_mask, targets,
                           nbr_start, nbr_idx, segs, cand_start, cand_idx,
                           tau, tau_obst, dt, vmax, r_obst, out):
    """Velocity commands for every ORCA-driven agent in one simulation step.

    Reads a frozen snapshot (pos/vel) and writes into out; rows where
    orca_mask is 0 are left untouched.
    """
    n = pos.shape[0]
    for a in range(n):
        if orca_mask[a] == 0:
            continue
        tx = targets[a, 0] - pos[a, 0]
        ty = targets[a, 1] - pos[a, 1]
        dist = math.sqrt(tx * tx + ty * ty)
        if dist > 1e-15:
            sp = min(vmax, dist / dt)
            vpx = tx / dist * sp
            vpy = ty / dist * sp
        else:
            vpx = 0.0
            vpy = 0.0
        k_n = nbr_start[a + 1] - nbr_start[a]
        k_c = cand_start[a + 1] - cand_start[a]
        lines = np.empty((k_n + k_c + 2, 4), np.float64)
        cand = cand_idx[cand_start[a]:cand_start[a + 1]]
        reach = tau_obst * vmax + r_obst
        m_obst = _obstacle_lines(pos[a, 0], pos[a, 1], vel[a, 0], vel[a, 1],
                                 r_obst, 1.0 / tau_obst, segs, cand, lines,
                                 reach * reach)
        nbr = np.empty((k_n, 6), np.float64)
        for q in range(k_n):
            b = nbr_idx[nbr_start[a] + q]
            nbr[q, 0] = pos[b, 0]
            nbr[q, 1] = pos[b, 1]
            nbr[q, 2] = vel[b, 0]
            nbr[q, 3] = vel[b, 1]
            nbr[q, 4] = radius[b]
            nbr[q, 5] = ids[b]
        m_hard = _agent_lines(pos[a, 0], pos[a, 1], vel[a, 0], vel[a, 1],
                              radius[a], ids[a], nbr, tau, dt, lines, m_obst, 1)
        m = _agent_lines(pos[a, 0], pos[a, 1], vel[a, 0], vel[a, 1],
                         radius[a], ids[a], nbr, tau, dt, lines, m_hard, 0)
        res = np.empty(2, np.float64)
        fail = _lp2(lines, m, vmax, vpx, vpy, False, res)
        if fail < m:
            _lp3(lines, m, min(m_hard, fail), fail, vmax, res)
        speed = math.sqrt(res[0] * res[0] + res[1] * res[1])
        if speed > vmax:
            res[0] *= vmax / speed
            res[1] *= vmax / speed
        out[a, 0] = res[0]
        out[a, 1] = res[1]
