"""Compiled numerical core shared by the public intersection API, the
software renderer, picking, and SASA.

Everything here is deterministic: no fastmath, no thread-order-dependent
reductions. Scalars in, scalars out; callers own array packing.

Primitive param rows are 10 wide:
  sphere        [cx, cy, cz, r, 0...]
  rounded_cone  [p0, r0, p1, r1, 0, 0]
  quad_swept    [b0, b1, b2, r]
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

KIND_SPHERE = 0
KIND_ROUNDED_CONE = 1
KIND_QUAD_SWEPT = 2

HIT_NONE = 0
HIT_SURFACE = 1
HIT_CAP = 2
HIT_NONCONV = 3

T_MIN = 1e-9
BIG = 1e30

QUAD_TOL = 1e-7  # marching acceptance; well inside the 1e-4 contract
QUAD_MAX_STEPS = 256


# ---------------------------------------------------------------------------
# sphere

@njit(cache=True)
def sphere_interval(ox, oy, oz, dx, dy, dz, cx, cy, cz, r):
    """Full-line entry/exit parameters. Returns (found, t0, t1)."""
    fx = ox - cx
    fy = oy - cy
    fz = oz - cz
    b = fx * dx + fy * dy + fz * dz
    c = fx * fx + fy * fy + fz * fz - r * r
    disc = b * b - c
    if disc < 0.0:
        return False, 0.0, 0.0
    q = math.sqrt(disc)
    # avoid cancellation: compute the large-magnitude root first
    if b >= 0.0:
        t0 = -b - q
    else:
        t0 = -b + q
    if t0 != 0.0:
        t1 = c / t0
    else:
        t1 = 0.0
    if t0 > t1:
        t0, t1 = t1, t0
    return True, t0, t1


# ---------------------------------------------------------------------------
# rounded cone (convex hull of two spheres)

@njit(cache=True)
def cone_interval(ox, oy, oz, dx, dy, dz,
                  ax, ay, az, ra, bx, by, bz, rb):
    """Entry/exit of the hull of spheres (a, ra), (b, rb) with normals.

    Returns (found, t_in, t_out, nix, niy, niz, nox_, noy_, noz_).
    The body is convex, so the valid boundary crossings along the full
    line are the interval ends; candidates come from the conical side
    (quadric roots with axial-range check) and the two sphere caps
    (roots outside the tangency circles).
    """
    bax = bx - ax
    bay = by - ay
    baz = bz - az
    m0 = bax * bax + bay * bay + baz * baz
    rr = ra - rb
    d2 = m0 - rr * rr
    if d2 <= 1e-300:
        # one sphere swallows the other: hull is just the bigger sphere
        if ra >= rb:
            cx, cy, cz, r = ax, ay, az, ra
        else:
            cx, cy, cz, r = bx, by, bz, rb
        found, t0, t1 = sphere_interval(ox, oy, oz, dx, dy, dz, cx, cy, cz, r)
        if not found:
            return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
        p0x = ox + t0 * dx - cx
        p0y = oy + t0 * dy - cy
        p0z = oz + t0 * dz - cz
        p1x = ox + t1 * dx - cx
        p1y = oy + t1 * dy - cy
        p1z = oz + t1 * dz - cz
        return True, t0, t1, p0x / r, p0y / r, p0z / r, p1x / r, p1y / r, p1z / r

    oax = ox - ax
    oay = oy - ay
    oaz = oz - az
    obx = ox - bx
    oby = oy - by
    obz = oz - bz
    m1 = bax * oax + bay * oay + baz * oaz
    m2 = bax * dx + bay * dy + baz * dz
    m3 = dx * oax + dy * oay + dz * oaz
    m5 = oax * oax + oay * oay + oaz * oaz
    m6 = obx * dx + oby * dy + obz * dz
    m7 = obx * obx + oby * oby + obz * obz

    cand_t = np.empty(6)
    cand_n = np.empty((6, 3))
    ncand = 0

    # conical side: k2 t^2 + 2 k1 t + k0 = 0, hit valid for y in [0, d2]
    k2 = d2 - m2 * m2
    k1 = d2 * m3 - m1 * m2 + m2 * rr * ra
    k0 = d2 * m5 - m1 * m1 + 2.0 * m1 * rr * ra - m0 * ra * ra
    if abs(k2) > 1e-14 * d2:
        h = k1 * k1 - k0 * k2
        if h >= 0.0:
            sq = math.sqrt(h)
            for sgn in range(2):
                t = (-k1 - sq) / k2 if sgn == 0 else (-k1 + sq) / k2
                y = m1 - ra * rr + t * m2
                if 0.0 <= y <= d2:
                    px = oax + t * dx
                    py = oay + t * dy
                    pz = oaz + t * dz
                    nx = d2 * px - bax * y
                    ny = d2 * py - bay * y
                    nz = d2 * pz - baz * y
                    nl = math.sqrt(nx * nx + ny * ny + nz * nz)
                    if nl > 0.0:
                        cand_t[ncand] = t
                        cand_n[ncand, 0] = nx / nl
                        cand_n[ncand, 1] = ny / nl
                        cand_n[ncand, 2] = nz / nl
                        ncand += 1
    elif abs(k1) > 1e-300:
        t = -0.5 * k0 / k1
        y = m1 - ra * rr + t * m2
        if 0.0 <= y <= d2:
            px = oax + t * dx
            py = oay + t * dy
            pz = oaz + t * dz
            nx = d2 * px - bax * y
            ny = d2 * py - bay * y
            nz = d2 * pz - baz * y
            nl = math.sqrt(nx * nx + ny * ny + nz * nz)
            if nl > 0.0:
                cand_t[ncand] = t
                cand_n[ncand, 0] = nx / nl
                cand_n[ncand, 1] = ny / nl
                cand_n[ncand, 2] = nz / nl
                ncand += 1

    # sphere a cap: valid where the point sits outside the tangency circle
    h1 = m3 * m3 - m5 + ra * ra
    if h1 >= 0.0:
        sq = math.sqrt(h1)
        for sgn in range(2):
            t = -m3 - sq if sgn == 0 else -m3 + sq
            px = oax + t * dx
            py = oay + t * dy
            pz = oaz + t * dz
            if px * bax + py * bay + pz * baz <= ra * rr:
                cand_t[ncand] = t
                cand_n[ncand, 0] = px / ra
                cand_n[ncand, 1] = py / ra
                cand_n[ncand, 2] = pz / ra
                ncand += 1

    h2 = m6 * m6 - m7 + rb * rb
    if h2 >= 0.0:
        sq = math.sqrt(h2)
        for sgn in range(2):
            t = -m6 - sq if sgn == 0 else -m6 + sq
            px = obx + t * dx
            py = oby + t * dy
            pz = obz + t * dz
            if px * bax + py * bay + pz * baz >= rb * rr:
                cand_t[ncand] = t
                cand_n[ncand, 0] = px / rb
                cand_n[ncand, 1] = py / rb
                cand_n[ncand, 2] = pz / rb
                ncand += 1

    if ncand == 0:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    i_in = 0
    i_out = 0
    for i in range(1, ncand):
        if cand_t[i] < cand_t[i_in]:
            i_in = i
        if cand_t[i] > cand_t[i_out]:
            i_out = i
    return (True, cand_t[i_in], cand_t[i_out],
            cand_n[i_in, 0], cand_n[i_in, 1], cand_n[i_in, 2],
            cand_n[i_out, 0], cand_n[i_out, 1], cand_n[i_out, 2])


# ---------------------------------------------------------------------------
# swept quadratic segment

@njit(cache=True)
def _cubic_smallest_dist2(a3, a2, a1, a0,
                          ax, ay, az, bvx, bvy, bvz, cx, cy, cz):
    """Min over s in [0,1] of |c + 2sA + s^2 Bv|^2 with the cubic's real
    roots as interior candidates. Returns (dist2, s)."""
    best_s = 0.0
    best_d = cx * cx + cy * cy + cz * cz  # s = 0
    ex = cx + 2.0 * ax + bvx
    ey = cy + 2.0 * ay + bvy
    ez = cz + 2.0 * az + bvz
    d1 = ex * ex + ey * ey + ez * ez  # s = 1
    if d1 < best_d:
        best_d = d1
        best_s = 1.0

    roots = np.empty(3)
    nroots = 0
    scale = max(abs(a3), abs(a2), abs(a1), abs(a0))
    if scale == 0.0:
        return best_d, best_s
    if abs(a3) > 1e-12 * scale:
        p_ = a2 / a3
        q_ = a1 / a3
        r_ = a0 / a3
        p = q_ - p_ * p_ / 3.0
        q = 2.0 * p_ * p_ * p_ / 27.0 - p_ * q_ / 3.0 + r_
        shift = -p_ / 3.0
        disc = 0.25 * q * q + p * p * p / 27.0
        if disc > 0.0:
            sq = math.sqrt(disc)
            u = -0.5 * q + sq
            v = -0.5 * q - sq
            cu = math.copysign(abs(u) ** (1.0 / 3.0), u)
            cv = math.copysign(abs(v) ** (1.0 / 3.0), v)
            roots[0] = cu + cv + shift
            nroots = 1
        else:
            m = 2.0 * math.sqrt(max(-p / 3.0, 0.0))
            if m == 0.0:
                roots[0] = shift
                nroots = 1
            else:
                arg = 3.0 * q / (p * m)
                if arg > 1.0:
                    arg = 1.0
                elif arg < -1.0:
                    arg = -1.0
                theta = math.acos(arg) / 3.0
                for k in range(3):
                    roots[nroots] = m * math.cos(theta - 2.0943951023931953 * k) + shift
                    nroots += 1
    elif abs(a2) > 1e-12 * scale:
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc >= 0.0:
            sq = math.sqrt(disc)
            roots[0] = (-a1 - sq) / (2.0 * a2)
            roots[1] = (-a1 + sq) / (2.0 * a2)
            nroots = 2
    elif abs(a1) > 1e-12 * scale:
        roots[0] = -a0 / a1
        nroots = 1

    for i in range(nroots):
        s = roots[i]
        if s <= 0.0 or s >= 1.0:
            continue
        fx = cx + 2.0 * s * ax + s * s * bvx
        fy = cy + 2.0 * s * ay + s * s * bvy
        fz = cz + 2.0 * s * az + s * s * bvz
        d = fx * fx + fy * fy + fz * fz
        if d < best_d:
            best_d = d
            best_s = s
    return best_d, best_s


@njit(cache=True)
def quad_closest(px, py, pz,
                 b0x, b0y, b0z, b1x, b1y, b1z, b2x, b2y, b2z):
    """Closest point on the quadratic segment. Returns (dist, s)."""
    ax = b1x - b0x
    ay = b1y - b0y
    az = b1z - b0z
    bvx = b0x - 2.0 * b1x + b2x
    bvy = b0y - 2.0 * b1y + b2y
    bvz = b0z - 2.0 * b1z + b2z
    cx = b0x - px
    cy = b0y - py
    cz = b0z - pz
    a3 = bvx * bvx + bvy * bvy + bvz * bvz
    a2 = 3.0 * (ax * bvx + ay * bvy + az * bvz)
    a1 = 2.0 * (ax * ax + ay * ay + az * az) + (cx * bvx + cy * bvy + cz * bvz)
    a0 = cx * ax + cy * ay + cz * az
    d2, s = _cubic_smallest_dist2(a3, a2, a1, a0, ax, ay, az,
                                  bvx, bvy, bvz, cx, cy, cz)
    return math.sqrt(d2), s


@njit(cache=True)
def _quad_point(s, b0x, b0y, b0z, b1x, b1y, b1z, b2x, b2y, b2z):
    u = 1.0 - s
    return (u * u * b0x + 2.0 * u * s * b1x + s * s * b2x,
            u * u * b0y + 2.0 * u * s * b1y + s * s * b2y,
            u * u * b0z + 2.0 * u * s * b1z + s * s * b2z)


@njit(cache=True)
def quad_sdf(px, py, pz, P):
    """Signed distance to the sweep of radius P[9] along the segment."""
    dist, _ = quad_closest(px, py, pz, P[0], P[1], P[2], P[3], P[4], P[5],
                           P[6], P[7], P[8])
    return dist - P[9]


@njit(cache=True)
def quad_march(ox, oy, oz, dx, dy, dz, P, t_start, t_limit):
    """First boundary crossing at t >= t_start by sphere tracing.

    The distance field is exact (Lipschitz 1), so stepping by its value
    cannot overshoot. A Newton-style step accelerates grazing rays and
    is kept only when the distance spheres at both of its ends cover
    the jump; anything else is redone as a plain step, so a crossing
    can never be skipped.
    Returns (status, t, nx, ny, nz); HIT_NONCONV means the step budget
    ran out while still near the surface.
    """
    t = t_start
    t_prev = t_start
    phi_prev = 0.0
    pending = False
    for _ in range(QUAD_MAX_STEPS):
        if t > t_limit and not pending:
            return HIT_NONE, 0.0, 0.0, 0.0, 0.0
        px = ox + t * dx
        py = oy + t * dy
        pz = oz + t * dz
        dist, s = quad_closest(px, py, pz, P[0], P[1], P[2], P[3], P[4],
                               P[5], P[6], P[7], P[8])
        phi = dist - P[9]
        if pending:
            pending = False
            cover = phi if phi > 0.0 else 0.0
            if phi_prev + cover < t - t_prev:
                t = t_prev + phi_prev
                continue
            if t > t_limit:
                return HIT_NONE, 0.0, 0.0, 0.0, 0.0
        if phi < QUAD_TOL:
            if phi > -4.0 * QUAD_TOL:
                cxp, cyp, czp = _quad_point(s, P[0], P[1], P[2], P[3], P[4],
                                            P[5], P[6], P[7], P[8])
                nx = px - cxp
                ny = py - cyp
                nz = pz - czp
                nl = math.sqrt(nx * nx + ny * ny + nz * nz)
                if nl == 0.0:
                    return HIT_SURFACE, t, 0.0, 0.0, 1.0
                return HIT_SURFACE, t, nx / nl, ny / nl, nz / nl
            # unreachable when starting outside; report rather than loop
            return HIT_NONCONV, 0.0, 0.0, 0.0, 0.0
        t_prev = t
        phi_prev = phi
        step = phi
        if dist > 0.0:
            # directional derivative of the field along the ray
            cxp, cyp, czp = _quad_point(s, P[0], P[1], P[2], P[3], P[4],
                                        P[5], P[6], P[7], P[8])
            gd = ((px - cxp) * dx + (py - cyp) * dy + (pz - czp) * dz) / dist
            if gd < -0.1:
                newton = -phi / gd
                if newton > step:
                    step = min(newton, 8.0 * phi)
                    pending = True
        t += step
    # ran out of steps: only suspicious if we were still close to the tube
    px = ox + t * dx
    py = oy + t * dy
    pz = oz + t * dz
    if quad_sdf(px, py, pz, P) < 64.0 * QUAD_TOL:
        return HIT_NONCONV, 0.0, 0.0, 0.0, 0.0
    return HIT_NONE, 0.0, 0.0, 0.0, 0.0


@njit(cache=True)
def quad_march_exit(ox, oy, oz, dx, dy, dz, P, t_start, t_limit):
    """Exit crossing for a ray starting inside the sweep; bisection on
    the bracket found by interior marching."""
    t_in = t_start
    t = t_start
    for _ in range(QUAD_MAX_STEPS):
        px = ox + t * dx
        py = oy + t * dy
        pz = oz + t * dz
        phi = quad_sdf(px, py, pz, P)
        if phi >= 0.0:
            break
        t_in = t
        t = t + max(-phi, QUAD_TOL)
        if t > t_limit:
            return HIT_NONE, 0.0, 0.0, 0.0, 0.0
    else:
        return HIT_NONCONV, 0.0, 0.0, 0.0, 0.0
    t_out = t
    for _ in range(80):
        tm = 0.5 * (t_in + t_out)
        pm = quad_sdf(ox + tm * dx, oy + tm * dy, oz + tm * dz, P)
        if pm < 0.0:
            t_in = tm
        else:
            t_out = tm
        if t_out - t_in < 1e-12 * max(1.0, t_out):
            break
    t = t_out
    px = ox + t * dx
    py = oy + t * dy
    pz = oz + t * dz
    dist, s = quad_closest(px, py, pz, P[0], P[1], P[2], P[3], P[4], P[5],
                           P[6], P[7], P[8])
    cxp, cyp, czp = _quad_point(s, P[0], P[1], P[2], P[3], P[4], P[5],
                                P[6], P[7], P[8])
    nx = px - cxp
    ny = py - cyp
    nz = pz - czp
    nl = math.sqrt(nx * nx + ny * ny + nz * nz)
    if nl == 0.0:
        return HIT_SURFACE, t, 0.0, 0.0, 1.0
    return HIT_SURFACE, t, nx / nl, ny / nl, nz / nl


@njit(cache=True)
def quad_bound(P):
    """Bounding sphere: control points lie in the hull, so centering on
    their centroid and covering all three plus the radius is safe."""
    cx = (P[0] + P[3] + P[6]) / 3.0
    cy = (P[1] + P[4] + P[7]) / 3.0
    cz = (P[2] + P[5] + P[8]) / 3.0
    r2 = 0.0
    for k in range(3):
        ddx = P[3 * k] - cx
        ddy = P[3 * k + 1] - cy
        ddz = P[3 * k + 2] - cz
        q = ddx * ddx + ddy * ddy + ddz * ddz
        if q > r2:
            r2 = q
    return cx, cy, cz, math.sqrt(r2) + P[9]


# ---------------------------------------------------------------------------
# clipping

@njit(cache=True)
def kept_interval(ox, oy, oz, dx, dy, dz, plane_n, plane_off, lo, hi):
    """Intersect the ray's [lo, hi] window with every kept half-space
    (n.x <= off). Returns (nonempty, L, H, cut_idx) where cut_idx is the
    plane that raised L, or -1 if L is the original window start."""
    L = lo
    H = hi
    cut = -1
    for i in range(plane_n.shape[0]):
        nd = plane_n[i, 0] * dx + plane_n[i, 1] * dy + plane_n[i, 2] * dz
        no = plane_n[i, 0] * ox + plane_n[i, 1] * oy + plane_n[i, 2] * oz
        rem = plane_off[i] - no
        if nd > 1e-300:
            tt = rem / nd
            if tt < H:
                H = tt
        elif nd < -1e-300:
            tt = rem / nd
            if tt > L:
                L = tt
                cut = i
        else:
            if rem < 0.0:
                return False, 0.0, 0.0, -1
    if L > H:
        return False, 0.0, 0.0, -1
    return True, L, H, cut


@njit(cache=True)
def primitive_first_hit(ox, oy, oz, dx, dy, dz, kind, P,
                        L, H, cut_nx, cut_ny, cut_nz, has_cut):
    """Nearest visible hit of one primitive inside the ray window [L, H].

    A crossing inside the window is a surface hit; a window start that
    falls in the primitive's interior becomes a cap on the cutting plane
    (when one raised L) or, for a camera inside the body, the exit.
    Returns (status, t, nx, ny, nz) with status HIT_*.
    """
    if kind == KIND_QUAD_SWEPT:
        bx, by, bz, br = quad_bound(P)
        found, s0, s1 = sphere_interval(ox, oy, oz, dx, dy, dz, bx, by, bz, br)
        if not found or s1 < L or s0 > H:
            return HIT_NONE, 0.0, 0.0, 0.0, 0.0
        start = L if L > s0 else s0
        limit = H if H < s1 else s1
        phi0 = quad_sdf(ox + L * dx, oy + L * dy, oz + L * dz, P)
        if phi0 < 0.0:
            if has_cut:
                nx, ny, nz = cut_nx, cut_ny, cut_nz
                if nx * dx + ny * dy + nz * dz > 0.0:
                    nx, ny, nz = -nx, -ny, -nz
                return HIT_CAP, L, nx, ny, nz
            return quad_march_exit(ox, oy, oz, dx, dy, dz, P, L, limit)
        return quad_march(ox, oy, oz, dx, dy, dz, P, start, limit)

    if kind == KIND_SPHERE:
        found, t0, t1 = sphere_interval(ox, oy, oz, dx, dy, dz,
                                        P[0], P[1], P[2], P[3])
        if not found:
            return HIT_NONE, 0.0, 0.0, 0.0, 0.0
        inv_r = 1.0 / P[3]
        n0x = (ox + t0 * dx - P[0]) * inv_r
        n0y = (oy + t0 * dy - P[1]) * inv_r
        n0z = (oz + t0 * dz - P[2]) * inv_r
        n1x = (ox + t1 * dx - P[0]) * inv_r
        n1y = (oy + t1 * dy - P[1]) * inv_r
        n1z = (oz + t1 * dz - P[2]) * inv_r
    else:
        found, t0, t1, n0x, n0y, n0z, n1x, n1y, n1z = cone_interval(
            ox, oy, oz, dx, dy, dz,
            P[0], P[1], P[2], P[3], P[4], P[5], P[6], P[7])
        if not found:
            return HIT_NONE, 0.0, 0.0, 0.0, 0.0

    if t1 < L or t0 > H:
        return HIT_NONE, 0.0, 0.0, 0.0, 0.0
    if t0 >= L:
        return HIT_SURFACE, t0, n0x, n0y, n0z
    # entry is outside the window but the interior reaches past L
    if has_cut:
        nx, ny, nz = cut_nx, cut_ny, cut_nz
        if nx * dx + ny * dy + nz * dz > 0.0:
            nx, ny, nz = -nx, -ny, -nz
        return HIT_CAP, L, nx, ny, nz
    if t1 <= H:
        return HIT_SURFACE, t1, n1x, n1y, n1z
    return HIT_NONE, 0.0, 0.0, 0.0, 0.0


# ---------------------------------------------------------------------------
# scene-level nearest hit over a candidate list

@njit(cache=True)
def nearest_hit(ox, oy, oz, dx, dy, dz,
                cand, kinds, params, bin_ids, visible, exempt,
                plane_n, plane_off, lo, hi):
    """Lexicographic (t, prim_index) minimum over the candidates.

    Returns (status, t, nx, ny, nz, prim_idx, nonconv_count).
    """
    okc, Lc, Hc, cutc = kept_interval(ox, oy, oz, dx, dy, dz,
                                      plane_n, plane_off, lo, hi)
    cnx = cny = cnz = 0.0
    if cutc >= 0:
        cnx = plane_n[cutc, 0]
        cny = plane_n[cutc, 1]
        cnz = plane_n[cutc, 2]
    best_t = BIG
    best_idx = -1
    best_status = HIT_NONE
    bnx = bny = bnz = 0.0
    nonconv = 0
    for j in range(cand.shape[0]):
        p = cand[j]
        if visible[p] == 0:
            continue
        if exempt[p] != 0:
            status, t, nx, ny, nz = primitive_first_hit(
                ox, oy, oz, dx, dy, dz, kinds[p], params[p],
                lo, hi, 0.0, 0.0, 0.0, False)
        elif okc:
            status, t, nx, ny, nz = primitive_first_hit(
                ox, oy, oz, dx, dy, dz, kinds[p], params[p],
                Lc, Hc, cnx, cny, cnz, cutc >= 0)
        else:
            continue
        if status == HIT_NONCONV:
            nonconv += 1
            continue
        if status == HIT_NONE:
            continue
        if t < best_t or (t == best_t and p < best_idx):
            best_t = t
            best_idx = p
            best_status = status
            bnx, bny, bnz = nx, ny, nz
    return best_status, best_t, bnx, bny, bnz, best_idx, nonconv


# ---------------------------------------------------------------------------
# uniform grid

@njit(cache=True)
def grid_cell_ranges(centers, bradii, origin, inv_cell, dims):
    """Per-primitive inclusive cell index ranges of the bounding spheres."""
    n = centers.shape[0]
    out = np.empty((n, 6), dtype=np.int64)
    for i in range(n):
        for a in range(3):
            lo = int(math.floor((centers[i, a] - bradii[i] - origin[a]) * inv_cell))
            hi = int(math.floor((centers[i, a] + bradii[i] - origin[a]) * inv_cell))
            if lo < 0:
                lo = 0
            if hi > dims[a] - 1:
                hi = dims[a] - 1
            if hi < lo:  # sphere fully outside on one side
                lo, hi = 0, -1
            out[i, 2 * a] = lo
            out[i, 2 * a + 1] = hi
    return out


@njit(cache=True)
def grid_fill(ranges, dims):
    """CSR cell -> primitive lists from the per-primitive cell ranges."""
    ncell = dims[0] * dims[1] * dims[2]
    counts = np.zeros(ncell + 1, dtype=np.int64)
    n = ranges.shape[0]
    for i in range(n):
        for cz in range(ranges[i, 4], ranges[i, 5] + 1):
            for cy in range(ranges[i, 2], ranges[i, 3] + 1):
                for cx in range(ranges[i, 0], ranges[i, 1] + 1):
                    counts[(cz * dims[1] + cy) * dims[0] + cx + 1] += 1
    for c in range(ncell):
        counts[c + 1] += counts[c]
    items = np.empty(counts[ncell], dtype=np.int64)
    cursor = counts[:ncell].copy()
    for i in range(n):
        for cz in range(ranges[i, 4], ranges[i, 5] + 1):
            for cy in range(ranges[i, 2], ranges[i, 3] + 1):
                for cx in range(ranges[i, 0], ranges[i, 1] + 1):
                    c = (cz * dims[1] + cy) * dims[0] + cx
                    items[cursor[c]] = i
                    cursor[c] += 1
    return counts, items


@njit(cache=True)
def grid_pick(ox, oy, oz, dx, dy, dz,
              origin, cell, dims, cell_start, cell_items,
              kinds, params, bin_ids, visible, exempt,
              plane_n, plane_off, stamp, stamp_val, lo, hi):
    """Nearest visible hit via 3D digital differential traversal.

    Primitives straddle cells, so tested ids are stamped to avoid
    re-testing; correctness does not depend on visit order because the
    comparison is the same lexicographic (t, index) rule everywhere.
    Returns (status, t, nx, ny, nz, prim_idx, nonconv).
    """
    okc, Lc, Hc, cutc = kept_interval(ox, oy, oz, dx, dy, dz,
                                      plane_n, plane_off, lo, hi)
    cnx = cny = cnz = 0.0
    if cutc >= 0:
        cnx = plane_n[cutc, 0]
        cny = plane_n[cutc, 1]
        cnz = plane_n[cutc, 2]

    gx = origin[0] + dims[0] * cell
    gy = origin[1] + dims[1] * cell
    gz = origin[2] + dims[2] * cell
    # clip the ray against the grid box
    t_enter = 0.0
    t_exit = BIG
    bmin = (origin[0], origin[1], origin[2])
    bmax = (gx, gy, gz)
    o3 = (ox, oy, oz)
    d3 = (dx, dy, dz)
    for a in range(3):
        if abs(d3[a]) < 1e-300:
            if o3[a] < bmin[a] or o3[a] > bmax[a]:
                return HIT_NONE, 0.0, 0.0, 0.0, 0.0, -1, 0
        else:
            tA = (bmin[a] - o3[a]) / d3[a]
            tB = (bmax[a] - o3[a]) / d3[a]
            if tA > tB:
                tA, tB = tB, tA
            if tA > t_enter:
                t_enter = tA
            if tB < t_exit:
                t_exit = tB
    if t_enter > t_exit:
        return HIT_NONE, 0.0, 0.0, 0.0, 0.0, -1, 0

    eps = 1e-12 * cell
    px = ox + (t_enter + eps) * dx
    py = oy + (t_enter + eps) * dy
    pz = oz + (t_enter + eps) * dz
    ix = int(math.floor((px - origin[0]) / cell))
    iy = int(math.floor((py - origin[1]) / cell))
    iz = int(math.floor((pz - origin[2]) / cell))
    if ix < 0:
        ix = 0
    if iy < 0:
        iy = 0
    if iz < 0:
        iz = 0
    if ix > dims[0] - 1:
        ix = dims[0] - 1
    if iy > dims[1] - 1:
        iy = dims[1] - 1
    if iz > dims[2] - 1:
        iz = dims[2] - 1

    step_x = 1 if dx >= 0 else -1
    step_y = 1 if dy >= 0 else -1
    step_z = 1 if dz >= 0 else -1
    tdx = cell / abs(dx) if abs(dx) > 1e-300 else BIG
    tdy = cell / abs(dy) if abs(dy) > 1e-300 else BIG
    tdz = cell / abs(dz) if abs(dz) > 1e-300 else BIG
    nxb = origin[0] + (ix + (1 if step_x > 0 else 0)) * cell
    nyb = origin[1] + (iy + (1 if step_y > 0 else 0)) * cell
    nzb = origin[2] + (iz + (1 if step_z > 0 else 0)) * cell
    tmx = (nxb - ox) / dx if abs(dx) > 1e-300 else BIG
    tmy = (nyb - oy) / dy if abs(dy) > 1e-300 else BIG
    tmz = (nzb - oz) / dz if abs(dz) > 1e-300 else BIG

    best_t = BIG
    best_idx = -1
    best_status = HIT_NONE
    bnx = bny = bnz = 0.0
    nonconv = 0
    while True:
        c = (iz * dims[1] + iy) * dims[0] + ix
        for k in range(cell_start[c], cell_start[c + 1]):
            p = cell_items[k]
            if stamp[p] == stamp_val:
                continue
            stamp[p] = stamp_val
            if visible[p] == 0:
                continue
            if exempt[p] != 0:
                status, t, nx, ny, nz = primitive_first_hit(
                    ox, oy, oz, dx, dy, dz, kinds[p], params[p],
                    lo, hi, 0.0, 0.0, 0.0, False)
            elif okc:
                status, t, nx, ny, nz = primitive_first_hit(
                    ox, oy, oz, dx, dy, dz, kinds[p], params[p],
                    Lc, Hc, cnx, cny, cnz, cutc >= 0)
            else:
                continue
            if status == HIT_NONCONV:
                nonconv += 1
                continue
            if status == HIT_NONE:
                continue
            if t < best_t or (t == best_t and p < best_idx):
                best_t = t
                best_idx = p
                best_status = status
                bnx, bny, bnz = nx, ny, nz
        cell_exit = min(tmx, min(tmy, tmz))
        if best_idx >= 0 and best_t <= cell_exit:
            break
        if tmx <= tmy and tmx <= tmz:
            ix += step_x
            tmx += tdx
            if ix < 0 or ix >= dims[0]:
                break
        elif tmy <= tmz:
            iy += step_y
            tmy += tdy
            if iy < 0 or iy >= dims[1]:
                break
        else:
            iz += step_z
            tmz += tdz
            if iz < 0 or iz >= dims[2]:
                break
        if cell_exit > t_exit:
            break
    return best_status, best_t, bnx, bny, bnz, best_idx, nonconv


# ---------------------------------------------------------------------------
# tile rasterizer

@njit(cache=True, parallel=True)
def render_tiles(width, height,
                 cam_pos, cam_right, cam_up, cam_fwd, tan_half, aspect,
                 near, far,
                 tile_px, tiles_x, tile_start, tile_items, tile_minz,
                 kinds, params, bin_ids, visible, exempt,
                 plane_n, plane_off,
                 out_viewz, out_t, out_pos, out_nrm, out_bin, out_kind,
                 nonconv_per_tile):
    """One primary ray through every pixel center, nearest visible hit.

    Tiles own disjoint pixel blocks and candidates are pre-sorted by
    nearest possible view depth, so rays stop early; results do not
    depend on scheduling because each pixel applies the same
    lexicographic hit rule to the same candidate set.
    """
    ntiles = tile_start.shape[0] - 1
    sx = 2.0 / width
    sy = 2.0 / height
    for ti in prange(ntiles):
        ty = ti // tiles_x
        tx = ti - ty * tiles_x
        x0 = tx * tile_px
        y0 = ty * tile_px
        x1 = min(x0 + tile_px, width)
        y1 = min(y0 + tile_px, height)
        c0 = tile_start[ti]
        c1 = tile_start[ti + 1]
        nonconv = 0
        for py in range(y0, y1):
            ndc_y = 1.0 - (py + 0.5) * sy
            for px_i in range(x0, x1):
                ndc_x = (px_i + 0.5) * sx - 1.0
                dx = (cam_fwd[0] + ndc_x * tan_half * aspect * cam_right[0]
                      + ndc_y * tan_half * cam_up[0])
                dy = (cam_fwd[1] + ndc_x * tan_half * aspect * cam_right[1]
                      + ndc_y * tan_half * cam_up[1])
                dz = (cam_fwd[2] + ndc_x * tan_half * aspect * cam_right[2]
                      + ndc_y * tan_half * cam_up[2])
                dl = math.sqrt(dx * dx + dy * dy + dz * dz)
                dx /= dl
                dy /= dl
                dz /= dl
                df = dx * cam_fwd[0] + dy * cam_fwd[1] + dz * cam_fwd[2]
                lo = near / df
                hi = far / df

                okc, Lc, Hc, cutc = kept_interval(
                    cam_pos[0], cam_pos[1], cam_pos[2], dx, dy, dz,
                    plane_n, plane_off, lo, hi)
                cnx = cny = cnz = 0.0
                if cutc >= 0:
                    cnx = plane_n[cutc, 0]
                    cny = plane_n[cutc, 1]
                    cnz = plane_n[cutc, 2]

                best_t = BIG
                best_idx = -1
                best_status = HIT_NONE
                bnx = bny = bnz = 0.0
                for k in range(c0, c1):
                    if tile_minz[k] > best_t * df:
                        break
                    p = tile_items[k]
                    if visible[p] == 0:
                        continue
                    if exempt[p] != 0:
                        status, t, nx, ny, nz = primitive_first_hit(
                            cam_pos[0], cam_pos[1], cam_pos[2], dx, dy, dz,
                            kinds[p], params[p], lo, hi,
                            0.0, 0.0, 0.0, False)
                    elif okc:
                        status, t, nx, ny, nz = primitive_first_hit(
                            cam_pos[0], cam_pos[1], cam_pos[2], dx, dy, dz,
                            kinds[p], params[p], Lc, Hc,
                            cnx, cny, cnz, cutc >= 0)
                    else:
                        continue
                    if status == HIT_NONCONV:
                        nonconv += 1
                        continue
                    if status == HIT_NONE:
                        continue
                    if t < best_t or (t == best_t and p < best_idx):
                        best_t = t
                        best_idx = p
                        best_status = status
                        bnx, bny, bnz = nx, ny, nz
                if best_idx >= 0:
                    out_t[py, px_i] = best_t
                    out_viewz[py, px_i] = best_t * df
                    out_pos[py, px_i, 0] = cam_pos[0] + best_t * dx
                    out_pos[py, px_i, 1] = cam_pos[1] + best_t * dy
                    out_pos[py, px_i, 2] = cam_pos[2] + best_t * dz
                    out_nrm[py, px_i, 0] = bnx
                    out_nrm[py, px_i, 1] = bny
                    out_nrm[py, px_i, 2] = bnz
                    out_bin[py, px_i] = bin_ids[best_idx]
                    out_kind[py, px_i] = best_status
        nonconv_per_tile[ti] = nonconv


@njit(cache=True)
def fill_tile_pairs(tx0, tx1, ty0, ty1, minz, tiles_x):
    """Expand per-primitive tile rectangles into flat (tile, prim, minz)
    triplets for CSR assembly."""
    n = tx0.shape[0]
    total = 0
    for i in range(n):
        if tx1[i] >= tx0[i] and ty1[i] >= ty0[i]:
            total += (tx1[i] - tx0[i] + 1) * (ty1[i] - ty0[i] + 1)
    tiles = np.empty(total, dtype=np.int64)
    prims = np.empty(total, dtype=np.int64)
    mz = np.empty(total)
    k = 0
    for i in range(n):
        for ty in range(ty0[i], ty1[i] + 1):
            base = ty * tiles_x
            for tx in range(tx0[i], tx1[i] + 1):
                tiles[k] = base + tx
                prims[k] = i
                mz[k] = minz[i]
                k += 1
    return tiles, prims, mz


# ---------------------------------------------------------------------------
# ambient occlusion

@njit(cache=True, inline="always")
def _hash32(x):
    x = np.uint32(x)
    x ^= x >> np.uint32(16)
    x = np.uint32(x * np.uint32(0x7FEB352D))
    x ^= x >> np.uint32(15)
    x = np.uint32(x * np.uint32(0x846CA68B))
    x ^= x >> np.uint32(16)
    return x


@njit(cache=True, parallel=True)
def ssao_pass_kernel(viewz, posw, nrm,
                     cam_pos, cam_right, cam_up, cam_fwd, tan_half, aspect,
                     kernel, radius, bias, seed, out):
    """Fraction of hemisphere sample points hidden behind the depth
    buffer, per pixel. Samples are a fixed seeded set, rotated per pixel
    by an integer-hash angle so the pattern does not band."""
    h, w = viewz.shape
    nk = kernel.shape[0]
    for py in prange(h):
        for px in range(w):
            zc = viewz[py, px]
            if zc >= BIG:
                out[py, px] = 0.0
                continue
            nx = nrm[py, px, 0]
            ny = nrm[py, px, 1]
            nz = nrm[py, px, 2]
            # orthonormal frame around the normal
            if abs(nx) < 0.9:
                tx, ty, tz = 0.0, nz, -ny
            else:
                tx, ty, tz = -nz, 0.0, nx
            tl = math.sqrt(tx * tx + ty * ty + tz * tz)
            tx /= tl
            ty /= tl
            tz /= tl
            bx = ny * tz - nz * ty
            by = nz * tx - nx * tz
            bz = nx * ty - ny * tx
            hv = _hash32(np.uint32(px) * np.uint32(0x9E3779B1)
                         ^ np.uint32(py) * np.uint32(0x85EBCA77)
                         ^ np.uint32(seed))
            ang = (float(hv) / 4294967296.0) * 6.283185307179586
            ca = math.cos(ang)
            sa = math.sin(ang)
            occ = 0
            for i in range(nk):
                kx = kernel[i, 0] * ca - kernel[i, 1] * sa
                ky = kernel[i, 0] * sa + kernel[i, 1] * ca
                kz = kernel[i, 2]
                sxw = posw[py, px, 0] + radius * (kx * tx + ky * bx + kz * nx)
                syw = posw[py, px, 1] + radius * (kx * ty + ky * by + kz * ny)
                szw = posw[py, px, 2] + radius * (kx * tz + ky * bz + kz * nz)
                vx = sxw - cam_pos[0]
                vy = syw - cam_pos[1]
                vz = szw - cam_pos[2]
                zs = vx * cam_fwd[0] + vy * cam_fwd[1] + vz * cam_fwd[2]
                if zs <= 1e-9:
                    continue
                ndcx = ((vx * cam_right[0] + vy * cam_right[1] + vz * cam_right[2])
                        / (zs * tan_half * aspect))
                ndcy = ((vx * cam_up[0] + vy * cam_up[1] + vz * cam_up[2])
                        / (zs * tan_half))
                sx = int(math.floor((ndcx + 1.0) * 0.5 * w))
                sy = int(math.floor((1.0 - ndcy) * 0.5 * h))
                if sx < 0 or sx >= w or sy < 0 or sy >= h:
                    continue
                zst = viewz[sy, sx]
                if zst < zs - bias and abs(zst - zc) < radius:
                    occ += 1
            out[py, px] = occ / nk


# ---------------------------------------------------------------------------
# solvent-accessible surface area

@njit(cache=True, parallel=True)
def sasa_kernel(centers, radii, sphere_pts, idx,
                origin, cell, dims, cell_start, cell_items, max_r, out):
    """Accessible fraction of quasi-uniform surface samples, per sphere.

    centers/radii cover the considered subset only (already inflated by
    the probe); idx maps rows to output slots. A sample point is blocked
    if any other considered sphere strictly contains it.
    """
    n = idx.shape[0]
    ns = sphere_pts.shape[0]
    for row in prange(n):
        R = radii[row]
        cx = centers[row, 0]
        cy = centers[row, 1]
        cz = centers[row, 2]
        reach = R + max_r
        ix0 = max(int(math.floor((cx - reach - origin[0]) / cell)), 0)
        iy0 = max(int(math.floor((cy - reach - origin[1]) / cell)), 0)
        iz0 = max(int(math.floor((cz - reach - origin[2]) / cell)), 0)
        ix1 = min(int(math.floor((cx + reach - origin[0]) / cell)), dims[0] - 1)
        iy1 = min(int(math.floor((cy + reach - origin[1]) / cell)), dims[1] - 1)
        iz1 = min(int(math.floor((cz + reach - origin[2]) / cell)), dims[2] - 1)
        # gather candidate blockers once; duplicates from straddled
        # cells are harmless, true non-neighbors get range-filtered
        count = 0
        for ciz in range(iz0, iz1 + 1):
            for ciy in range(iy0, iy1 + 1):
                for cix in range(ix0, ix1 + 1):
                    c = (ciz * dims[1] + ciy) * dims[0] + cix
                    count += cell_start[c + 1] - cell_start[c]
        nbrs = np.empty(count, dtype=np.int64)
        nn = 0
        for ciz in range(iz0, iz1 + 1):
            for ciy in range(iy0, iy1 + 1):
                for cix in range(ix0, ix1 + 1):
                    c = (ciz * dims[1] + ciy) * dims[0] + cix
                    for k in range(cell_start[c], cell_start[c + 1]):
                        j = cell_items[k]
                        if j == row:
                            continue
                        ddx = cx - centers[j, 0]
                        ddy = cy - centers[j, 1]
                        ddz = cz - centers[j, 2]
                        lim = R + radii[j]
                        if ddx * ddx + ddy * ddy + ddz * ddz < lim * lim:
                            nbrs[nn] = j
                            nn += 1
        acc = 0
        for s in range(ns):
            px = cx + R * sphere_pts[s, 0]
            py = cy + R * sphere_pts[s, 1]
            pz = cz + R * sphere_pts[s, 2]
            blocked = False
            for k in range(nn):
                j = nbrs[k]
                ddx = px - centers[j, 0]
                ddy = py - centers[j, 1]
                ddz = pz - centers[j, 2]
                if ddx * ddx + ddy * ddy + ddz * ddz < radii[j] * radii[j]:
                    blocked = True
                    break
            if not blocked:
                acc += 1
        out[row] = 4.0 * math.pi * R * R * (acc / ns)


# ---------------------------------------------------------------------------
# misc

@njit(cache=True)
def nearest_index(queries, points):
    """Index of the nearest point for each query, first index on ties."""
    m = queries.shape[0]
    n = points.shape[0]
    out = np.empty(m, dtype=np.int64)
    for i in range(m):
        qx = queries[i, 0]
        qy = queries[i, 1]
        qz = queries[i, 2]
        best = 1e300
        bj = 0
        for j in range(n):
            dx = qx - points[j, 0]
            dy = qy - points[j, 1]
            dz = qz - points[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
                bj = j
        out[i] = bj
    return out


@njit(cache=True)
def grid_pick_batch(origins, dirs,
                    origin, cell, dims, cell_start, cell_items,
                    kinds, params, bin_ids, visible, exempt,
                    plane_n, plane_off, stamp, stamp_val, lo, hi,
                    out_status, out_t, out_n, out_idx):
    """grid_pick over a batch of rays; one stamp value per ray."""
    n = origins.shape[0]
    nonconv = 0
    for i in range(n):
        st, t, nx, ny, nz, idx, nc = grid_pick(
            origins[i, 0], origins[i, 1], origins[i, 2],
            dirs[i, 0], dirs[i, 1], dirs[i, 2],
            origin, cell, dims, cell_start, cell_items,
            kinds, params, bin_ids, visible, exempt,
            plane_n, plane_off, stamp, stamp_val + i, lo, hi)
        out_status[i] = st
        out_t[i] = t
        out_n[i, 0] = nx
        out_n[i, 1] = ny
        out_n[i, 2] = nz
        out_idx[i] = idx
        nonconv += nc
    return nonconv


@njit(cache=True)
def nearest_hit_batch(origins, dirs, cand,
                      kinds, params, bin_ids, visible, exempt,
                      plane_n, plane_off, lo, hi,
                      out_status, out_t, out_n, out_idx):
    """nearest_hit over a batch of rays against the same candidates."""
    n = origins.shape[0]
    nonconv = 0
    for i in range(n):
        st, t, nx, ny, nz, idx, nc = nearest_hit(
            origins[i, 0], origins[i, 1], origins[i, 2],
            dirs[i, 0], dirs[i, 1], dirs[i, 2],
            cand, kinds, params, bin_ids, visible, exempt,
            plane_n, plane_off, lo, hi)
        out_status[i] = st
        out_t[i] = t
        out_n[i, 0] = nx
        out_n[i, 1] = ny
        out_n[i, 2] = nz
        out_idx[i] = idx
        nonconv += nc
    return nonconv
