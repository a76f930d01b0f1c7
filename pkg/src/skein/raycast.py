"""Ray intersection against packed scenes: analytic primitives, cutting
planes with cap fills, grid-accelerated picking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import SkeinError
from .geometry import (KIND_QUAD_SWEPT, KIND_ROUNDED_CONE, KIND_SPHERE,
                       ScenePrimitive)

T_MIN = K.T_MIN


def _unit(v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if abs(n - 1.0) > 1e-9:
        raise SkeinError(f"{what} must be unit length, |v| = {n}")
    return v


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64)
        d = _unit(self.direction, "ray direction")
        o.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class Hit:
    t: float
    position: np.ndarray
    normal: np.ndarray
    bin_id: int
    kind: str = "surface"  # or "cap"


@dataclass(frozen=True)
class CuttingPlane:
    """Half-space filter {x : n.x = offset} keeping one side.

    exempt_selections lists selection ids whose bins stay visible
    regardless of the plane.
    """

    normal: np.ndarray
    offset: float
    keep_side: str = "negative"  # keep n.x <= offset
    axis_aligned: str | None = None
    exempt_selections: tuple = ()

    def __post_init__(self):
        n = _unit(self.normal, "plane normal")
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)
        if self.keep_side not in ("positive", "negative"):
            raise SkeinError(f"keep_side must be positive or negative, got {self.keep_side!r}")
        if self.axis_aligned not in (None, "x", "y", "z"):
            raise SkeinError(f"axis_aligned must be x, y or z, got {self.axis_aligned!r}")

    def canonical(self) -> tuple[np.ndarray, float]:
        """(normal, offset) with the kept side normalized to n.x <= offset."""
        if self.keep_side == "negative":
            return self.normal, float(self.offset)
        return -self.normal, -float(self.offset)

    @staticmethod
    def axis(axis: str, offset: float, keep_side: str = "negative",
             exempt_selections=()) -> "CuttingPlane":
        if axis not in ("x", "y", "z"):
            raise SkeinError(f"plane axis must be x, y or z, got {axis!r}")
        n = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}[axis]
        return CuttingPlane(np.array(n), offset, keep_side, axis,
                            tuple(exempt_selections))


def _pack_planes(planes):
    if not planes:
        return np.zeros((0, 3)), np.zeros(0)
    ns = np.empty((len(planes), 3))
    offs = np.empty(len(planes))
    for i, pl in enumerate(planes):
        ns[i], offs[i] = pl.canonical()
    return ns, offs


def _prim_row(prim: ScenePrimitive) -> np.ndarray:
    row = np.zeros(10)
    row[:prim.params.size] = prim.params
    return row


def _hit_from_kernel(ray: Ray, status, t, nx, ny, nz, bin_id) -> Hit | None:
    if status == K.HIT_NONE or status == K.HIT_NONCONV:
        return None
    kind = "cap" if status == K.HIT_CAP else "surface"
    return Hit(float(t), ray.at(float(t)), np.array([nx, ny, nz]), int(bin_id), kind)


def _first_hit(ray: Ray, prim: ScenePrimitive, L, H, cut_n, has_cut):
    o = ray.origin
    d = ray.direction
    cnx, cny, cnz = (cut_n if has_cut else (0.0, 0.0, 0.0))
    return K.primitive_first_hit(o[0], o[1], o[2], d[0], d[1], d[2],
                                 prim.kind, _prim_row(prim),
                                 L, H, cnx, cny, cnz, has_cut)


def intersect_sphere(ray: Ray, prim: ScenePrimitive) -> Hit | None:
    """Nearest hit at t >= 0; a ray starting inside reports the exit
    with the outward normal."""
    if prim.kind != KIND_SPHERE:
        raise SkeinError("primitive is not a sphere")
    status, t, nx, ny, nz = _first_hit(ray, prim, T_MIN, K.BIG, None, False)
    return _hit_from_kernel(ray, status, t, nx, ny, nz, prim.bin_id)


def intersect_rounded_cone(ray: Ray, prim: ScenePrimitive) -> Hit | None:
    """Nearest hit on the convex hull of the two end spheres."""
    if prim.kind != KIND_ROUNDED_CONE:
        raise SkeinError("primitive is not a rounded cone")
    status, t, nx, ny, nz = _first_hit(ray, prim, T_MIN, K.BIG, None, False)
    return _hit_from_kernel(ray, status, t, nx, ny, nz, prim.bin_id)


class NonConvergence:
    """Mutable counter exposed through scene/render stats."""

    def __init__(self):
        self.count = 0


_global_nonconv = NonConvergence()


def nonconvergence_count() -> int:
    return _global_nonconv.count


def intersect_quad_swept(ray: Ray, prim: ScenePrimitive,
                         stats: NonConvergence | None = None) -> Hit | None:
    """Nearest hit on the sphere sweep of a quadratic segment.

    Marching that exhausts its step budget counts as a miss and bumps
    the non-convergence counter.
    """
    if prim.kind != KIND_QUAD_SWEPT:
        raise SkeinError("primitive is not a swept segment")
    status, t, nx, ny, nz = _first_hit(ray, prim, T_MIN, K.BIG, None, False)
    if status == K.HIT_NONCONV:
        (stats or _global_nonconv).count += 1
        return None
    return _hit_from_kernel(ray, status, t, nx, ny, nz, prim.bin_id)


def intersect(ray: Ray, prim: ScenePrimitive) -> Hit | None:
    if prim.kind == KIND_SPHERE:
        return intersect_sphere(ray, prim)
    if prim.kind == KIND_ROUNDED_CONE:
        return intersect_rounded_cone(ray, prim)
    return intersect_quad_swept(ray, prim)


def clip_hit(ray: Ray, prim: ScenePrimitive, planes, exempt: bool = False) -> Hit | None:
    """Nearest visible hit after cutting-plane removal.

    Kept half-spaces combine by intersection. When the entry point is
    cut away but the interior continues past the plane, the hole is
    filled with a cap hit on the plane, normal facing the viewer.
    Exempt primitives ignore the planes entirely.
    """
    if exempt or not planes:
        hit = intersect(ray, prim)
        return hit
    plane_n, plane_off = _pack_planes(planes)
    o = ray.origin
    d = ray.direction
    ok, L, H, cut = K.kept_interval(o[0], o[1], o[2], d[0], d[1], d[2],
                                    plane_n, plane_off, T_MIN, K.BIG)
    if not ok:
        return None
    cut_n = plane_n[cut] if cut >= 0 else None
    status, t, nx, ny, nz = _first_hit(ray, prim, L, H,
                                       cut_n if cut >= 0 else None, cut >= 0)
    if status == K.HIT_NONCONV:
        _global_nonconv.count += 1
        return None
    return _hit_from_kernel(ray, status, t, nx, ny, nz, prim.bin_id)


class Scene:
    """Packed immutable primitive set plus planes and per-primitive
    visibility/exemption, with a uniform grid for picking."""

    def __init__(self, primitives, planes=(), visible=None, exempt=None,
                 cell_size: float | None = None):
        if not primitives:
            raise SkeinError("scene needs at least one primitive")
        n = len(primitives)
        self.primitives = tuple(primitives)
        self.kinds = np.array([p.kind for p in primitives], dtype=np.int64)
        self.params = np.zeros((n, 10))
        for i, p in enumerate(primitives):
            self.params[i, :p.params.size] = p.params
        self.bin_ids = np.array([p.bin_id for p in primitives], dtype=np.int64)
        self.planes = tuple(planes)
        self.plane_n, self.plane_off = _pack_planes(self.planes)
        self.visible = (np.ones(n, dtype=np.uint8) if visible is None
                        else np.asarray(visible, dtype=np.uint8))
        self.exempt = (np.zeros(n, dtype=np.uint8) if exempt is None
                       else np.asarray(exempt, dtype=np.uint8))
        if self.visible.shape != (n,) or self.exempt.shape != (n,):
            raise SkeinError("visible/exempt masks must have one entry per primitive")
        self.stats = NonConvergence()

        self.centers, self.bradii = _bounding_spheres(self.kinds, self.params)
        if cell_size is None:
            cell_size = 2.0 * float(np.median(_prim_radius(self.kinds, self.params)))
        if cell_size <= 0 or not np.isfinite(cell_size):
            cell_size = 1.0
        lo = (self.centers - self.bradii[:, None]).min(axis=0)
        hi = (self.centers + self.bradii[:, None]).max(axis=0)
        span = hi - lo
        # cap the cell count so degenerate scenes stay small
        dims = np.maximum(1, np.minimum(192, np.ceil(span / cell_size))).astype(np.int64)
        self.grid_origin = lo.copy()
        self.grid_cell = float(max(cell_size, (span / dims).max(), 1e-12))
        self.grid_dims = dims
        ranges = K.grid_cell_ranges(self.centers, self.bradii, self.grid_origin,
                                    1.0 / self.grid_cell, self.grid_dims)
        self.cell_start, self.cell_items = K.grid_fill(ranges, self.grid_dims)
        self._stamp = np.zeros(n, dtype=np.int64)
        self._stamp_val = 0

    @property
    def count(self) -> int:
        return len(self.primitives)

    def pick(self, ray: Ray) -> int | None:
        """bin id of the nearest visible post-clip hit, if any."""
        hit = self.trace(ray)
        return None if hit is None else hit.bin_id

    def trace(self, ray: Ray) -> Hit | None:
        o = ray.origin
        d = ray.direction
        self._stamp_val += 1
        status, t, nx, ny, nz, idx, nonconv = K.grid_pick(
            o[0], o[1], o[2], d[0], d[1], d[2],
            self.grid_origin, self.grid_cell, self.grid_dims,
            self.cell_start, self.cell_items,
            self.kinds, self.params, self.bin_ids, self.visible, self.exempt,
            self.plane_n, self.plane_off,
            self._stamp, self._stamp_val, T_MIN, K.BIG)
        self.stats.count += nonconv
        if status == K.HIT_NONE or idx < 0:
            return None
        return _hit_from_kernel(ray, status, t, nx, ny, nz, self.bin_ids[idx])

    def trace_brute(self, ray: Ray) -> Hit | None:
        """Reference path: test every primitive, no grid."""
        o = ray.origin
        d = ray.direction
        cand = np.arange(self.count, dtype=np.int64)
        status, t, nx, ny, nz, idx, nonconv = K.nearest_hit(
            o[0], o[1], o[2], d[0], d[1], d[2],
            cand, self.kinds, self.params, self.bin_ids, self.visible,
            self.exempt, self.plane_n, self.plane_off, T_MIN, K.BIG)
        self.stats.count += nonconv
        if status == K.HIT_NONE or idx < 0:
            return None
        return _hit_from_kernel(ray, status, t, nx, ny, nz, self.bin_ids[idx])

    def trace_batch(self, origins, directions, brute: bool = False):
        """Trace many rays in one kernel call.

        Returns (status, t, normal, prim_idx) arrays; status 0 means
        miss. Directions must be unit length. Identical hit selection to
        trace()/trace_brute(), minus the per-ray wrapper objects.
        """
        o = np.ascontiguousarray(origins, dtype=np.float64)
        d = np.ascontiguousarray(directions, dtype=np.float64)
        if o.shape != d.shape or o.ndim != 2 or o.shape[1] != 3:
            raise SkeinError("origins/directions must be matching (n, 3) arrays")
        n = o.shape[0]
        status = np.zeros(n, dtype=np.int64)
        t = np.zeros(n)
        normal = np.zeros((n, 3))
        idx = np.full(n, -1, dtype=np.int64)
        if brute:
            cand = np.arange(self.count, dtype=np.int64)
            nonconv = K.nearest_hit_batch(
                o, d, cand, self.kinds, self.params, self.bin_ids,
                self.visible, self.exempt, self.plane_n, self.plane_off,
                T_MIN, K.BIG, status, t, normal, idx)
        else:
            nonconv = K.grid_pick_batch(
                o, d, self.grid_origin, self.grid_cell, self.grid_dims,
                self.cell_start, self.cell_items,
                self.kinds, self.params, self.bin_ids, self.visible,
                self.exempt, self.plane_n, self.plane_off,
                self._stamp, self._stamp_val + 1, T_MIN, K.BIG,
                status, t, normal, idx)
            self._stamp_val += n
        self.stats.count += nonconv
        miss = status == K.HIT_NONE
        t[miss] = K.BIG
        normal[miss] = 0.0
        idx[miss] = -1
        return status, t, normal, idx

    def with_planes(self, planes) -> "Scene":
        clone = object.__new__(Scene)
        clone.__dict__.update(self.__dict__)
        clone.planes = tuple(planes)
        clone.plane_n, clone.plane_off = _pack_planes(clone.planes)
        clone.stats = NonConvergence()
        clone._stamp = np.zeros(self.count, dtype=np.int64)
        clone._stamp_val = 0
        return clone


def _prim_radius(kinds, params):
    r = np.where(kinds == KIND_SPHERE, params[:, 3], 0.0)
    r = np.where(kinds == KIND_ROUNDED_CONE, np.maximum(params[:, 3], params[:, 7]), r)
    r = np.where(kinds == KIND_QUAD_SWEPT, params[:, 9], r)
    return r


def _bounding_spheres(kinds, params):
    n = kinds.shape[0]
    centers = np.empty((n, 3))
    radii = np.empty(n)
    sph = kinds == KIND_SPHERE
    centers[sph] = params[sph, 0:3]
    radii[sph] = params[sph, 3]
    cone = kinds == KIND_ROUNDED_CONE
    if cone.any():
        p0 = params[cone, 0:3]
        r0 = params[cone, 3]
        p1 = params[cone, 4:7]
        r1 = params[cone, 7]
        d = np.linalg.norm(p1 - p0, axis=1)
        enclosed0 = d + r1 <= r0  # sphere 1 inside sphere 0
        enclosed1 = d + r0 <= r1
        R = 0.5 * (d + r0 + r1)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(d[:, None] > 0, (p1 - p0) / np.where(d == 0, 1, d)[:, None], 0.0)
        c = p0 + u * (R - r0)[:, None]
        c[enclosed0] = p0[enclosed0]
        R = np.where(enclosed0, r0, R)
        c[enclosed1] = p1[enclosed1]
        R = np.where(enclosed1, r1, R)
        centers[cone] = c
        radii[cone] = R
    quad = kinds == KIND_QUAD_SWEPT
    if quad.any():
        q = params[quad]
        ctrl = q[:, :9].reshape(-1, 3, 3)
        c = ctrl.mean(axis=1)
        R = np.sqrt(((ctrl - c[:, None, :]) ** 2).sum(axis=2)).max(axis=1) + q[:, 9]
        centers[quad] = c
        radii[quad] = R
    return centers, radii
