"""Scene construction: tube-radius estimation and the three bin
representations (spheres, straight tube, smooth tube).

Primitives are plain data; the ray casting layer packs them into flat
arrays for the compiled kernels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .errors import SkeinError
from .model import ChromatinModel

KIND_SPHERE = 0
KIND_ROUNDED_CONE = 1
KIND_QUAD_SWEPT = 2

_KIND_NAMES = {KIND_SPHERE: "sphere", KIND_ROUNDED_CONE: "rounded_cone",
               KIND_QUAD_SWEPT: "quad_swept"}

REPRESENTATIONS = ("spheres", "straight_tube", "smooth_tube")


@dataclass(frozen=True)
class ScenePrimitive:
    """One analytic shape.

    params layout by kind:
      sphere        [cx, cy, cz, r]
      rounded_cone  [p0x, p0y, p0z, r0, p1x, p1y, p1z, r1]
      quad_swept    [b0(3), b1(3), b2(3), r]
    """

    kind: int
    params: np.ndarray
    bin_id: int

    def __post_init__(self):
        params = np.asarray(self.params, dtype=np.float64)
        params.flags.writeable = False
        object.__setattr__(self, "params", params)

    @property
    def kind_name(self) -> str:
        return _KIND_NAMES[self.kind]


@dataclass(frozen=True)
class RadiusBounds:
    lower: float
    default: float
    upper: float

    def __post_init__(self):
        if not (0.0 < self.lower <= self.default <= self.upper):
            raise SkeinError(
                f"radius bounds must satisfy 0 < lower <= default <= upper, "
                f"got {self.lower}, {self.default}, {self.upper}")


def _tukey_hinges(sorted_vals: np.ndarray) -> tuple[float, float]:
    # median-of-halves; the median joins both halves when the count is odd
    n = sorted_vals.size
    half = (n + 1) // 2
    return float(np.median(sorted_vals[:half])), float(np.median(sorted_vals[n - half:]))


def estimate_tube_radius(spacings) -> RadiusBounds:
    """Derive tube radius bounds from inter-bin spacing statistics.

    The admissible spacing range is [Q1 - 1.5*IQR, Q3 + 1.5*IQR] with a
    floor of 0.1x the smallest spacing (the raw lower fence can go
    negative). Radii are half of that range so adjacent tubes never
    swallow each other, and the default sits at half the hinge midpoint,
    capped at half the smallest spacing.
    """
    arr = np.asarray(spacings, dtype=np.float64)
    if arr.size == 0:
        raise SkeinError("need at least one spacing")
    if not np.isfinite(arr).all() or (arr <= 0).any():
        raise SkeinError("spacings must be positive and finite")
    s = np.sort(arr)
    q1, q3 = _tukey_hinges(s)
    iqr = q3 - q1
    smallest = float(s[0])
    range_lo = max(q1 - 1.5 * iqr, 0.1 * smallest)
    range_hi = q3 + 1.5 * iqr
    default = min(0.5 * (q1 + q3) / 2.0, 0.5 * smallest)
    # a far-outlying small spacing can drag the cap below the lower fence
    lower = min(0.5 * range_lo, default)
    return RadiusBounds(lower, default, 0.5 * range_hi)


def default_radius(model: ChromatinModel) -> float:
    """Convenience: estimated default radius for a model."""
    from .model import inter_bin_spacings

    return estimate_tube_radius(inter_bin_spacings(model)).default


def build_spheres(model: ChromatinModel, radius: float) -> list[ScenePrimitive]:
    """One sphere per bin, centered exactly on the bin position."""
    if radius <= 0:
        raise SkeinError(f"radius must be positive, got {radius}")
    prims = []
    for i in range(model.bin_count):
        params = np.empty(4)
        params[:3] = model.bins[i]
        params[3] = radius
        prims.append(ScenePrimitive(KIND_SPHERE, params, i))
    return prims


def build_straight_tube(model: ChromatinModel, radius: float) -> list[ScenePrimitive]:
    """Capsules between consecutive bins of each part.

    No segment crosses a part boundary; a single-bin part falls back to
    a lone sphere so it stays visible. bin_id is the earlier bin.
    """
    if radius <= 0:
        raise SkeinError(f"radius must be positive, got {radius}")
    prims = []
    for part in model.parts:
        if part.first == part.last:
            params = np.empty(4)
            params[:3] = model.bins[part.first]
            params[3] = radius
            prims.append(ScenePrimitive(KIND_SPHERE, params, part.first))
            continue
        for i in range(part.first, part.last):
            params = np.empty(8)
            params[0:3] = model.bins[i]
            params[3] = radius
            params[4:7] = model.bins[i + 1]
            params[7] = radius
            prims.append(ScenePrimitive(KIND_ROUNDED_CONE, params, i))
    return prims


@dataclass(frozen=True)
class QuadSegment:
    """Quadratic Bézier segment of a tube centerline."""

    b0: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for field in ("b0", "b1", "b2"):
            v = np.asarray(getattr(self, field), dtype=np.float64)
            v.flags.writeable = False
            object.__setattr__(self, field, v)

    def point(self, t: float) -> np.ndarray:
        u = 1.0 - t
        return u * u * self.b0 + 2.0 * u * t * self.b1 + t * t * self.b2


def _natural_tangents(points: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Hermite tangents of the natural interpolating cubic.

    Tridiagonal system (Thomas solve): interior rows couple m_{i-1},
    m_i, m_{i+1} through the inverse knot gaps; natural end conditions
    pin the curvature to zero at both ends.
    """
    n = points.shape[0]
    h = np.diff(knots)
    d = (points[1:] - points[:-1]) / h[:, None]
    a = np.zeros(n)  # sub-diagonal
    b = np.zeros(n)  # diagonal
    c = np.zeros(n)  # super-diagonal
    rhs = np.zeros((n, 3))
    b[0], c[0] = 2.0, 1.0
    rhs[0] = 3.0 * d[0]
    for i in range(1, n - 1):
        a[i] = 1.0 / h[i - 1]
        b[i] = 2.0 * (1.0 / h[i - 1] + 1.0 / h[i])
        c[i] = 1.0 / h[i]
        rhs[i] = 3.0 * (d[i - 1] / h[i - 1] + d[i] / h[i])
    a[n - 1], b[n - 1] = 1.0, 2.0
    rhs[n - 1] = 3.0 * d[-1]
    # forward sweep
    for i in range(1, n):
        w = a[i] / b[i - 1]
        b[i] -= w * c[i - 1]
        rhs[i] -= w * rhs[i - 1]
    m = np.empty((n, 3))
    m[n - 1] = rhs[n - 1] / b[n - 1]
    for i in range(n - 2, -1, -1):
        m[i] = (rhs[i] - c[i] * m[i + 1]) / b[i]
    return m


def approximate_spline(points) -> list[QuadSegment]:
    """Fit a natural cubic through the points, then split each span at
    its midpoint into two quadratic segments.

    The chain passes through every input point, and the two halves of a
    span share a tangent line at the split, so the result is C1. Two
    input points yield a single straight segment.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise SkeinError("points must be an (n, 3) array")
    if not np.isfinite(pts).all():
        raise SkeinError("points contain non-finite values")
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(pts, axis=0), axis=1) > 0.0
    if not keep.all():
        warnings.warn(f"collapsed {int((~keep).sum())} duplicate consecutive points",
                      stacklevel=2)
        pts = pts[keep]
    n = len(pts)
    if n < 2:
        raise SkeinError("need at least 2 distinct points")
    if n == 2:
        return [QuadSegment(pts[0], 0.5 * (pts[0] + pts[1]), pts[1])]
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    knots = np.concatenate(([0.0], np.cumsum(chords)))
    m = _natural_tangents(pts, knots)
    h3 = ((knots[1:] - knots[:-1]) / 3.0)[:, None]
    b0 = pts[:-1]
    b1 = pts[:-1] + h3 * m[:-1]
    b2 = pts[1:] - h3 * m[1:]
    b3 = pts[1:]
    # cubic -> two quadratics: pull each half's control point 3/4 of
    # the way along the outer leg, join where the two legs meet
    qa = b0 + 0.75 * (b1 - b0)
    qb = b3 + 0.75 * (b2 - b3)
    mid = 0.5 * (qa + qb)
    segments = []
    for i in range(n - 1):
        segments.append(QuadSegment(b0[i], qa[i], mid[i]))
        segments.append(QuadSegment(mid[i], qb[i], b3[i]))
    return segments


def build_smooth_tube(segments, radius: float, bin_positions, first_bin: int = 0):
    """Sweep a sphere of the given radius along each segment.

    Each primitive is attributed to the original bin nearest its
    segment midpoint so picks on the smoothed tube still land on a bin.
    """
    if radius <= 0:
        raise SkeinError(f"radius must be positive, got {radius}")
    positions = np.ascontiguousarray(bin_positions, dtype=np.float64)
    mids = np.array([seg.point(0.5) for seg in segments])
    owners = _k.nearest_index(mids, positions)
    prims = []
    for seg, owner in zip(segments, owners):
        params = np.empty(10)
        params[0:3] = seg.b0
        params[3:6] = seg.b1
        params[6:9] = seg.b2
        params[9] = radius
        prims.append(ScenePrimitive(KIND_QUAD_SWEPT, params, first_bin + int(owner)))
    return prims


def representation_primitives(model: ChromatinModel, kind: str,
                              radius: float) -> list[ScenePrimitive]:
    """Build the full primitive list for one representation."""
    if kind == "spheres":
        return build_spheres(model, radius)
    if kind == "straight_tube":
        return build_straight_tube(model, radius)
    if kind == "smooth_tube":
        if radius <= 0:
            raise SkeinError(f"radius must be positive, got {radius}")
        prims = []
        for part in model.parts:
            positions = model.bins[part.first:part.last + 1]
            if len(positions) == 1:
                params = np.empty(4)
                params[:3] = positions[0]
                params[3] = radius
                prims.append(ScenePrimitive(KIND_SPHERE, params, part.first))
                continue
            segments = approximate_spline(positions)
            prims.extend(build_smooth_tube(segments, radius, positions, part.first))
        return prims
    raise SkeinError(f"unknown representation {kind!r}")
