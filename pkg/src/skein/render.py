"""Deterministic software renderer: pinhole camera, full-frame analytic
G-buffer, Phong headlight, dual-radius ambient occlusion, compositing,
and PPM/PNG output.

Same scene + camera + settings + seed produce byte-identical images;
nothing here depends on thread scheduling or wall clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import SkeinError
from .raycast import Ray, Scene

MISS_DEPTH = K.BIG

PHONG_AMBIENT = 0.1
PHONG_DIFFUSE = 0.75
PHONG_SPECULAR = 0.15
PHONG_SHININESS = 32.0

DEFAULT_BACKGROUND = (1.0, 1.0, 1.0)

TILE_PX = 16


@dataclass(frozen=True)
class Camera:
    position: np.ndarray
    target: np.ndarray
    up: np.ndarray = (0.0, 1.0, 0.0)
    vertical_fov: float = 45.0
    viewport: tuple[int, int] = (512, 512)
    near: float = 1e-6
    far: float = 1e12

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        tgt = np.asarray(self.target, dtype=np.float64)
        up = np.asarray(self.up, dtype=np.float64)
        if np.array_equal(pos, tgt):
            raise SkeinError("camera position and target coincide")
        if not 0.0 < self.vertical_fov < 180.0:
            raise SkeinError(f"vertical fov must be in (0, 180), got {self.vertical_fov}")
        w, h = self.viewport
        if w < 1 or h < 1:
            raise SkeinError(f"viewport must be positive, got {self.viewport}")
        if not self.near < self.far:
            raise SkeinError("camera near must be below far")
        for name, v in (("position", pos), ("target", tgt), ("up", up)):
            v.flags.writeable = False
            object.__setattr__(self, name, v)
        object.__setattr__(self, "viewport", (int(w), int(h)))

    def basis(self):
        fwd = self.target - self.position
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, self.up)
        nr = np.linalg.norm(right)
        if nr < 1e-12:
            raise SkeinError("camera up vector is parallel to the view direction")
        right = right / nr
        up = np.cross(right, fwd)
        tan_half = math.tan(math.radians(self.vertical_fov) * 0.5)
        aspect = self.viewport[0] / self.viewport[1]
        return right, up, fwd, tan_half, aspect

    def ray(self, px: float, py: float) -> Ray:
        """Primary ray through the center of pixel (px, py).

        The arithmetic mirrors the render kernel operation for
        operation so picking and rendering agree bitwise.
        """
        right, up, fwd, tan_half, aspect = self.basis()
        w, h = self.viewport
        sx = 2.0 / w
        sy = 2.0 / h
        ndc_x = (px + 0.5) * sx - 1.0
        ndc_y = 1.0 - (py + 0.5) * sy
        dx = (fwd[0] + ndc_x * tan_half * aspect * right[0]
              + ndc_y * tan_half * up[0])
        dy = (fwd[1] + ndc_x * tan_half * aspect * right[1]
              + ndc_y * tan_half * up[1])
        dz = (fwd[2] + ndc_x * tan_half * aspect * right[2]
              + ndc_y * tan_half * up[2])
        dl = math.sqrt(dx * dx + dy * dy + dz * dz)
        return Ray(self.position, np.array([dx / dl, dy / dl, dz / dl]))


def fit_camera(points, vertical_fov: float = 45.0,
               viewport: tuple[int, int] = (512, 512),
               direction=(0.35, 0.25, 1.0)) -> Camera:
    """Frame the whole point cloud from a three-quarter direction."""
    pts = np.asarray(points, dtype=np.float64)
    center = pts.mean(axis=0)
    radius = float(np.sqrt(((pts - center) ** 2).sum(axis=1)).max())
    radius = max(radius, 1e-6)
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    dist = radius / math.sin(math.radians(vertical_fov) * 0.5) * 1.15
    return Camera(center + d * dist, center, (0.0, 1.0, 0.0),
                  vertical_fov, viewport)


@dataclass
class GBuffer:
    """Per-pixel nearest-hit record of one frame."""

    t: np.ndarray
    view_z: np.ndarray
    position: np.ndarray
    normal: np.ndarray
    bin_id: np.ndarray
    kind: np.ndarray  # 0 miss, 1 surface, 2 cap

    @classmethod
    def allocate(cls, width: int, height: int) -> "GBuffer":
        return cls(
            t=np.full((height, width), MISS_DEPTH),
            view_z=np.full((height, width), MISS_DEPTH),
            position=np.zeros((height, width, 3)),
            normal=np.zeros((height, width, 3)),
            bin_id=np.full((height, width), -1, dtype=np.int64),
            kind=np.zeros((height, width), dtype=np.uint8),
        )

    @property
    def height(self) -> int:
        return self.t.shape[0]

    @property
    def width(self) -> int:
        return self.t.shape[1]

    @property
    def miss(self) -> np.ndarray:
        return self.kind == 0


@dataclass(frozen=True)
class SsaoSettings:
    radius_near: float
    radius_far: float
    samples_per_pixel: int = 16
    seed: int = 0
    strength: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.radius_near < self.radius_far:
            raise SkeinError("need 0 < radius_near < radius_far")
        if self.samples_per_pixel < 8:
            raise SkeinError("need at least 8 occlusion samples per pixel")


def ssao_defaults(tube_radius: float, bounding_radius: float,
                  samples: int = 16, seed: int = 0) -> SsaoSettings:
    """Scale-free default radii: tight pass at 4x the tube radius, broad
    pass at a quarter of the model's bounding radius."""
    near = 4.0 * tube_radius
    far = 0.25 * bounding_radius
    if far <= near:  # tiny models: keep the two passes distinct
        far = 2.0 * near
    return SsaoSettings(near, far, samples, seed)


def _tile_lists(scene: Scene, camera: Camera):
    """Conservative per-tile candidate lists, sorted by nearest possible
    view depth so pixel loops can stop early."""
    w, h = camera.viewport
    right, up, fwd, tan_half, aspect = camera.basis()
    v = scene.centers - camera.position
    cz = v @ fwd
    cx = v @ right
    cy = v @ up
    R = scene.bradii

    tiles_x = (w + TILE_PX - 1) // TILE_PX
    tiles_y = (h + TILE_PX - 1) // TILE_PX

    n = len(R)
    x0 = np.zeros(n, dtype=np.int64)
    x1 = np.full(n, w - 1, dtype=np.int64)
    y0 = np.zeros(n, dtype=np.int64)
    y1 = np.full(n, h - 1, dtype=np.int64)

    behind = cz + R <= 0.0
    crossing = ~behind & (cz - R <= 1e-12)
    front = ~behind & ~crossing
    if front.any():
        zlo = cz[front] - R[front]
        zhi = cz[front] + R[front]
        xlo = cx[front] - R[front]
        xhi = cx[front] + R[front]
        ylo = cy[front] - R[front]
        yhi = cy[front] + R[front]
        ta = tan_half * aspect
        ndc_x0 = np.minimum(xlo / (zlo * ta), xlo / (zhi * ta))
        ndc_x1 = np.maximum(xhi / (zlo * ta), xhi / (zhi * ta))
        ndc_y0 = np.minimum(ylo / (zlo * tan_half), ylo / (zhi * tan_half))
        ndc_y1 = np.maximum(yhi / (zlo * tan_half), yhi / (zhi * tan_half))
        x0[front] = np.floor((ndc_x0 + 1.0) * 0.5 * w).astype(np.int64)
        x1[front] = np.floor((ndc_x1 + 1.0) * 0.5 * w).astype(np.int64)
        # +y in ndc is up, which is row 0
        y0[front] = np.floor((1.0 - ndc_y1) * 0.5 * h).astype(np.int64)
        y1[front] = np.floor((1.0 - ndc_y0) * 0.5 * h).astype(np.int64)

    offscreen = behind | (x1 < 0) | (x0 > w - 1) | (y1 < 0) | (y0 > h - 1)
    tx0 = np.clip(x0, 0, w - 1) // TILE_PX
    tx1 = np.clip(x1, 0, w - 1) // TILE_PX
    ty0 = np.clip(y0, 0, h - 1) // TILE_PX
    ty1 = np.clip(y1, 0, h - 1) // TILE_PX
    tx1 = np.where(offscreen, tx0 - 1, tx1)  # empty range -> dropped

    minz = np.maximum(cz - R, 0.0)
    tiles, prims, mz = K.fill_tile_pairs(tx0, tx1, ty0, ty1, minz, tiles_x)
    order = np.lexsort((prims, mz, tiles))
    tiles = tiles[order]
    prims = prims[order]
    mz = mz[order]
    ntiles = tiles_x * tiles_y
    tile_start = np.zeros(ntiles + 1, dtype=np.int64)
    np.add.at(tile_start, tiles + 1, 1)
    np.cumsum(tile_start, out=tile_start)
    return tiles_x, ntiles, tile_start, prims, mz


def render_gbuffer(scene: Scene, camera: Camera) -> GBuffer:
    """Cast one primary ray per pixel center; record the nearest visible
    post-clip hit per pixel."""
    w, h = camera.viewport
    right, up, fwd, tan_half, aspect = camera.basis()
    tiles_x, ntiles, tile_start, tile_items, tile_minz = _tile_lists(scene, camera)
    g = GBuffer.allocate(w, h)
    nonconv = np.zeros(ntiles, dtype=np.int64)
    K.render_tiles(w, h,
                   camera.position, right, up, fwd, tan_half, aspect,
                   camera.near, camera.far,
                   TILE_PX, tiles_x, tile_start, tile_items, tile_minz,
                   scene.kinds, scene.params, scene.bin_ids,
                   scene.visible, scene.exempt,
                   scene.plane_n, scene.plane_off,
                   g.view_z, g.t, g.position, g.normal, g.bin_id, g.kind,
                   nonconv)
    scene.stats.count += int(nonconv.sum())
    return g


def shade_phong(gbuffer: GBuffer, camera: Camera,
                ambient: float = PHONG_AMBIENT,
                diffuse: float = PHONG_DIFFUSE,
                specular: float = PHONG_SPECULAR,
                shininess: float = PHONG_SHININESS,
                background=DEFAULT_BACKGROUND) -> np.ndarray:
    """White-material headlight shading; the light rides on the camera,
    so with v = l the reflected term collapses to 2(n.l)^2 - 1."""
    to_cam = camera.position - gbuffer.position
    norm = np.sqrt((to_cam ** 2).sum(axis=2))
    norm = np.where(norm == 0.0, 1.0, norm)
    l = to_cam / norm[..., None]
    ndl = np.clip((l * gbuffer.normal).sum(axis=2), 0.0, None)
    rdv = np.clip(2.0 * ndl * ndl - 1.0, 0.0, None)
    intensity = ambient + diffuse * ndl + specular * rdv ** shininess
    out = np.repeat(intensity[..., None], 3, axis=2)
    out[gbuffer.miss] = background
    return out


def ssao_kernel_points(samples: int, seed: int) -> np.ndarray:
    """Seeded low-discrepancy hemisphere points (z up), radially packed
    toward the origin so close occluders weigh more."""
    i = np.arange(samples, dtype=np.float64)
    bits = np.arange(samples, dtype=np.uint32)
    bits = ((bits & np.uint32(0x55555555)) << np.uint32(1)) | ((bits & np.uint32(0xAAAAAAAA)) >> np.uint32(1))
    bits = ((bits & np.uint32(0x33333333)) << np.uint32(2)) | ((bits & np.uint32(0xCCCCCCCC)) >> np.uint32(2))
    bits = ((bits & np.uint32(0x0F0F0F0F)) << np.uint32(4)) | ((bits & np.uint32(0xF0F0F0F0)) >> np.uint32(4))
    bits = ((bits & np.uint32(0x00FF00FF)) << np.uint32(8)) | ((bits & np.uint32(0xFF00FF00)) >> np.uint32(8))
    bits = (bits << np.uint32(16)) | (bits >> np.uint32(16))
    vdc = bits.astype(np.float64) * 2.3283064365386963e-10
    s1 = (int(K._hash32(np.uint32(seed & 0xFFFFFFFF)))) / 4294967296.0
    s2 = (int(K._hash32(np.uint32((seed ^ 0x9E3779B9) & 0xFFFFFFFF)))) / 4294967296.0
    u1 = (i / samples + s1) % 1.0
    u2 = (vdc + s2) % 1.0
    r = np.sqrt(u2)
    phi = 2.0 * math.pi * u1
    pts = np.stack([r * np.cos(phi), r * np.sin(phi), np.sqrt(1.0 - u2)], axis=1)
    scale = 0.1 + 0.9 * ((i + 0.5) / samples) ** 2
    return pts * scale[:, None]


def ssao_pass(gbuffer: GBuffer, camera: Camera, radius: float,
              samples: int = 16, seed: int = 0) -> np.ndarray:
    """Per-pixel occlusion in [0, 1] from depth-buffer comparison of
    hemisphere samples within the given world-space radius."""
    if radius <= 0:
        raise SkeinError(f"occlusion radius must be positive, got {radius}")
    if samples < 8:
        raise SkeinError("need at least 8 occlusion samples per pixel")
    right, up, fwd, tan_half, aspect = camera.basis()
    kernel = ssao_kernel_points(samples, seed)
    out = np.zeros_like(gbuffer.view_z)
    bias = 0.02 * radius
    K.ssao_pass_kernel(gbuffer.view_z, gbuffer.position, gbuffer.normal,
                       camera.position, right, up, fwd, tan_half, aspect,
                       kernel, radius, bias, seed & 0xFFFFFFFF, out)
    return out


def combine_ssao(near_occ: np.ndarray, far_occ: np.ndarray) -> np.ndarray:
    """Multiply visibilities: occ = 1 - (1-near)(1-far). Pointwise at
    least max(near, far), and saturating where either pass saturates."""
    if near_occ.shape != far_occ.shape:
        raise SkeinError("occlusion buffer dimensions differ")
    return 1.0 - (1.0 - near_occ) * (1.0 - far_occ)


def quantize(channels: np.ndarray) -> np.ndarray:
    """[0,1] float to byte with half-up rounding."""
    return np.clip(np.floor(channels * 255.0 + 0.5), 0, 255).astype(np.uint8)


def composite(phong: np.ndarray, occlusion: np.ndarray, bin_colors: np.ndarray,
              gbuffer: GBuffer, background=DEFAULT_BACKGROUND,
              strength: float = 1.0) -> np.ndarray:
    """final = bin color x shading x (1 - occlusion), background at
    misses; bin_colors is the per-bin uint8 table from annotations."""
    # zeros, not empty: miss pixels enter the multiply below before they
    # are overwritten, and garbage there raises spurious float warnings
    colors = np.zeros_like(phong)
    hit = ~gbuffer.miss
    ids = gbuffer.bin_id[hit]
    colors[hit] = bin_colors[ids] / 255.0
    out = colors * phong * (1.0 - strength * occlusion)[..., None]
    out[gbuffer.miss] = background
    return quantize(out)


def render_frame(scene: Scene, camera: Camera, bin_colors: np.ndarray,
                 ssao: SsaoSettings | None = None,
                 background=DEFAULT_BACKGROUND):
    """Full pipeline. Returns (image uint8 HxWx3, gbuffer)."""
    g = render_gbuffer(scene, camera)
    ph = shade_phong(g, camera, background=background)
    if ssao is None:
        occ = np.zeros_like(g.view_z)
        strength = 1.0
    else:
        near = ssao_pass(g, camera, ssao.radius_near, ssao.samples_per_pixel,
                         ssao.seed)
        far = ssao_pass(g, camera, ssao.radius_far, ssao.samples_per_pixel,
                        ssao.seed + 1)
        occ = combine_ssao(near, far)
        strength = ssao.strength
    img = composite(ph, occ, bin_colors, g, background, strength)
    return img, g


def write_ppm_bytes(image: np.ndarray) -> bytes:
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise SkeinError("image must be HxWx3 uint8")
    h, w = image.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + image.tobytes()


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P6" or parts[2] != b"255":
        raise SkeinError(f"{path}: not a binary 8-bit PPM")
    w, h = (int(x) for x in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8, count=w * h * 3)
    return pixels.reshape(h, w, 3).copy()


def write_image(image: np.ndarray, path, fmt: str | None = None) -> None:
    """Write PPM (bit-exact layout) or PNG (via Pillow)."""
    path = str(path)
    if fmt is None:
        fmt = "png" if path.lower().endswith(".png") else "ppm"
    if fmt == "ppm":
        with open(path, "wb") as f:
            f.write(write_ppm_bytes(image))
    elif fmt == "png":
        from PIL import Image

        Image.fromarray(image, mode="RGB").save(path, format="PNG")
    else:
        raise SkeinError(f"unknown image format {fmt!r}")
