"""On-demand distance maps with level-of-detail merging, selection-
restricted maps, and solvent-accessible surface area.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import SkeinError
from .model import BinRange, ChromatinModel

TILE_SIZE = 256


def choose_level(visible_bins: int, tile: int = TILE_SIZE) -> int:
    """Coarsest level that still fits the visible span into one tile."""
    if visible_bins <= tile:
        return 0
    return max(0, math.ceil(math.log2(visible_bins / tile)))


def merged_part_sizes(model: ChromatinModel, level: int) -> list[int]:
    g = 1 << level
    return [-(-len(p) // g) for p in model.parts]


def merge_positions(positions: np.ndarray, part_sizes, level: int) -> np.ndarray:
    """Average groups of 2^level consecutive rows, never across part
    boundaries; a short tail averages over its actual members.

    Accumulation is sequential so results are reproducible bit for bit.
    """
    if level < 0:
        raise SkeinError(f"level must be >= 0, got {level}")
    positions = np.asarray(positions, dtype=np.float64)
    if level == 0:
        return positions.copy()
    g = 1 << level
    out = []
    base = 0
    for size in part_sizes:
        for start in range(0, size, g):
            stop = min(start + g, size)
            sx = sy = sz = 0.0
            for j in range(base + start, base + stop):
                sx += positions[j, 0]
                sy += positions[j, 1]
                sz += positions[j, 2]
            cnt = stop - start
            out.append((sx / cnt, sy / cnt, sz / cnt))
        base += size
    return np.array(out, dtype=np.float64)


def merge_bins(model: ChromatinModel, level: int) -> np.ndarray:
    return merge_positions(model.bins, [len(p) for p in model.parts], level)


@dataclass(frozen=True)
class DistanceTile:
    row_range: BinRange  # indices of merged bins at this level
    col_range: BinRange
    level: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.row_range.indices()), len(self.col_range.indices())):
            raise SkeinError("tile value shape does not match its ranges")
        if (v < 0).any():
            raise SkeinError("distances cannot be negative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def _pairwise(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    dx = rows[:, 0][:, None] - cols[:, 0][None, :]
    dy = rows[:, 1][:, None] - cols[:, 1][None, :]
    dz = rows[:, 2][:, None] - cols[:, 2][None, :]
    return np.sqrt(dx * dx + dy * dy + dz * dz)


def distance_tile(model: ChromatinModel, level: int,
                  row_range: BinRange | None = None,
                  col_range: BinRange | None = None,
                  _merged: np.ndarray | None = None) -> DistanceTile:
    """Euclidean distances between merged positions for the requested
    index ranges (defaults to the full map)."""
    merged = merge_bins(model, level) if _merged is None else _merged
    m = merged.shape[0]
    if row_range is None:
        row_range = BinRange(0, m - 1)
    if col_range is None:
        col_range = BinRange(0, m - 1)
    for rng in (row_range, col_range):
        if rng.last >= m:
            raise SkeinError(
                f"range {rng.first}..{rng.last} exceeds {m} merged bins at level {level}")
    rows = merged[row_range.first:row_range.last + 1]
    cols = merged[col_range.first:col_range.last + 1]
    return DistanceTile(row_range, col_range, level, _pairwise(rows, cols))


def distance_map_for_selection(model: ChromatinModel, selected, level: int = 0):
    """Distances restricted to the selected bins, densely re-indexed.

    Returns (tile, mapping) where mapping[i] lists the original bin
    indices merged into row/col i.
    """
    selected = np.asarray(selected)
    if selected.dtype == bool:
        idx = np.flatnonzero(selected)
    else:
        idx = np.unique(selected.astype(np.int64))
    if idx.size == 0:
        raise SkeinError("selection is empty")
    if idx[0] < 0 or idx[-1] >= model.bin_count:
        raise SkeinError("selection index out of range")
    # group the dense subsequence, still never across part boundaries
    part_of = np.empty(idx.size, dtype=np.int64)
    for pi, part in enumerate(model.parts):
        inside = (idx >= part.first) & (idx <= part.last)
        part_of[inside] = pi
    sizes = [int((part_of == pi).sum()) for pi in range(len(model.parts))]
    sizes = [s for s in sizes if s > 0]
    merged = merge_positions(model.bins[idx], sizes, level)
    g = 1 << level
    mapping = []
    base = 0
    for size in sizes:
        for start in range(0, size, g):
            stop = min(start + g, size)
            mapping.append(idx[base + start:base + stop].copy())
        base += size
    m = merged.shape[0]
    rng = BinRange(0, m - 1)
    tile = DistanceTile(rng, rng, level, _pairwise(merged, merged))
    return tile, mapping


def tile_to_tsv(tile: DistanceTile) -> str:
    lines = ["\t".join(repr(float(v)) for v in row) for row in tile.values]
    return "\n".join(lines) + "\n"


class TileCache:
    """LRU over computed tiles; recomputation is exact, so eviction is
    purely an optimization."""

    def __init__(self, capacity: int = 64):
        if capacity < 1:
            raise SkeinError("cache capacity must be positive")
        self.capacity = capacity
        self._lock = threading.Lock()
        self._store: OrderedDict = OrderedDict()
        self.hits = 0
        self.misses = 0

    def tile(self, model: ChromatinModel, level: int,
             row_range: BinRange | None = None,
             col_range: BinRange | None = None) -> DistanceTile:
        key = (model.content_key(), level,
               None if row_range is None else (row_range.first, row_range.last),
               None if col_range is None else (col_range.first, col_range.last))
        with self._lock:
            if key in self._store:
                self._store.move_to_end(key)
                self.hits += 1
                return self._store[key]
        value = distance_tile(model, level, row_range, col_range)
        with self._lock:
            self._store[key] = value
            self._store.move_to_end(key)
            self.misses += 1
            while len(self._store) > self.capacity:
                self._store.popitem(last=False)
        return value


# ---------------------------------------------------------------------------
# solvent-accessible surface area

@dataclass(frozen=True)
class SasaParams:
    bin_radius: float
    probe_radius: float | None = None  # None -> 0.4 x bin_radius
    sample_count: int = 92

    def __post_init__(self):
        if self.bin_radius <= 0:
            raise SkeinError(f"bin_radius must be positive, got {self.bin_radius}")
        probe = self.probe_radius
        if probe is None:
            probe = 0.4 * self.bin_radius
        if probe < 0:
            raise SkeinError(f"probe_radius must be >= 0, got {probe}")
        object.__setattr__(self, "probe_radius", float(probe))
        if self.sample_count < 92:
            raise SkeinError(
                f"sample_count must be at least 92, got {self.sample_count}")


def sphere_points(count: int) -> np.ndarray:
    """Deterministic quasi-uniform unit-sphere points (golden spiral)."""
    i = np.arange(count, dtype=np.float64)
    z = 1.0 - 2.0 * (i + 0.5) / count
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def compute_sasa(model: ChromatinModel, params: SasaParams,
                 subset=None) -> np.ndarray:
    """Exposed area per considered bin sphere.

    Each bin carries a sphere of radius bin_radius + probe_radius;
    a surface sample is accessible iff no other considered sphere
    contains it. Bins outside the subset get NaN.
    """
    n = model.bin_count
    if subset is None:
        idx = np.arange(n, dtype=np.int64)
    else:
        subset = np.asarray(subset)
        idx = np.flatnonzero(subset) if subset.dtype == bool else np.unique(subset.astype(np.int64))
        if idx.size == 0:
            raise SkeinError("subset is empty")
        if idx[0] < 0 or idx[-1] >= n:
            raise SkeinError("subset index out of range")
    R = params.bin_radius + params.probe_radius
    centers = np.ascontiguousarray(model.bins[idx])
    radii = np.full(idx.size, R)

    lo = centers.min(axis=0) - R
    hi = centers.max(axis=0) + R
    span = hi - lo
    cell = max(2.0 * R, 1e-12)
    dims = np.maximum(1, np.minimum(128, np.ceil(span / cell))).astype(np.int64)
    cell = float(max(cell, (span / dims).max(), 1e-12))
    ranges = K.grid_cell_ranges(centers, radii, lo, 1.0 / cell, dims)
    cell_start, cell_items = K.grid_fill(ranges, dims)

    pts = sphere_points(params.sample_count)
    out_rows = np.empty(idx.size)
    K.sasa_kernel(centers, radii, pts, idx, lo, cell, dims,
                  cell_start, cell_items, R, out_rows)
    out = np.full(n, np.nan)
    out[idx] = out_rows
    return out
