"""Bin selections: creation tools, color precedence, visibility, and
BED round trips. Selections are the linking currency between the 3D
view, tracks, and restricted analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SkeinError
from .model import BinRange, ChromatinModel, bin_to_genomic, genomic_to_bins
from .tracks import GRAY, BedRecord, Marker, track_colors


@dataclass(frozen=True)
class Selection:
    """Named bin subset. bins is a boolean mask over all model bins."""

    id: int
    name: str
    bins: np.ndarray
    color: tuple[int, int, int]
    visible: bool = True
    clip_exempt: bool = False
    order: int = 0

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=bool)
        bins.flags.writeable = False
        object.__setattr__(self, "bins", bins)

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bins)

    def count(self) -> int:
        return int(self.bins.sum())


class SelectionSet:
    """Ordered selections over one model; creation order is precedence."""

    def __init__(self, bin_count: int):
        if bin_count < 1:
            raise SkeinError("selection set needs a positive bin count")
        self.bin_count = bin_count
        self._items: list[Selection] = []
        self._next_id = 0

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def get(self, sel_id: int) -> Selection:
        for s in self._items:
            if s.id == sel_id:
                return s
        raise KeyError(f"no selection with id {sel_id}")

    def create(self, name: str, bins=None, color=None, visible: bool = True,
               clip_exempt: bool = False) -> Selection:
        mask = np.zeros(self.bin_count, dtype=bool)
        if bins is not None:
            bins = np.asarray(bins)
            if bins.dtype == bool:
                if bins.shape != (self.bin_count,):
                    raise SkeinError("selection mask length must equal bin count")
                mask = bins.copy()
            else:
                if bins.size and (bins.min() < 0 or bins.max() >= self.bin_count):
                    raise SkeinError("selection bin index out of range")
                mask[bins] = True
        if color is None:
            color = track_colors(name, self._next_id + 1)[-1]
        sel = Selection(self._next_id, name, mask, tuple(color), visible,
                        clip_exempt, order=self._next_id)
        self._next_id += 1
        self._items.append(sel)
        return sel

    def add(self, sel: Selection) -> Selection:
        """Insert a fully-formed selection (e.g. restored from a saved
        document); ids must stay unique."""
        if sel.bins.shape != (self.bin_count,):
            raise SkeinError("selection mask length must equal bin count")
        if any(s.id == sel.id for s in self._items):
            raise SkeinError(f"duplicate selection id {sel.id}")
        self._items.append(sel)
        self._next_id = max(self._next_id, sel.id + 1)
        return sel

    def replace(self, sel: Selection) -> Selection:
        for i, s in enumerate(self._items):
            if s.id == sel.id:
                self._items[i] = sel
                return sel
        raise KeyError(f"no selection with id {sel.id}")

    def remove(self, sel_id: int) -> None:
        self._items = [s for s in self._items if s.id != sel_id]

    def by_precedence(self):
        """Newest creation first."""
        return sorted(self._items, key=lambda s: -s.order)


def select_point(sel: Selection, bin_id: int, remove: bool = False) -> Selection:
    """Set (or with remove=True clear) one bin; idempotent."""
    n = sel.bins.shape[0]
    if not 0 <= bin_id < n:
        raise SkeinError(f"bin {bin_id} out of range 0..{n - 1}")
    bins = sel.bins.copy()
    bins[bin_id] = not remove
    return replace(sel, bins=bins)


def select_sphere(model: ChromatinModel, center, radius: float) -> np.ndarray:
    """Mask of all bins within the radius of a bin or an arbitrary point."""
    if radius <= 0:
        raise SkeinError(f"selection radius must be positive, got {radius}")
    if np.isscalar(center) or isinstance(center, (int, np.integer)):
        center = model.bins[int(center)]
    center = np.asarray(center, dtype=np.float64)
    d2 = ((model.bins - center) ** 2).sum(axis=1)
    return d2 <= radius * radius


def select_sequence(model: ChromatinModel, bin_a: int, bin_b: int) -> BinRange:
    """Inclusive index range between two bins, order-free. The range may
    cross part boundaries; indices are global."""
    n = model.bin_count
    for b in (bin_a, bin_b):
        if not 0 <= b < n:
            raise SkeinError(f"bin {b} out of range 0..{n - 1}")
    return BinRange(min(bin_a, bin_b), max(bin_a, bin_b))


def resolve_bin_color(bin_id: int, base_color, selection_set: SelectionSet,
                      markers=()) -> tuple[tuple[int, int, int], float]:
    """(color, radius_scale) with precedence marker > newest visible
    selection containing the bin > base annotation > gray."""
    for m in markers:
        if m.locus.first <= bin_id <= m.locus.last:
            return tuple(m.color), float(m.radius_scale)
    for sel in selection_set.by_precedence():
        if sel.visible and sel.bins[bin_id]:
            return tuple(sel.color), 1.0
    if base_color is not None:
        return tuple(base_color), 1.0
    return GRAY, 1.0


def bin_color_table(bin_count: int, selection_set: SelectionSet | None = None,
                    markers=(), base_colors=None):
    """Vectorized resolve_bin_color over all bins.

    Returns (colors uint8 (n,3), radius_scale float (n,)).
    """
    colors = np.tile(np.array(GRAY, dtype=np.uint8), (bin_count, 1))
    if base_colors is not None:
        base_colors = np.asarray(base_colors)
        if base_colors.shape != (bin_count, 3):
            raise SkeinError("base color table must be (bin_count, 3)")
        colors[:] = base_colors
    if selection_set is not None:
        # oldest first so newer selections overwrite
        for sel in sorted(selection_set, key=lambda s: s.order):
            if sel.visible:
                colors[sel.bins] = sel.color
    scale = np.ones(bin_count)
    for m in markers:
        sl = slice(m.locus.first, m.locus.last + 1)
        colors[sl] = m.color
        scale[sl] = m.radius_scale
    return colors, scale


def visible_bins(selection_set: SelectionSet | None = None,
                 segmentations=(), bin_count: int | None = None) -> np.ndarray:
    """Visibility mask: a bin is hidden when any containing selection or
    segmentation segment is hidden (AND of visibilities)."""
    if bin_count is None:
        if selection_set is None:
            raise SkeinError("need bin_count when no selection set is given")
        bin_count = selection_set.bin_count
    mask = np.ones(bin_count, dtype=bool)
    if selection_set is not None:
        for sel in selection_set:
            if not sel.visible:
                mask[sel.bins] = False
    for track in segmentations:
        for seg in track.segments:
            if not seg.visible:
                mask[seg.bins.first:seg.bins.last + 1] = False
    return mask


def exempt_bins(selection_set: SelectionSet | None, planes=(),
                bin_count: int | None = None) -> np.ndarray:
    """Bins that stay visible through cutting planes: members of any
    clip-exempt selection or of a selection a plane exempts by id."""
    if bin_count is None:
        if selection_set is None:
            raise SkeinError("need bin_count when no selection set is given")
        bin_count = selection_set.bin_count
    mask = np.zeros(bin_count, dtype=bool)
    if selection_set is None:
        return mask
    plane_ids = set()
    for pl in planes:
        plane_ids.update(pl.exempt_selections)
    for sel in selection_set:
        if sel.clip_exempt or sel.id in plane_ids:
            mask |= sel.bins
    return mask


def primitive_masks(prim_bin_ids, visible_mask: np.ndarray,
                    exempt_mask: np.ndarray):
    """Map per-bin visibility/exemption onto primitives by bin_id."""
    ids = np.asarray(prim_bin_ids, dtype=np.int64)
    return (visible_mask[ids].astype(np.uint8),
            exempt_mask[ids].astype(np.uint8))


def union(a: Selection, b: Selection) -> np.ndarray:
    return a.bins | b.bins


def intersection(a: Selection, b: Selection) -> np.ndarray:
    return a.bins & b.bins


def selection_to_bed(model: ChromatinModel, sel: Selection) -> list[BedRecord]:
    """Contiguous selected runs as BED records (one per run per part)."""
    records = []
    idx = sel.indices()
    if idx.size == 0:
        return records
    run_start = int(idx[0])
    prev = int(idx[0])
    runs = []
    for b in idx[1:]:
        b = int(b)
        if b != prev + 1 or model.part_of_bin(b) is not model.part_of_bin(prev):
            runs.append((run_start, prev))
            run_start = b
        prev = b
    runs.append((run_start, prev))
    for first, last in runs:
        gi0 = bin_to_genomic(model, first)
        gi1 = bin_to_genomic(model, last)
        records.append(BedRecord(gi0.part, gi0.start_bp, gi1.end_bp, sel.name))
    return records


def selection_from_bed(records, model: ChromatinModel, selection_set: SelectionSet,
                       name: str, **kwargs) -> tuple[Selection, int]:
    """Union of bins overlapped by the records; unknown parts are
    skipped and counted."""
    mask = np.zeros(model.bin_count, dtype=bool)
    skipped = 0
    for rec in records:
        try:
            rng, _ = genomic_to_bins(
                model, _interval(model, rec.chrom, rec.start_bp, rec.end_bp))
        except KeyError:
            skipped += 1
            continue
        except SkeinError:
            skipped += 1
            continue
        mask[rng.first:rng.last + 1] = True
    return selection_set.create(name, mask, **kwargs), skipped


def _interval(model, chrom, start, end):
    from .model import GenomicInterval

    return GenomicInterval(chrom, start, end)
