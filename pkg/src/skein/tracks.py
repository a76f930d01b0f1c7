"""1D genomic data: BED parsing, projection onto bins, normalization,
and color mapping.

Signals assign a numeric value per bin (with gaps allowed), while
segmentations assign labeled bin ranges. Markers highlight short loci
as enlarged spheres.
"""

from __future__ import annotations

import colorsys
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ParseError, SkeinError
from .model import BinRange, ChromatinModel

AGGREGATIONS = ("min", "max", "average", "median")

GRAY = (128, 128, 128)  # color for bins with no data


@dataclass(frozen=True)
class BedRecord:
    """One BED line: 0-based half-open interval plus optional columns."""

    chrom: str
    start_bp: int
    end_bp: int
    name: str | None = None
    score: float | None = None
    extra: tuple[str, ...] = ()

    def __post_init__(self):
        if self.start_bp < 0 or self.end_bp <= self.start_bp:
            raise ValueError(f"empty or negative interval {self.start_bp}..{self.end_bp}")


def parse_bed(text: str) -> list[BedRecord]:
    """Parse BED text into records, in file order.

    Tab-separated, at least 3 columns; ``track``/``browser``/``#`` header
    lines are skipped. Columns beyond the fifth are kept verbatim.
    """
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith(("#", "track", "browser")):
            continue
        cols = line.split("\t")
        if len(cols) < 3:
            raise ParseError(f"expected >= 3 tab-separated columns, got {len(cols)}", lineno)
        try:
            start = int(cols[1])
            end = int(cols[2])
        except ValueError:
            raise ParseError(f"non-integer coordinates {cols[1]!r}, {cols[2]!r}", lineno) from None
        if end <= start:
            raise ParseError(f"empty interval [{start}, {end})", lineno)
        if start < 0:
            raise ParseError(f"negative start {start}", lineno)
        name = None
        if len(cols) > 3 and cols[3] != ".":
            name = cols[3]
        score = None
        if len(cols) > 4 and cols[4] != ".":
            try:
                score = float(cols[4])
            except ValueError:
                raise ParseError(f"non-numeric score {cols[4]!r}", lineno) from None
        records.append(BedRecord(cols[0], start, end, name, score, tuple(cols[5:])))
    return records


def _format_score(score: float) -> str:
    if float(score).is_integer():
        return str(int(score))
    return repr(float(score))


def serialize_bed(records) -> str:
    """Inverse of :func:`parse_bed` (headers excepted); '.' fills gaps.

    BED column counts are uniform per file, so the widest record sets
    the width and narrower ones are padded with placeholders.
    """
    records = list(records)
    width = 3
    for r in records:
        if r.extra:
            width = max(width, 5 + len(r.extra))
        elif r.score is not None:
            width = max(width, 5)
        elif r.name is not None:
            width = max(width, 4)
    lines = []
    for r in records:
        cols = [r.chrom, str(r.start_bp), str(r.end_bp)]
        if width > 3:
            cols.append(r.name if r.name is not None else ".")
        if width > 4:
            cols.append(_format_score(r.score) if r.score is not None else ".")
        cols.extend(r.extra)
        cols.extend(["."] * (width - len(cols)))
        lines.append("\t".join(cols))
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class SignalTrack:
    """Per-bin numeric values; NaN marks bins without data."""

    name: str
    values: np.ndarray
    aggregation: str = "average"
    colormap_id: str = "sequential"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise SkeinError("signal values must be a 1D array")
        present = values[~np.isnan(values)]
        if present.size and not np.isfinite(present).all():
            raise SkeinError("signal contains non-finite values")
        if self.aggregation not in AGGREGATIONS:
            raise SkeinError(f"unknown aggregation {self.aggregation!r}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Segment:
    label: str
    bins: BinRange
    color: tuple[int, int, int]
    visible: bool = True


@dataclass
class SegmentationTrack:
    """Labeled bin ranges. Overlapping segments are allowed but flagged."""

    name: str
    segments: list[Segment]
    has_overlaps: bool = field(init=False, default=False)

    def __post_init__(self):
        spans = sorted((s.bins.first, s.bins.last) for s in self.segments)
        for (f0, l0), (f1, _) in zip(spans, spans[1:]):
            if f1 <= l0:
                self.has_overlaps = True
                break


@dataclass(frozen=True)
class Marker:
    """A salient locus drawn as an enlarged, recolored sphere."""

    locus: BinRange
    color: tuple[int, int, int]
    radius_scale: float = 2.0

    def __post_init__(self):
        if self.radius_scale <= 1.0:
            raise SkeinError(f"marker radius_scale must be > 1, got {self.radius_scale}")


def _bins_overlapping(model: ChromatinModel, chrom: str, start: int, end: int):
    """Local overlap arithmetic shared by aggregation and track loaders.

    Returns (first, last) global bin indices or None when the record
    misses the part entirely.
    """
    try:
        part = model.part_by_name(chrom)
    except KeyError:
        return None
    res = model.resolution_bp
    offset = model.part_offset(chrom)
    lo = max(start - offset, 0)
    hi = min(end - offset, len(part) * res)
    if hi <= lo:
        return None
    return part.first + lo // res, part.first + (-(-hi // res) - 1)


def aggregate_signal(records, model: ChromatinModel, method: str = "average",
                     name: str = "signal", colormap_id: str = "sequential"):
    """Project scored records onto bins.

    Every record overlapping a bin's genomic span contributes its score
    (any overlap counts); the per-bin scores are reduced with *method*.
    Bins without any scored record become NaN. Returns the track and
    the number of records skipped for referencing unknown parts.
    """
    if method not in AGGREGATIONS:
        raise SkeinError(f"unknown aggregation {method!r}")
    per_bin: list[list[float]] = [[] for _ in range(model.bin_count)]
    skipped = 0
    for rec in records:
        hit = _bins_overlapping(model, rec.chrom, rec.start_bp, rec.end_bp)
        if hit is None:
            skipped += 1
            continue
        if rec.score is None:
            continue
        first, last = hit
        for b in range(first, last + 1):
            per_bin[b].append(rec.score)
    reduce = {"min": min, "max": max,
              "average": lambda v: sum(v) / len(v),
              "median": lambda v: float(np.median(v))}[method]
    values = np.full(model.bin_count, np.nan)
    for b, scores in enumerate(per_bin):
        if scores:
            values[b] = reduce(scores)
    return SignalTrack(name, values, method, colormap_id), skipped


def normalize_values(values: np.ndarray) -> np.ndarray:
    """Rescale present values linearly onto [0, 1]; NaN stays NaN.

    A constant signal maps to 0.5 so the track stays visible.
    """
    values = np.asarray(values, dtype=np.float64)
    present = ~np.isnan(values)
    if not present.any():
        raise SkeinError("cannot normalize an all-absent track")
    lo = values[present].min()
    hi = values[present].max()
    out = np.full_like(values, np.nan)
    if hi == lo:
        out[present] = 0.5
    else:
        out[present] = (values[present] - lo) / (hi - lo)
    return out


class Colormap:
    """A lookup table sampled by linear interpolation between stops."""

    def __init__(self, colormap_id: str, stops, kind: str = "sequential"):
        self.id = colormap_id
        self.kind = kind
        self.stops = np.asarray(stops, dtype=np.float64)
        if self.stops.ndim != 2 or self.stops.shape[1] != 3 or self.stops.shape[0] < 2:
            raise SkeinError(f"colormap {colormap_id!r} needs >= 2 RGB stops")

    def sample(self, values: np.ndarray) -> np.ndarray:
        """Map values in [0, 1] to float RGB rows (NaN passes through)."""
        v = np.asarray(values, dtype=np.float64)
        scalar = v.ndim == 0
        v = np.atleast_1d(v)
        out = np.full((v.size, 3), np.nan)
        ok = ~np.isnan(v)
        pos = np.clip(v[ok], 0.0, 1.0) * (self.stops.shape[0] - 1)
        idx = np.minimum(pos.astype(np.int64), self.stops.shape[0] - 2)
        frac = (pos - idx)[:, None]
        out[ok] = self.stops[idx] * (1.0 - frac) + self.stops[idx + 1] * frac
        return out[0] if scalar else out


def _load_builtin_maps():
    with resources.files("skein.data").joinpath("colormaps.json").open() as f:
        raw = json.load(f)
    return {k: Colormap(k, v["stops"], v["kind"]) for k, v in raw.items()}


_BUILTIN: dict[str, Colormap] | None = None


def get_colormap(colormap_id: str) -> Colormap:
    global _BUILTIN
    if _BUILTIN is None:
        _BUILTIN = _load_builtin_maps()
    try:
        return _BUILTIN[colormap_id]
    except KeyError:
        raise SkeinError(f"unknown colormap {colormap_id!r}") from None


def float_to_byte(channels: np.ndarray) -> np.ndarray:
    """Quantize [0, 1] floats to bytes, rounding halves up (0.5 -> 128)."""
    return np.clip(np.floor(np.asarray(channels) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def apply_colormap(values: np.ndarray, colormap_id: str) -> np.ndarray:
    """Colorize normalized values; absent values become neutral gray."""
    cmap = get_colormap(colormap_id)
    rgb = cmap.sample(np.atleast_1d(values))
    out = np.empty((rgb.shape[0], 3), dtype=np.uint8)
    miss = np.isnan(rgb[:, 0])
    out[miss] = GRAY
    out[~miss] = float_to_byte(rgb[~miss])
    return out


def track_colors(track_name: str, count: int) -> list[tuple[int, int, int]]:
    """Deterministic pseudo-random segment colors seeded by track name."""
    seed = int.from_bytes(hashlib.sha256(track_name.encode()).digest()[:8], "little")
    rng = np.random.default_rng(seed)
    colors = []
    for _ in range(count):
        h = rng.random()
        s = 0.55 + 0.25 * rng.random()
        v = 0.75 + 0.2 * rng.random()
        r, g, b = colorsys.hsv_to_rgb(h, s, v)
        colors.append(tuple(int(round(c * 255)) for c in (r, g, b)))
    return colors


def segmentation_from_bed(records, model: ChromatinModel, name: str = "segmentation",
                          colors: list[tuple[int, int, int]] | None = None):
    """Build a segmentation from BED records (name column = label).

    Returns the track plus the count of records on unknown parts.
    """
    segments = []
    skipped = 0
    kept = []
    for i, rec in enumerate(records):
        hit = _bins_overlapping(model, rec.chrom, rec.start_bp, rec.end_bp)
        if hit is None:
            skipped += 1
            continue
        kept.append((rec, hit))
    palette = colors or track_colors(name, len(kept))
    for (rec, (first, last)), color in zip(kept, palette):
        label = rec.name if rec.name is not None else f"{rec.chrom}:{rec.start_bp}-{rec.end_bp}"
        segments.append(Segment(label, BinRange(first, last), tuple(color)))
    return SegmentationTrack(name, segments), skipped


def markers_from_bed(records, model: ChromatinModel, name: str = "markers",
                     default_scale: float = 2.0):
    """Markers from BED; the score column carries the radius scale."""
    markers = []
    skipped = 0
    palette = track_colors(name, len(records))
    for rec, color in zip(records, palette):
        hit = _bins_overlapping(model, rec.chrom, rec.start_bp, rec.end_bp)
        if hit is None:
            skipped += 1
            continue
        scale = rec.score if rec.score is not None else default_scale
        markers.append(Marker(BinRange(*hit), tuple(color), scale))
    return markers, skipped
