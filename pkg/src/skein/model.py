"""Chromatin bin models: loading, validation, normalization, and the
mapping between genomic coordinates and bin indices.

A model is an ordered list of 3D bin positions. Each bin stands for a
fixed number of basepairs (``resolution_bp``). Bins are grouped into
contiguous *parts* (typically chromosomes, or chromosome copies in
diploid data: each copy is simply its own part).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, SkeinError


@dataclass(frozen=True)
class Part:
    """A contiguous run of bins belonging to one named part."""

    name: str
    first: int
    last: int  # inclusive

    def __len__(self):
        return self.last - self.first + 1


@dataclass(frozen=True)
class GenomicInterval:
    """Half-open genomic interval ``[start_bp, end_bp)`` on one part."""

    part: str
    start_bp: int
    end_bp: int

    def __post_init__(self):
        if not (0 <= self.start_bp < self.end_bp):
            raise ValueError(
                f"invalid interval [{self.start_bp}, {self.end_bp}) on {self.part!r}"
            )

    def __str__(self):
        return f"{self.part}:{self.start_bp:,}-{self.end_bp:,}"


@dataclass(frozen=True)
class BinRange:
    """Inclusive range of bin indices."""

    first: int
    last: int

    def __post_init__(self):
        if not (0 <= self.first <= self.last):
            raise ValueError(f"invalid bin range {self.first}..{self.last}")

    def __len__(self):
        return self.last - self.first + 1

    def indices(self):
        return range(self.first, self.last + 1)


@dataclass(frozen=True)
class ChromatinModel:
    """Ordered 3D bin positions with part segmentation.

    Immutable after construction; the position array is locked so the
    model can be shared freely across threads.
    """

    name: str
    bins: np.ndarray  # (n, 3) float64
    parts: tuple[Part, ...]
    resolution_bp: int = 1
    assembly_offsets: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        bins = np.ascontiguousarray(np.asarray(self.bins, dtype=np.float64))
        if bins.ndim != 2 or bins.shape[1] != 3 or bins.shape[0] == 0:
            raise SkeinError("model needs a non-empty (n, 3) position array")
        if not np.isfinite(bins).all():
            raise SkeinError("model contains non-finite coordinates")
        if self.resolution_bp < 1:
            raise SkeinError(f"resolution_bp must be >= 1, got {self.resolution_bp}")
        bins.flags.writeable = False
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "parts", tuple(self.parts))
        n = bins.shape[0]
        prev_last = -1
        seen = set()
        for part in self.parts:
            if not (0 <= part.first <= part.last < n):
                raise SkeinError(f"part {part.name!r} range out of bounds")
            if part.first <= prev_last:
                raise SkeinError(f"part {part.name!r} overlaps or is out of order")
            if part.name in seen:
                raise SkeinError(f"duplicate part name {part.name!r}")
            seen.add(part.name)
            prev_last = part.last

    @property
    def bin_count(self) -> int:
        return self.bins.shape[0]

    def part_by_name(self, name: str) -> Part:
        for part in self.parts:
            if part.name == name:
                return part
        raise KeyError(f"unknown part {name!r}")

    def part_of_bin(self, bin_id: int) -> Part:
        if not 0 <= bin_id < self.bin_count:
            raise IndexError(f"bin {bin_id} out of range 0..{self.bin_count - 1}")
        for part in self.parts:
            if part.first <= bin_id <= part.last:
                return part
        raise KeyError(f"bin {bin_id} belongs to no part")

    def part_offset(self, name: str) -> int:
        return self.assembly_offsets.get(name, 0)

    def content_key(self) -> bytes:
        """Stable digest of positions and segmentation, used as cache key."""
        import hashlib

        h = hashlib.sha1()
        h.update(self.bins.tobytes())
        for part in self.parts:
            h.update(f"{part.name}\x00{part.first}\x00{part.last}\x01".encode())
        h.update(str(self.resolution_bp).encode())
        return h.digest()


def parse_model(text: str, name: str = "model", resolution_bp: int = 1,
                assembly_offsets: dict[str, int] | None = None) -> ChromatinModel:
    """Parse the skein-xyz model format.

    One bin per line, ``part x y z`` with fields separated by whitespace
    or commas; the part column may be omitted file-wide (a single
    implicit part ``all`` is used). Lines starting with ``#`` and blank
    lines are ignored. Bins of one part must be contiguous.
    """
    positions = []
    part_labels = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.replace(",", " ").split()
        if len(tokens) == 3:
            label = None
            coords = tokens
        elif len(tokens) == 4:
            label = tokens[0]
            coords = tokens[1:]
        else:
            raise ParseError(f"expected 3 or 4 columns, got {len(tokens)}", lineno)
        try:
            xyz = [float(c) for c in coords]
        except ValueError:
            raise ParseError(f"bad coordinate in {line!r}", lineno) from None
        if not all(math.isfinite(v) for v in xyz):
            raise ParseError("non-finite coordinate", lineno)
        if positions and (label is None) != (part_labels[-1] is None):
            raise ParseError("mixed 3- and 4-column lines", lineno)
        positions.append(xyz)
        part_labels.append(label)

    if not positions:
        raise ParseError("empty model")

    parts = []
    start = 0
    for i in range(1, len(positions) + 1):
        if i == len(positions) or part_labels[i] != part_labels[i - 1]:
            label = part_labels[start] or "all"
            parts.append(Part(label, start, i - 1))
            start = i
    seen = set()
    for part in parts:
        if part.name in seen:
            raise ParseError(f"part {part.name!r} appears in non-contiguous runs")
        seen.add(part.name)

    return ChromatinModel(
        name=name,
        bins=np.asarray(positions, dtype=np.float64),
        parts=tuple(parts),
        resolution_bp=resolution_bp,
        assembly_offsets=dict(assembly_offsets or {}),
    )


def serialize_model(model: ChromatinModel) -> str:
    """Inverse of :func:`parse_model`; float repr keeps the round trip exact."""
    lines = []
    for part in model.parts:
        for i in range(part.first, part.last + 1):
            x, y, z = (float(v) for v in model.bins[i])
            lines.append(f"{part.name} {x!r} {y!r} {z!r}")
    return "\n".join(lines) + "\n"


def normalize_model(model: ChromatinModel) -> ChromatinModel:
    """Translate the centroid to the origin and scale so the farthest bin
    sits at distance 1. All default radii assume this reference frame."""
    centroid = model.bins.mean(axis=0)
    centered = model.bins - centroid
    radius = float(np.sqrt((centered * centered).sum(axis=1)).max())
    if radius <= 0.0:
        raise SkeinError("cannot normalize: all bins coincide")
    return ChromatinModel(
        name=model.name,
        bins=centered / radius,
        parts=model.parts,
        resolution_bp=model.resolution_bp,
        assembly_offsets=dict(model.assembly_offsets),
    )


def bins_required(span_bp: int, resolution_bp: int) -> int:
    """Number of bins needed to tile a genomic span at a given resolution."""
    if span_bp <= 0 or resolution_bp < 1:
        raise ValueError("span and resolution must be positive")
    return -(-span_bp // resolution_bp)


def genomic_to_bins(model: ChromatinModel, interval: GenomicInterval) -> tuple[BinRange, bool]:
    """Map a genomic interval to the bins whose span overlaps it.

    Bin b of a part covers ``[offset + b*res, offset + (b+1)*res)`` in
    part-local genomic coordinates. Returns the inclusive bin range
    (global indices) and a flag set when the interval had to be clamped
    to the part extent.
    """
    part = model.part_by_name(interval.part)
    res = model.resolution_bp
    offset = model.part_offset(interval.part)
    clamped = False
    lo = interval.start_bp - offset
    hi = interval.end_bp - offset
    if lo < 0:
        lo = 0
        clamped = True
    part_span = len(part) * res
    if hi > part_span:
        hi = part_span
        clamped = True
    if hi <= lo:
        raise SkeinError(f"interval {interval} does not overlap part {part.name!r}")
    first_local = lo // res
    last_local = -(-hi // res) - 1
    return BinRange(part.first + first_local, part.first + last_local), clamped


def bin_to_genomic(model: ChromatinModel, bin_id: int) -> GenomicInterval:
    """Genomic span of one bin; inverse of genomic_to_bins on single bins."""
    part = model.part_of_bin(bin_id)
    res = model.resolution_bp
    offset = model.part_offset(part.name)
    local = bin_id - part.first
    return GenomicInterval(part.name, offset + local * res, offset + (local + 1) * res)


def inter_bin_spacings(model: ChromatinModel) -> np.ndarray:
    """Euclidean distances between consecutive bins, skipping part gaps.

    Chromosome gaps are not fiber segments; including them would skew
    the thickness statistics.
    """
    if model.bin_count < 2:
        raise SkeinError("spacings need at least 2 bins")
    diffs = np.diff(model.bins, axis=0)
    dist = np.sqrt((diffs * diffs).sum(axis=1))
    keep = np.ones(model.bin_count - 1, dtype=bool)
    for part in model.parts:
        if part.last < model.bin_count - 1:
            keep[part.last] = False
    spacings = dist[keep]
    if spacings.size == 0:
        raise SkeinError("model has no intra-part bin pairs")
    return spacings
