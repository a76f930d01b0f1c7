"""Session documents: the single serialized state shared between the
command line, the analysis core, and any interactive front end.

Serialization is canonical (sorted keys, two-space indent, trailing
newline) so write -> read -> write is byte-stable.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import SessionError, SkeinError
from .model import BinRange, ChromatinModel, normalize_model, parse_model
from .raycast import CuttingPlane
from .render import Camera
from .selections import Selection, SelectionSet
from .tracks import Marker, parse_bed

SCHEMA_VERSION = 1

_schema_cache = None


def _schema():
    global _schema_cache
    if _schema_cache is None:
        with resources.files("skein.data").joinpath("session.schema.json").open() as f:
            _schema_cache = json.load(f)
    return _schema_cache


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def validate_session(doc: dict) -> None:
    import jsonschema

    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as e:
        raise SessionError(f"invalid session: {e.message}") from None
    if doc["version"] > SCHEMA_VERSION:
        raise SessionError(
            f"session version {doc['version']} is newer than supported {SCHEMA_VERSION}")


def default_session(model_path: str, resolution_bp: int, name: str = "model",
                    seed: int = 0) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "seed": seed,
        "models": [{"name": name, "path": str(model_path),
                    "resolution_bp": int(resolution_bp), "normalize": True}],
        "tracks": [],
        "selections": [],
        "markers": [],
        "cameras": [],
        "render": {
            "representation": "straight_tube",
            "radius": None,
            "background": [1.0, 1.0, 1.0],
            "width": 512,
            "height": 512,
            "ssao": {"enabled": True, "radius_near": None, "radius_far": None,
                     "samples": 16, "seed": None, "strength": 1.0},
        },
        "planes": [],
        "layout": {},
    }


def load_session(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SessionError(f"{path}: not valid JSON: {e}") from None
    except OSError as e:
        raise SessionError(f"{path}: {e}") from None
    if not isinstance(doc, dict):
        raise SessionError(f"{path}: session root must be an object")
    validate_session(doc)
    return doc


def save_session(doc: dict, path) -> None:
    validate_session(doc)
    Path(path).write_text(canonical_json(doc))


# ---------------------------------------------------------------------------
# document <-> runtime objects

def runs_from_mask(mask: np.ndarray) -> list[list[int]]:
    idx = np.flatnonzero(np.asarray(mask, dtype=bool))
    runs = []
    for b in idx:
        b = int(b)
        if runs and runs[-1][1] == b - 1:
            runs[-1][1] = b
        else:
            runs.append([b, b])
    return runs


def mask_from_runs(runs, bin_count: int) -> np.ndarray:
    mask = np.zeros(bin_count, dtype=bool)
    for first, last in runs:
        if not (0 <= first <= last < bin_count):
            raise SessionError(f"selection run {first}..{last} out of range")
        mask[first:last + 1] = True
    return mask


def model_from_session(doc: dict, base_dir=None, index: int = 0) -> ChromatinModel:
    try:
        ref = doc["models"][index]
    except IndexError:
        raise SessionError(f"session has no model #{index}") from None
    path = Path(ref["path"])
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    try:
        text = path.read_text()
    except OSError as e:
        raise SessionError(f"cannot read model {path}: {e}") from None
    model = parse_model(text, name=ref["name"], resolution_bp=ref["resolution_bp"])
    if ref.get("normalize", True):
        model = normalize_model(model)
    return model


def selection_set_from_session(doc: dict, bin_count: int) -> SelectionSet:
    sset = SelectionSet(bin_count)
    entries = sorted(doc.get("selections", []), key=lambda s: s.get("order", s["id"]))
    for entry in entries:
        try:
            sset.add(Selection(entry["id"], entry["name"],
                               mask_from_runs(entry["runs"], bin_count),
                               tuple(entry.get("color", (255, 200, 0))),
                               entry.get("visible", True),
                               entry.get("clip_exempt", False),
                               entry.get("order", entry["id"])))
        except SkeinError as e:
            raise SessionError(str(e)) from None
    return sset


def selections_to_session(sset: SelectionSet) -> list[dict]:
    out = []
    for sel in sset:
        out.append({
            "id": sel.id,
            "name": sel.name,
            "runs": runs_from_mask(sel.bins),
            "color": [int(c) for c in sel.color],
            "visible": bool(sel.visible),
            "clip_exempt": bool(sel.clip_exempt),
            "order": sel.order,
        })
    return out


def markers_from_session(doc: dict, bin_count: int) -> list[Marker]:
    markers = []
    for entry in doc.get("markers", []):
        first, last = entry["first"], entry["last"]
        if not (0 <= first <= last < bin_count):
            raise SessionError(f"marker {first}..{last} out of range")
        markers.append(Marker(BinRange(first, last),
                              tuple(entry.get("color", (255, 0, 0))),
                              entry.get("radius_scale", 2.0)))
    return markers


def planes_from_session(doc: dict) -> list[CuttingPlane]:
    planes = []
    for entry in doc.get("planes", []):
        n = np.asarray(entry["normal"], dtype=np.float64)
        ln = np.linalg.norm(n)
        if ln == 0:
            raise SessionError("cutting plane normal cannot be zero")
        # rescale offset with the normal so the half-space is unchanged
        planes.append(CuttingPlane(n / ln, entry["offset"] / ln,
                                   entry.get("keep_side", "negative"),
                                   entry.get("axis"),
                                   tuple(entry.get("exempt_selections", ()))))
    return planes


def planes_to_session(planes) -> list[dict]:
    out = []
    for pl in planes:
        out.append({
            "normal": [float(x) for x in pl.normal],
            "offset": float(pl.offset),
            "keep_side": pl.keep_side,
            "axis": pl.axis_aligned,
            "exempt_selections": list(pl.exempt_selections),
        })
    return out


def camera_from_session(doc: dict, index: int = 0,
                        fallback: Camera | None = None) -> Camera | None:
    cams = doc.get("cameras", [])
    if index >= len(cams):
        return fallback
    c = cams[index]
    if "position" not in c or "target" not in c:
        return fallback
    width = doc.get("render", {}).get("width", 512)
    height = doc.get("render", {}).get("height", 512)
    return Camera(np.asarray(c["position"]), np.asarray(c["target"]),
                  np.asarray(c.get("up", (0.0, 1.0, 0.0))),
                  c.get("vertical_fov", 45.0),
                  tuple(c.get("viewport", (width, height))),
                  c.get("near", 1e-6), c.get("far", 1e12))


def camera_to_session(camera: Camera, sync_group=None) -> dict:
    return {
        "position": [float(x) for x in camera.position],
        "target": [float(x) for x in camera.target],
        "up": [float(x) for x in camera.up],
        "vertical_fov": float(camera.vertical_fov),
        "viewport": [int(camera.viewport[0]), int(camera.viewport[1])],
        "near": float(camera.near),
        "far": float(camera.far),
        "sync_group": sync_group,
    }


def tracks_from_session(doc: dict, model: ChromatinModel, base_dir=None):
    """Load track files referenced by the session.

    Returns (signals, segmentations, markers, skipped_total).
    """
    from . import tracks as T

    signals = []
    segmentations = []
    markers = []
    skipped = 0
    for entry in doc.get("tracks", []):
        path = Path(entry["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        try:
            records = parse_bed(path.read_text())
        except OSError as e:
            raise SessionError(f"cannot read track {path}: {e}") from None
        kind = entry["kind"]
        if kind == "signal":
            track, sk = T.aggregate_signal(records, model,
                                           entry.get("aggregation", "average"),
                                           entry["name"],
                                           entry.get("colormap", "sequential"))
            signals.append(track)
        elif kind == "segmentation":
            track, sk = T.segmentation_from_bed(records, model, entry["name"])
            segmentations.append(track)
        else:
            ms, sk = T.markers_from_bed(records, model, entry["name"])
            markers.extend(ms)
        skipped += sk
    return signals, segmentations, markers, skipped
