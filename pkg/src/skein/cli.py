"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or input-parse error.
Every command is deterministic for identical inputs and seed; the
SKEIN_THREADS environment variable caps compiled-kernel workers.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, geometry, render, selections, session as sess, tracks
from .errors import ParseError, SessionError, SkeinError
from .model import (ChromatinModel, bin_to_genomic, genomic_to_bins,
                    inter_bin_spacings, normalize_model, parse_model)
from .model import GenomicInterval
from .raycast import Scene
from .render import Camera, fit_camera
from .tracks import serialize_bed, BedRecord

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(SkeinError):
    """Bad flag combination or malformed argument value."""


def _cap_threads():
    cap = os.environ.get("SKEIN_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        raise SkeinError(f"SKEIN_THREADS must be an integer, got {cap!r}") from None
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _load_model(args) -> ChromatinModel:
    if getattr(args, "model", None):
        if not args.resolution:
            raise UsageError("--resolution is required with --model")
        text = Path(args.model).read_text()
        model = parse_model(text, name=Path(args.model).stem,
                            resolution_bp=args.resolution)
        return normalize_model(model) if not getattr(args, "raw", False) else model
    if getattr(args, "session", None):
        doc = sess.load_session(args.session)
        return sess.model_from_session(doc, Path(args.session).parent)
    raise UsageError("provide --model with --resolution, or --session")


def _parse_region(model: ChromatinModel, region: str):
    """part:start-end (bp) -> inclusive bin range."""
    try:
        part, span = region.split(":", 1)
        start, end = span.replace(",", "").split("-", 1)
        interval = GenomicInterval(part, int(start), int(end))
    except (ValueError, TypeError):
        raise UsageError(f"bad region {region!r}, expected part:start-end") from None
    try:
        rng, _ = genomic_to_bins(model, interval)
    except KeyError as e:
        raise UsageError(e.args[0]) from None
    except SkeinError as e:
        raise UsageError(str(e)) from None
    return rng


def cmd_info(args) -> int:
    model = _load_model(args)
    spacings = inter_bin_spacings(model)
    bounds = geometry.estimate_tube_radius(spacings)
    s = np.sort(spacings)
    q1, q3 = geometry._tukey_hinges(s)
    out = sys.stdout
    print(f"model: {model.name}", file=out)
    print(f"bins: {model.bin_count}, parts: {len(model.parts)}", file=out)
    for part in model.parts:
        gi = bin_to_genomic(model, part.last)
        print(f"  {part.name}: bins {part.first}..{part.last} "
              f"({len(part)} bins, {gi.end_bp:,} bp)", file=out)
    print(f"resolution: {model.resolution_bp} bp/bin", file=out)
    print(f"spacing: Q1 {q1:.6g}, Q3 {q3:.6g}, IQR {q3 - q1:.6g}", file=out)
    print(f"radius bounds: lower {bounds.lower:.6g}, default {bounds.default:.6g}, "
          f"upper {bounds.upper:.6g}", file=out)
    return EXIT_OK


def _scene_for_session(doc: dict, model: ChromatinModel, args):
    rset = doc.get("render", {})
    representation = getattr(args, "representation", None) or rset.get(
        "representation", "straight_tube")
    radius = getattr(args, "radius", None) or rset.get("radius")
    if radius is None:
        radius = geometry.estimate_tube_radius(inter_bin_spacings(model)).default
    prims = geometry.representation_primitives(model, representation, radius)

    sset = sess.selection_set_from_session(doc, model.bin_count)
    markers = sess.markers_from_session(doc, model.bin_count)
    planes = sess.planes_from_session(doc)
    base_dir = Path(args.session).parent if getattr(args, "session", None) else None
    segmentations = []
    base_colors = None
    if doc.get("tracks"):
        signals, segmentations, file_markers, _ = sess.tracks_from_session(
            doc, model, base_dir)
        markers = markers + file_markers
        if signals:
            values = tracks.normalize_values(signals[0].values)
            base_colors = tracks.apply_colormap(values, signals[0].colormap_id)
        elif segmentations:
            base_colors = np.tile(np.array(tracks.GRAY, dtype=np.uint8),
                                  (model.bin_count, 1))
            for seg_track in segmentations:
                for seg in seg_track.segments:
                    base_colors[seg.bins.first:seg.bins.last + 1] = seg.color

    # markers ride along as enlarged spheres on top of the representation
    for m in markers:
        for b in range(m.locus.first, m.locus.last + 1):
            params = np.empty(4)
            params[:3] = model.bins[b]
            params[3] = radius * m.radius_scale
            prims.append(geometry.ScenePrimitive(geometry.KIND_SPHERE, params, b))

    colors, _scale = selections.bin_color_table(model.bin_count, sset, markers,
                                                base_colors)
    vis_mask = selections.visible_bins(sset, segmentations, model.bin_count)
    ex_mask = selections.exempt_bins(sset, planes, model.bin_count)
    visible, exempt = selections.primitive_masks([p.bin_id for p in prims],
                                                 vis_mask, ex_mask)
    scene = Scene(prims, planes, visible, exempt, cell_size=2.0 * radius)
    return scene, colors, radius, representation


def cmd_render(args) -> int:
    if args.session:
        doc = sess.load_session(args.session)
        model = sess.model_from_session(doc, Path(args.session).parent)
    else:
        model = _load_model(args)
        doc = sess.default_session(args.model or "", args.resolution or 1)
    scene, colors, radius, representation = _scene_for_session(doc, model, args)

    rset = doc.get("render", {})
    width = args.width or rset.get("width", 512)
    height = args.height or rset.get("height", 512)
    camera = sess.camera_from_session(doc)
    if camera is None or camera.viewport != (width, height):
        camera = fit_camera(model.bins, viewport=(width, height))

    sseed = args.seed
    if sseed is None:
        sseed = rset.get("ssao", {}).get("seed")
    if sseed is None:
        sseed = doc.get("seed", 0)
    ssao_doc = rset.get("ssao", {})
    ssao = None
    if ssao_doc.get("enabled", True):
        bounding = float(np.sqrt((model.bins ** 2).sum(axis=1)).max())
        defaults = render.ssao_defaults(radius, bounding)
        near = args.ssao_near or ssao_doc.get("radius_near") or defaults.radius_near
        far = args.ssao_far or ssao_doc.get("radius_far") or defaults.radius_far
        if far <= near:
            far = 2.0 * near
        ssao = render.SsaoSettings(near, far, ssao_doc.get("samples", 16),
                                   int(sseed), ssao_doc.get("strength", 1.0))
    background = tuple(rset.get("background", (1.0, 1.0, 1.0)))

    img, gbuf = render.render_frame(scene, camera, colors, ssao, background)
    fmt = args.format if args.format in ("ppm", "png") else None
    render.write_image(img, args.out, fmt)
    hit_px = int((~gbuf.miss).sum())
    print(f"wrote {args.out}: {width}x{height}, {representation}, "
          f"radius {radius:.6g}, {scene.count} primitives, {hit_px} hit pixels, "
          f"seed {sseed}", file=sys.stderr)
    if scene.stats.count:
        print(f"non-converged marches treated as misses: {scene.stats.count}",
              file=sys.stderr)
    return EXIT_OK


def cmd_distmap(args) -> int:
    model = _load_model(args)
    level = args.level or 0
    merged = analysis.merge_bins(model, level)
    if args.region:
        rng0 = _parse_region(model, args.region)
        g = 1 << level
        # bin range -> merged-index range at this level (same part)
        part = model.part_of_bin(rng0.first)
        sizes = analysis.merged_part_sizes(model, level)
        pi = model.parts.index(part)
        base = sum(sizes[:pi])
        first = base + (rng0.first - part.first) // g
        last = base + (rng0.last - part.first) // g
        from .model import BinRange

        rng = BinRange(first, last)
        tile = analysis.distance_tile(model, level, rng, rng, _merged=merged)
    else:
        tile = analysis.distance_tile(model, level, _merged=merged)

    fmt = args.format or ("tsv" if not str(args.out).endswith(".png") else "png")
    if fmt == "tsv":
        Path(args.out).write_text(analysis.tile_to_tsv(tile))
    elif fmt == "png":
        vmax = float(tile.values.max())
        norm = tile.values / vmax if vmax > 0 else tile.values
        rgb = tracks.apply_colormap(norm.ravel(), "sequential").reshape(
            tile.values.shape + (3,))
        render.write_image(rgb, args.out, "png")
    else:
        raise SkeinError(f"distmap cannot write format {fmt!r}")
    print(f"wrote {args.out}: level {level}, {tile.values.shape[0]}x"
          f"{tile.values.shape[1]} merged bins", file=sys.stderr)
    return EXIT_OK


def cmd_sasa(args) -> int:
    model = _load_model(args)
    radius = args.radius
    if radius is None:
        radius = geometry.estimate_tube_radius(inter_bin_spacings(model)).default
    params = analysis.SasaParams(radius, args.probe, args.samples or 92)
    subset = None
    if args.region:
        rng = _parse_region(model, args.region)
        subset = np.arange(rng.first, rng.last + 1)
    values = analysis.compute_sasa(model, params, subset)
    records = []
    for b in np.flatnonzero(~np.isnan(values)):
        gi = bin_to_genomic(model, int(b))
        records.append(BedRecord(gi.part, gi.start_bp, gi.end_bp,
                                 f"bin{int(b)}", float(values[b])))
    Path(args.out).write_text(serialize_bed(records))
    print(f"wrote {args.out}: {len(records)} bins, bin_radius {params.bin_radius:.6g}, "
          f"probe {params.probe_radius:.6g}, {params.sample_count} samples",
          file=sys.stderr)
    return EXIT_OK


def cmd_select(args) -> int:
    doc = sess.load_session(args.session)
    model = sess.model_from_session(doc, Path(args.session).parent)
    sset = sess.selection_set_from_session(doc, model.bin_count)
    name = args.name or f"{args.tool}-{len(doc.get('selections', [])) + 1}"
    if args.tool == "sequence":
        if args.bin is None or args.bin2 is None:
            raise UsageError("sequence tool needs --bin and --bin2")
        rng = selections.select_sequence(model, args.bin, args.bin2)
        mask = np.zeros(model.bin_count, dtype=bool)
        mask[rng.first:rng.last + 1] = True
    elif args.tool == "sphere":
        if args.radius is None:
            raise UsageError("sphere tool needs --radius")
        if args.bin is not None:
            center = args.bin
        elif args.point:
            center = np.array([float(x) for x in args.point.split(",")])
        else:
            raise UsageError("sphere tool needs --bin or --point x,y,z")
        mask = selections.select_sphere(model, center, args.radius)
    else:  # point
        if args.bin is None:
            raise UsageError("point tool needs --bin")
        mask = np.zeros(model.bin_count, dtype=bool)
        sel0 = selections.Selection(0, name, mask, (0, 0, 0))
        mask = selections.select_point(sel0, args.bin, remove=False).bins
    sel = sset.create(name, mask)
    doc["selections"] = sess.selections_to_session(sset)
    out = args.out or args.session
    sess.save_session(doc, out)
    print(f"selection {sel.id} ({name}): {int(mask.sum())} bins -> {out}",
          file=sys.stderr)
    return EXIT_OK


def cmd_pick(args) -> int:
    doc = sess.load_session(args.session)
    model = sess.model_from_session(doc, Path(args.session).parent)
    scene, _colors, _radius, _repr = _scene_for_session(doc, model, args)
    rset = doc.get("render", {})
    width = rset.get("width", 512)
    height = rset.get("height", 512)
    camera = sess.camera_from_session(doc)
    if camera is None or camera.viewport != (width, height):
        camera = fit_camera(model.bins, viewport=(width, height))
    bin_id = scene.pick(camera.ray(args.x, args.y))
    if bin_id is None:
        print(json.dumps({"bin": None}))
    else:
        gi = bin_to_genomic(model, bin_id)
        print(json.dumps({"bin": int(bin_id), "part": gi.part,
                          "start_bp": gi.start_bp, "end_bp": gi.end_bp,
                          "label": str(gi)}))
    return EXIT_OK


def cmd_tile(args) -> int:
    doc = sess.load_session(args.session)
    model = sess.model_from_session(doc, Path(args.session).parent)
    from .model import BinRange

    level = args.level or 0
    rows = [int(x) for x in args.rows.split(":")]
    cols = [int(x) for x in (args.cols or args.rows).split(":")]
    tile = analysis.distance_tile(model, level, BinRange(rows[0], rows[1]),
                                  BinRange(cols[0], cols[1]))
    print(json.dumps({"level": level,
                      "rows": rows, "cols": cols,
                      "values": [[float(v) for v in row] for row in tile.values]}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="skein",
        description="3D chromatin models: inspect, render, analyze, select.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", help="positions file (part x y z per line)")
            sp.add_argument("--resolution", type=int, help="base pairs per bin")
            sp.add_argument("--raw", action="store_true",
                            help="skip unit-sphere normalization")
        sp.add_argument("--session", help="session JSON file")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("info", help="report bins, parts, spacing and radius stats")
    common(sp)

    sp = sub.add_parser("render", help="render a deterministic snapshot")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--width", type=int)
    sp.add_argument("--height", type=int)
    sp.add_argument("--representation",
                    choices=("spheres", "straight_tube", "smooth_tube"))
    sp.add_argument("--radius", type=float)
    sp.add_argument("--ssao-near", dest="ssao_near", type=float)
    sp.add_argument("--ssao-far", dest="ssao_far", type=float)
    sp.add_argument("--format", choices=("ppm", "png"))

    sp = sub.add_parser("distmap", help="distance map as TSV or PNG")
    common(sp)
    sp.add_argument("--level", type=int, default=0)
    sp.add_argument("--region", help="part:start-end in bp")
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=("tsv", "png"))

    sp = sub.add_parser("sasa", help="per-bin accessible surface area as BED")
    common(sp)
    sp.add_argument("--radius", type=float, help="bin sphere radius")
    sp.add_argument("--probe", type=float, help="probe radius (default 0.4x bin)")
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--region", help="restrict to part:start-end")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("select", help="add a selection to a session")
    sp.add_argument("--session", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("tool", choices=("point", "sphere", "sequence"))
    sp.add_argument("--bin", type=int)
    sp.add_argument("--bin2", type=int)
    sp.add_argument("--radius", type=float)
    sp.add_argument("--point", help="x,y,z center for the sphere tool")
    sp.add_argument("--name")
    sp.add_argument("--out", help="write here instead of updating in place")

    sp = sub.add_parser("pick", help="bin under a viewport pixel, as JSON")
    sp.add_argument("--session", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--x", type=int, required=True)
    sp.add_argument("--y", type=int, required=True)

    sp = sub.add_parser("tile", help="distance-map tile as JSON")
    sp.add_argument("--session", required=True)
    sp.add_argument("--level", type=int, default=0)
    sp.add_argument("--rows", required=True, help="first:last merged-bin range")
    sp.add_argument("--cols", help="defaults to --rows")
    p.set_defaults(seed=None)
    return p


_COMMANDS = {
    "info": cmd_info,
    "render": cmd_render,
    "distmap": cmd_distmap,
    "sasa": cmd_sasa,
    "select": cmd_select,
    "pick": cmd_pick,
    "tile": cmd_tile,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _cap_threads()
        return _COMMANDS[args.command](args)
    except (ParseError, SessionError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SkeinError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
