"""skein: deterministic 3D chromatin model rendering and analysis.

Parses bin-position models, builds sphere/tube representations with
analytic ray intersection, renders deterministic shaded snapshots with
ambient occlusion, and computes distance maps and accessible surface
area. All entry points are reproducible for a fixed seed.
"""

from .analysis import (SasaParams, TileCache, choose_level, compute_sasa,
                       distance_map_for_selection, distance_tile, merge_bins,
                       tile_to_tsv)
from .errors import ParseError, SessionError, SkeinError
from .geometry import (RadiusBounds, ScenePrimitive, approximate_spline,
                       build_smooth_tube, build_spheres, build_straight_tube,
                       estimate_tube_radius, representation_primitives)
from .model import (BinRange, ChromatinModel, GenomicInterval, Part,
                    bin_to_genomic, genomic_to_bins, inter_bin_spacings,
                    normalize_model, parse_model, serialize_model)
from .raycast import CuttingPlane, Hit, Ray, Scene, clip_hit, intersect
from .render import (Camera, GBuffer, SsaoSettings, composite, fit_camera,
                     read_ppm, render_frame, render_gbuffer, shade_phong,
                     ssao_defaults, ssao_pass, write_image, write_ppm_bytes)
from .selections import (Selection, SelectionSet, bin_color_table,
                         resolve_bin_color, select_point, select_sequence,
                         select_sphere, selection_from_bed, selection_to_bed,
                         visible_bins)
from .session import (canonical_json, default_session, load_session,
                      save_session, validate_session)
from .tracks import (BedRecord, Colormap, Marker, SegmentationTrack,
                     SignalTrack, aggregate_signal, apply_colormap,
                     get_colormap, normalize_values, parse_bed, serialize_bed,
                     track_colors)

__version__ = "0.1.0"

__all__ = [
    "BedRecord", "BinRange", "Camera", "ChromatinModel", "Colormap",
    "CuttingPlane", "GBuffer", "GenomicInterval", "Hit", "Marker",
    "ParseError", "Part", "RadiusBounds", "Ray", "SasaParams", "Scene",
    "ScenePrimitive", "SegmentationTrack", "Selection", "SelectionSet",
    "SessionError", "SignalTrack", "SkeinError", "SsaoSettings", "TileCache",
    "aggregate_signal", "apply_colormap", "approximate_spline",
    "bin_color_table", "bin_to_genomic", "build_smooth_tube", "build_spheres",
    "build_straight_tube", "canonical_json", "choose_level", "clip_hit",
    "composite", "compute_sasa", "default_session",
    "distance_map_for_selection", "distance_tile", "estimate_tube_radius",
    "fit_camera", "genomic_to_bins", "get_colormap", "inter_bin_spacings",
    "intersect", "load_session", "merge_bins", "normalize_model",
    "normalize_values", "parse_bed", "parse_model", "read_ppm",
    "render_frame", "render_gbuffer", "representation_primitives",
    "resolve_bin_color", "save_session", "select_point", "select_sequence",
    "select_sphere", "selection_from_bed", "selection_to_bed",
    "serialize_bed", "serialize_model", "shade_phong", "ssao_defaults",
    "ssao_pass", "tile_to_tsv", "track_colors", "validate_session",
    "visible_bins", "write_image", "write_ppm_bytes",
]
