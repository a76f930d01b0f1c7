"""Distance-map and surface-area tests. Merging and tiling are checked
for exact equality against plain-Python reimplementations; surface areas
are checked against closed forms."""

import math

import numpy as np
import pytest

from skein.analysis import (TILE_SIZE, DistanceTile, SasaParams, TileCache,
                            choose_level, compute_sasa, distance_map_for_selection,
                            distance_tile, merge_bins, merge_positions,
                            merged_part_sizes, sphere_points, tile_to_tsv)
from skein.errors import SkeinError
from skein.model import BinRange, ChromatinModel, Part

from conftest import make_model
from oracles import (merge_positions_python, pairwise_distances_python,
                     sasa_isolated, sasa_two_equal_spheres)


def part_ranges(model):
    return [(p.first, p.last) for p in model.parts]


# ---------------------------------------------------------------------------
# level-of-detail merging

def test_merge_hand_case():
    pos = np.array([[0.0, 0, 0], [1.0, 0, 0], [3.0, 0, 0]])
    out = merge_positions(pos, [3], level=1)
    # groups [0,1] and the short tail [2]
    assert np.array_equal(out, [[0.5, 0, 0], [3.0, 0, 0]])


def test_merge_level_zero_returns_copy():
    pos = np.arange(12, dtype=np.float64).reshape(4, 3)
    out = merge_positions(pos, [4], level=0)
    assert np.array_equal(out, pos)
    out[0, 0] = 99.0
    assert pos[0, 0] == 0.0


def test_merge_respects_part_boundaries():
    pos = np.arange(18, dtype=np.float64).reshape(6, 3)
    out = merge_positions(pos, [3, 3], level=1)
    # [0,1][2] then [3,4][5]: bin 2 and 3 never average together
    assert out.shape == (4, 3)
    assert np.array_equal(out[1], pos[2])
    assert np.array_equal(out[2], 0.5 * (pos[3] + pos[4]))


def test_merge_rejects_negative_level():
    with pytest.raises(SkeinError):
        merge_positions(np.zeros((2, 3)), [2], level=-1)


def test_merge_equals_python_oracle_bit_for_bit():
    """Levels 0..3 on a 1024-bin three-part model: the sequential
    accumulation order is pinned, so equality is exact, not approximate."""
    model = make_model(n=1024, parts=3, seed=13)
    for level in range(4):
        got = merge_bins(model, level)
        want = merge_positions_python(model.bins, part_ranges(model), level)
        assert np.array_equal(got, want)
        assert got.shape[0] == sum(merged_part_sizes(model, level))


def test_merged_part_sizes_ceil():
    model = make_model(n=10, parts=2, seed=0)  # parts of 5 and 5
    assert merged_part_sizes(model, 0) == [5, 5]
    assert merged_part_sizes(model, 1) == [3, 3]
    assert merged_part_sizes(model, 2) == [2, 2]
    assert merged_part_sizes(model, 3) == [1, 1]


def test_choose_level_fits_one_tile():
    assert choose_level(1) == 0
    assert choose_level(TILE_SIZE) == 0
    assert choose_level(TILE_SIZE + 1) == 1
    assert choose_level(4 * TILE_SIZE) == 2
    # the chosen level always compresses the span into <= TILE_SIZE rows
    for n in (1, 100, 257, 1000, 25_000, 207_000):
        level = choose_level(n)
        assert math.ceil(n / (1 << level)) <= TILE_SIZE
        if level > 0:  # and one level lower would not fit
            assert math.ceil(n / (1 << (level - 1))) > TILE_SIZE


# ---------------------------------------------------------------------------
# distance tiles

def test_distance_tile_equals_python_oracle():
    model = make_model(n=100, parts=2, seed=17)
    for level in range(3):
        merged = merge_positions_python(model.bins, part_ranges(model), level)
        full = distance_tile(model, level)
        assert np.array_equal(full.values,
                              pairwise_distances_python(merged, merged))
        m = merged.shape[0]
        sub = distance_tile(model, level, BinRange(1, m // 2), BinRange(0, 3))
        assert np.array_equal(
            sub.values,
            pairwise_distances_python(merged[1:m // 2 + 1], merged[0:4]))


def test_distance_metric_axioms():
    model = make_model(n=64, parts=1, seed=23)
    v = distance_tile(model, 0).values
    assert np.array_equal(np.diag(v), np.zeros(64))
    assert np.array_equal(v, v.T)  # antisymmetric differences square away
    assert (v[~np.eye(64, dtype=bool)] > 0).all()
    rng = np.random.default_rng(1)
    i, j, k = rng.integers(0, 64, (3, 500))
    assert (v[i, k] <= v[i, j] + v[j, k] + 1e-12).all()


def test_distance_tile_range_validation():
    model = make_model(n=20, parts=1, seed=3)
    with pytest.raises(SkeinError):
        distance_tile(model, 0, BinRange(0, 20))
    with pytest.raises(SkeinError):
        distance_tile(model, 2, BinRange(0, 5))  # only 5 merged bins
    with pytest.raises(SkeinError):
        DistanceTile(BinRange(0, 1), BinRange(0, 1), 0, np.zeros((3, 2)))
    with pytest.raises(SkeinError):
        DistanceTile(BinRange(0, 0), BinRange(0, 0), 0, np.array([[-1.0]]))


def test_tile_values_are_frozen():
    tile = distance_tile(make_model(n=8), 0)
    with pytest.raises(ValueError):
        tile.values[0, 0] = 5.0


def test_rigid_motion_leaves_distances_unchanged():
    model = make_model(n=120, parts=2, seed=29)
    rng = np.random.default_rng(4)
    rot, _ = np.linalg.qr(rng.normal(0, 1, (3, 3)))
    moved = ChromatinModel(name=model.name, bins=model.bins @ rot.T + [5.0, -3.0, 11.0],
                           parts=model.parts, resolution_bp=model.resolution_bp)
    for level in (0, 2):
        a = distance_tile(model, level).values
        b = distance_tile(moved, level).values
        assert np.allclose(a, b, atol=1e-9, rtol=0.0)


def test_merging_twice_approximates_one_big_merge():
    # power-of-two part: the groups line up, only the summation tree
    # differs, so values agree to rounding but not bit for bit
    model = make_model(n=256, parts=1, seed=31)
    once = merge_bins(model, 3)
    half = merge_positions(model.bins, [256], 1)
    twice = merge_positions(merge_positions(half, [128], 1), [64], 1)
    assert twice.shape == once.shape
    assert np.allclose(twice, once, atol=1e-12, rtol=0.0)


# ---------------------------------------------------------------------------
# selection-restricted maps

def test_selection_map_matches_masked_brute():
    model = make_model(n=60, parts=2, seed=37)
    rng = np.random.default_rng(2)
    mask = np.zeros(60, dtype=bool)
    mask[rng.choice(60, 25, replace=False)] = True
    tile, mapping = distance_map_for_selection(model, mask, level=0)
    idx = np.flatnonzero(mask)
    assert all(np.array_equal(m, [i]) for m, i in zip(mapping, idx))
    assert np.array_equal(tile.values,
                          pairwise_distances_python(model.bins[idx], model.bins[idx]))


def test_selection_map_merges_within_parts():
    model = make_model(n=12, parts=2, seed=5)  # parts 0..5 and 6..11
    picked = np.array([0, 1, 4, 5, 6, 9])
    tile, mapping = distance_map_for_selection(model, picked, level=1)
    assert [list(m) for m in mapping] == [[0, 1], [4, 5], [6, 9]]
    merged = np.stack([model.bins[m].mean(axis=0) for m in mapping])
    assert np.allclose(tile.values, pairwise_distances_python(merged, merged),
                       atol=1e-12, rtol=0.0)
    assert tile.level == 1


def test_selection_map_accepts_indices_or_mask():
    model = make_model(n=20, seed=7)
    by_idx, _ = distance_map_for_selection(model, np.array([3, 9, 15]))
    mask = np.zeros(20, dtype=bool)
    mask[[3, 9, 15]] = True
    by_mask, _ = distance_map_for_selection(model, mask)
    assert np.array_equal(by_idx.values, by_mask.values)


def test_selection_map_validation():
    model = make_model(n=10)
    with pytest.raises(SkeinError):
        distance_map_for_selection(model, np.zeros(10, dtype=bool))
    with pytest.raises(SkeinError):
        distance_map_for_selection(model, np.array([11]))


# ---------------------------------------------------------------------------
# serialization and caching

def test_tile_tsv_round_trips_exact_floats():
    model = make_model(n=5, seed=11)
    tile = distance_tile(model, 0)
    text = tile_to_tsv(tile)
    assert text.endswith("\n")
    lines = text.splitlines()
    assert len(lines) == 5
    parsed = np.array([[float(tok) for tok in line.split("\t")]
                       for line in lines])
    # repr round-trip: parsing gives back the identical doubles
    assert np.array_equal(parsed, tile.values)


def test_tile_cache_counts_and_evicts():
    model = make_model(n=30, seed=19)
    cache = TileCache(capacity=2)
    a1 = cache.tile(model, 0, BinRange(0, 4))
    assert (cache.hits, cache.misses) == (0, 1)
    a2 = cache.tile(model, 0, BinRange(0, 4))
    assert (cache.hits, cache.misses) == (1, 1)
    assert a2 is a1
    cache.tile(model, 0, BinRange(5, 9))
    cache.tile(model, 1)  # capacity exceeded: oldest entry drops
    assert (cache.hits, cache.misses) == (1, 3)
    cache.tile(model, 0, BinRange(0, 4))
    assert (cache.hits, cache.misses) == (1, 4)
    with pytest.raises(SkeinError):
        TileCache(0)


def test_tile_cache_keys_on_model_content():
    model = make_model(n=16, seed=2)
    shifted = ChromatinModel(name=model.name, bins=model.bins + 1.0,
                             parts=model.parts, resolution_bp=model.resolution_bp)
    cache = TileCache()
    a = cache.tile(model, 0)
    b = cache.tile(shifted, 0)
    assert cache.misses == 2  # same name, different geometry: no stale hit
    # the shift perturbs rounding, so invariance is approximate only
    assert np.allclose(a.values, b.values, atol=1e-12, rtol=0.0)


# ---------------------------------------------------------------------------
# solvent-accessible surface area

def two_bin_model(distance, radius=1.0):
    bins = np.array([[0.0, 0.0, 0.0], [distance, 0.0, 0.0]])
    return ChromatinModel(name="pair", bins=bins, parts=(Part("chrA", 0, 1),),
                          resolution_bp=1000), radius


def test_sasa_isolated_bins_get_full_sphere_area():
    rng = np.random.default_rng(41)
    bins = rng.normal(0, 1, (20, 3)) * 500.0  # spacing >> radius
    model = ChromatinModel(name="sparse", bins=bins,
                           parts=(Part("chrA", 0, 19),), resolution_bp=1000)
    params = SasaParams(bin_radius=1.0, probe_radius=0.5)
    areas = compute_sasa(model, params)
    expected = sasa_isolated(1.5)
    assert np.allclose(areas, expected, rtol=1e-12)
    assert abs(areas[0] - expected) / expected < 0.02  # stated tolerance


def test_sasa_two_spheres_matches_closed_form():
    model, r = two_bin_model(distance=1.2, radius=1.0)
    params = SasaParams(bin_radius=r, probe_radius=0.5, sample_count=960)
    areas = compute_sasa(model, params)
    expected = sasa_two_equal_spheres(1.5, 1.2)
    # the sample set is not mirror symmetric, so the two spheres count
    # slightly different accessible subsets; both sit inside tolerance
    assert abs(areas[0] - expected) / expected < 0.02
    assert abs(areas[1] - expected) / expected < 0.02


def test_sasa_error_shrinks_with_more_samples():
    model, r = two_bin_model(distance=1.2, radius=1.0)
    expected = sasa_two_equal_spheres(1.5, 1.2)
    errs = []
    for count in (92, 960):
        areas = compute_sasa(model, SasaParams(r, 0.5, sample_count=count))
        errs.append(abs(float(areas[0]) - expected))
    assert errs[1] < errs[0]


def test_sasa_matches_brute_occlusion_scan():
    """Random blob vs a direct all-pairs sample scan with the same
    strict-containment rule; must agree exactly."""
    model = make_model(n=50, parts=2, seed=43)
    params = SasaParams(bin_radius=0.6)
    areas = compute_sasa(model, params)
    R = params.bin_radius + params.probe_radius
    pts = sphere_points(params.sample_count)
    for i in range(model.bin_count):
        world = model.bins[i] + R * pts
        d2 = ((world[:, None, :] - model.bins[None, :, :]) ** 2).sum(axis=2)
        d2[:, i] = np.inf
        blocked = (d2 < R * R).any(axis=1)
        want = 4.0 * math.pi * R * R * ((~blocked).sum() / len(pts))
        assert areas[i] == want


def test_sasa_subset_scopes_both_output_and_occluders():
    model = make_model(n=8, parts=1, seed=47)
    params = SasaParams(bin_radius=0.5)
    full = compute_sasa(model, params)
    sub = compute_sasa(model, params, subset=[2, 3])
    assert np.isnan(sub[[0, 1, 4, 5, 6, 7]]).all()
    assert not np.isnan(sub[[2, 3]]).any()
    # bins outside the subset no longer occlude, so exposure cannot drop
    assert (sub[[2, 3]] >= full[[2, 3]] - 1e-12).all()
    lonely = compute_sasa(model, params, subset=[5])
    assert lonely[5] == pytest.approx(sasa_isolated(0.7), rel=1e-12)


def test_sasa_reversed_model_gives_reversed_values():
    model = make_model(n=40, parts=1, seed=53)
    rev = ChromatinModel(name="rev", bins=model.bins[::-1].copy(),
                         parts=model.parts, resolution_bp=model.resolution_bp)
    params = SasaParams(bin_radius=0.8)
    a = compute_sasa(model, params)
    b = compute_sasa(rev, params)
    assert np.array_equal(a, b[::-1])


def test_sasa_default_probe_is_forty_percent():
    assert SasaParams(2.0).probe_radius == pytest.approx(0.8)
    assert SasaParams(2.0, probe_radius=0.0).probe_radius == 0.0


def test_sasa_validation():
    model = make_model(n=4)
    with pytest.raises(SkeinError):
        SasaParams(0.0)
    with pytest.raises(SkeinError):
        SasaParams(1.0, probe_radius=-0.1)
    with pytest.raises(SkeinError):
        SasaParams(1.0, sample_count=91)
    with pytest.raises(SkeinError):
        compute_sasa(model, SasaParams(1.0), subset=np.array([], dtype=np.int64))
    with pytest.raises(SkeinError):
        compute_sasa(model, SasaParams(1.0), subset=[4])


def test_sphere_points_are_unit_and_deterministic():
    pts = sphere_points(92)
    assert pts.shape == (92, 3)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)
    assert np.array_equal(pts, sphere_points(92))
    # quasi-uniform: octant counts stay near 92/8
    octants = (pts > 0) @ np.array([1, 2, 4])
    counts = np.bincount(octants, minlength=8)
    assert counts.min() >= 6 and counts.max() <= 18
