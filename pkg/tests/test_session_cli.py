"""Session document and command-line tests: canonical serialization,
schema validation, document round trips, CLI exit codes, and output
determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from skein import analysis, cli
from skein.analysis import SasaParams, compute_sasa, distance_tile
from skein.errors import SessionError, SkeinError
from skein.geometry import estimate_tube_radius
from skein.model import (BinRange, inter_bin_spacings, normalize_model,
                         parse_model, serialize_model)
from skein.raycast import CuttingPlane
from skein.render import Camera
from skein.selections import SelectionSet
from skein.session import (SCHEMA_VERSION, camera_from_session,
                           camera_to_session, canonical_json, default_session,
                           load_session, markers_from_session, mask_from_runs,
                           model_from_session, planes_from_session,
                           planes_to_session, runs_from_mask, save_session,
                           selection_set_from_session, selections_to_session,
                           validate_session)
from skein.tracks import parse_bed

from conftest import make_model


@pytest.fixture
def model_file(tmp_path):
    model = make_model(n=24, parts=2, seed=3)
    path = tmp_path / "model.xyz"
    path.write_text(serialize_model(model))
    return path


def cli_model(model_file):
    """The model exactly as CLI commands see it (normalized)."""
    return normalize_model(parse_model(model_file.read_text(),
                                       name=model_file.stem, resolution_bp=5000))


# ---------------------------------------------------------------------------
# canonical serialization

def test_canonical_json_is_insertion_order_free():
    a = {"b": 1, "a": [1, 2], "c": {"y": 0, "x": 1}}
    b = {"c": {"x": 1, "y": 0}, "a": [1, 2], "b": 1}
    assert canonical_json(a) == canonical_json(b)
    assert canonical_json(a).endswith("\n")
    # write -> read -> write is byte-stable
    again = canonical_json(json.loads(canonical_json(a)))
    assert again == canonical_json(a)


def test_default_session_passes_schema():
    doc = default_session("m.xyz", 5000)
    validate_session(doc)  # must not raise
    assert doc["version"] == SCHEMA_VERSION


def test_schema_rejects_malformed_documents():
    doc = default_session("m.xyz", 5000)
    newer = dict(doc, version=SCHEMA_VERSION + 1)
    with pytest.raises(SessionError, match="newer than supported"):
        validate_session(newer)
    broken = dict(doc)
    del broken["models"]
    with pytest.raises(SessionError, match="invalid session"):
        validate_session(broken)
    with pytest.raises(SessionError):
        validate_session(dict(doc, selections={}))


def test_save_load_round_trip(tmp_path):
    doc = default_session("model.xyz", 5000, name="demo", seed=3)
    path = tmp_path / "s.json"
    save_session(doc, path)
    assert load_session(path) == doc
    first = path.read_bytes()
    save_session(load_session(path), path)
    assert path.read_bytes() == first


def test_load_session_error_paths(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{]")
    with pytest.raises(SessionError, match="not valid JSON"):
        load_session(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[]")
    with pytest.raises(SessionError, match="root must be an object"):
        load_session(arr)
    with pytest.raises(SessionError):
        load_session(tmp_path / "missing.json")


# ---------------------------------------------------------------------------
# mask <-> runs

def test_runs_round_trip_random_masks():
    rng = np.random.default_rng(6)
    for _ in range(50):
        n = int(rng.integers(1, 40))
        mask = rng.random(n) < 0.35
        runs = runs_from_mask(mask)
        assert np.array_equal(mask_from_runs(runs, n), mask)
        # runs are minimal: sorted, non-adjacent, non-overlapping
        for (a0, a1), (b0, b1) in zip(runs, runs[1:]):
            assert a0 <= a1 and b0 <= b1
            assert b0 > a1 + 1
    assert runs_from_mask(np.zeros(5, dtype=bool)) == []


def test_mask_from_runs_bounds():
    with pytest.raises(SessionError):
        mask_from_runs([[2, 5]], 5)
    with pytest.raises(SessionError):
        mask_from_runs([[-1, 2]], 5)


def test_selection_document_round_trip():
    sset = SelectionSet(20)
    sset.create("alpha", bins=[0, 1, 2, 9], color=(10, 20, 30))
    sset.create("beta", bins=[9, 15], color=(99, 0, 0), visible=False,
                clip_exempt=True)
    entries = selections_to_session(sset)
    # entries may arrive shuffled; order restores precedence
    restored = selection_set_from_session({"selections": entries[::-1]}, 20)
    assert len(restored) == 2
    for orig, back in zip(sset, restored):
        assert back.id == orig.id and back.name == orig.name
        assert np.array_equal(back.bins, orig.bins)
        assert back.color == orig.color
        assert back.visible == orig.visible
        assert back.clip_exempt == orig.clip_exempt
        assert back.order == orig.order
    assert [s.id for s in restored.by_precedence()] == [1, 0]


def test_marker_entries_validate_range():
    doc = {"markers": [{"first": 2, "last": 3, "color": [1, 2, 3],
                        "radius_scale": 2.5}]}
    (m,) = markers_from_session(doc, 10)
    assert (m.locus.first, m.locus.last) == (2, 3)
    assert m.color == (1, 2, 3) and m.radius_scale == 2.5
    with pytest.raises(SessionError):
        markers_from_session({"markers": [{"first": 5, "last": 10}]}, 10)


def test_plane_document_round_trip():
    plane = CuttingPlane((0.0, 0.0, 1.0), 0.25, "positive",
                         axis_aligned="z", exempt_selections=(3, 4))
    (back,) = planes_from_session({"planes": planes_to_session([plane])})
    assert np.allclose(back.normal, (0, 0, 1))
    # document normals need not be unit length; loading rescales the
    # offset too, so the stored half-space 2z <= 0.25 stays the same set
    (scaled,) = planes_from_session(
        {"planes": [{"normal": [0, 0, 2.0], "offset": 0.25}]})
    assert np.allclose(scaled.normal, (0, 0, 1))
    assert scaled.offset == pytest.approx(0.125)
    assert back.offset == 0.25
    assert back.keep_side == "positive"
    assert back.axis_aligned == "z"
    assert back.exempt_selections == (3, 4)
    with pytest.raises(SessionError):
        planes_from_session({"planes": [{"normal": [0, 0, 0], "offset": 0}]})


def test_camera_document_round_trip():
    cam = Camera((1.0, 2.0, 3.0), (0.0, 0.5, 0.0), (0.0, 1.0, 0.0),
                 50.0, (64, 48), near=0.01, far=100.0)
    doc = {"cameras": [camera_to_session(cam, sync_group=1)], "render": {}}
    back = camera_from_session(doc)
    assert np.array_equal(back.position, cam.position)
    assert np.array_equal(back.target, cam.target)
    assert back.vertical_fov == cam.vertical_fov
    assert back.viewport == cam.viewport
    assert (back.near, back.far) == (cam.near, cam.far)
    # no stored cameras: the caller's fallback comes back
    assert camera_from_session({"cameras": []}, fallback=cam) is cam
    assert camera_from_session({}) is None


def test_model_from_session_resolves_relative_paths(tmp_path, model_file):
    doc = default_session("model.xyz", 5000, name="rel")
    model = model_from_session(doc, base_dir=tmp_path)
    assert model.bin_count == 24
    assert np.sqrt((model.bins ** 2).sum(axis=1)).max() == pytest.approx(1.0)
    raw_doc = default_session("model.xyz", 5000)
    raw_doc["models"][0]["normalize"] = False
    raw = model_from_session(raw_doc, base_dir=tmp_path)
    assert np.sqrt((raw.bins ** 2).sum(axis=1)).max() > 1.0
    with pytest.raises(SessionError, match="cannot read model"):
        model_from_session(default_session("nope.xyz", 5000), base_dir=tmp_path)
    with pytest.raises(SessionError, match="no model"):
        model_from_session({"models": []})


# ---------------------------------------------------------------------------
# CLI: info and exit codes

def test_cli_info_reports_layout(model_file, capsys):
    assert cli.main(["info", "--model", str(model_file),
                     "--resolution", "5000"]) == 0
    out = capsys.readouterr().out
    assert "bins: 24, parts: 2" in out
    assert "resolution: 5000 bp/bin" in out
    assert "radius bounds:" in out
    assert "chr1: bins 0..11" in out


def test_cli_usage_errors_exit_two(model_file, capsys):
    assert cli.main(["info", "--model", str(model_file)]) == 2  # no --resolution
    assert "error:" in capsys.readouterr().err
    assert cli.main(["info"]) == 2  # neither model nor session
    with pytest.raises(SystemExit) as e:
        cli.main(["info", "--bogus-flag"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main([])
    assert e.value.code == 2


def test_cli_runtime_errors_exit_one(tmp_path, capsys):
    missing = tmp_path / "none.xyz"
    assert cli.main(["info", "--model", str(missing),
                     "--resolution", "5000"]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_bad_model_text_exits_two(tmp_path, capsys):
    garbled = tmp_path / "bad.xyz"
    garbled.write_text("chr1 1 2 3\nchr1 oops 5\n")
    assert cli.main(["info", "--model", str(garbled),
                     "--resolution", "5000"]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_bad_session_exits_two(tmp_path, capsys):
    bad = tmp_path / "s.json"
    bad.write_text("{]")
    assert cli.main(["render", "--session", str(bad),
                     "--out", str(tmp_path / "x.ppm")]) == 2
    capsys.readouterr()


def test_console_entry_point_runs(model_file):
    proc = subprocess.run(
        [sys.executable, "-m", "skein.cli", "info", "--model",
         str(model_file), "--resolution", "5000"],
        capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0
    assert "bins: 24" in proc.stdout


def test_skein_threads_env(model_file, monkeypatch, capsys):
    monkeypatch.setenv("SKEIN_THREADS", "1")
    assert cli.main(["info", "--model", str(model_file),
                     "--resolution", "5000"]) == 0
    monkeypatch.setenv("SKEIN_THREADS", "lots")
    assert cli.main(["info", "--model", str(model_file),
                     "--resolution", "5000"]) == 1
    capsys.readouterr()


# ---------------------------------------------------------------------------
# CLI: render

def test_cli_render_is_deterministic(model_file, tmp_path, capsys):
    out1, out2, out3 = (tmp_path / n for n in ("a.ppm", "b.ppm", "c.ppm"))
    base = ["render", "--model", str(model_file), "--resolution", "5000",
            "--width", "64", "--height", "64"]
    assert cli.main(base + ["--out", str(out1), "--seed", "9"]) == 0
    assert cli.main(base + ["--out", str(out2), "--seed", "9"]) == 0
    assert cli.main(base + ["--out", str(out3), "--seed", "10"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_bytes() != out3.read_bytes()  # seed reaches the occlusion
    err = capsys.readouterr().err
    assert "wrote" in err and "64x64" in err


def test_cli_render_png_and_session(model_file, tmp_path, capsys):
    from PIL import Image

    sfile = tmp_path / "session.json"
    save_session(default_session("model.xyz", 5000), sfile)
    out = tmp_path / "frame.png"
    assert cli.main(["render", "--session", str(sfile),
                     "--width", "48", "--height", "48",
                     "--out", str(out)]) == 0
    img = np.asarray(Image.open(out))
    assert img.shape == (48, 48, 3)
    assert (img != 255).any()  # something was drawn
    capsys.readouterr()


# ---------------------------------------------------------------------------
# CLI: analysis commands

def test_cli_distmap_tsv_matches_library(model_file, tmp_path, capsys):
    out = tmp_path / "map.tsv"
    assert cli.main(["distmap", "--model", str(model_file),
                     "--resolution", "5000", "--level", "1",
                     "--out", str(out)]) == 0
    parsed = np.array([[float(tok) for tok in line.split("\t")]
                       for line in out.read_text().splitlines()])
    want = distance_tile(cli_model(model_file), 1).values
    assert np.array_equal(parsed, want)  # repr serialization is lossless
    capsys.readouterr()


def test_cli_distmap_region_and_png(model_file, tmp_path, capsys):
    out = tmp_path / "sub.tsv"
    assert cli.main(["distmap", "--model", str(model_file),
                     "--resolution", "5000", "--region", "chr1:0-25000",
                     "--out", str(out)]) == 0
    got = np.array([[float(tok) for tok in line.split("\t")]
                    for line in out.read_text().splitlines()])
    model = cli_model(model_file)
    want = distance_tile(model, 0, BinRange(0, 4), BinRange(0, 4)).values
    assert np.array_equal(got, want)
    png = tmp_path / "map.png"
    assert cli.main(["distmap", "--model", str(model_file),
                     "--resolution", "5000", "--out", str(png)]) == 0
    from PIL import Image

    assert np.asarray(Image.open(png)).shape == (24, 24, 3)
    capsys.readouterr()


def test_cli_distmap_bad_region_exits_two(model_file, tmp_path, capsys):
    args = ["distmap", "--model", str(model_file), "--resolution", "5000",
            "--out", str(tmp_path / "x.tsv")]
    assert cli.main(args + ["--region", "nonsense"]) == 2
    assert cli.main(args + ["--region", "chrMT:0-5000"]) == 2
    assert cli.main(args + ["--region", "chr1:900000-990000"]) == 2
    capsys.readouterr()


def test_cli_sasa_scores_match_library(model_file, tmp_path, capsys):
    out = tmp_path / "sasa.bed"
    assert cli.main(["sasa", "--model", str(model_file),
                     "--resolution", "5000", "--out", str(out)]) == 0
    records = parse_bed(out.read_text())
    model = cli_model(model_file)
    radius = estimate_tube_radius(inter_bin_spacings(model)).default
    want = compute_sasa(model, SasaParams(radius))
    assert len(records) == 24
    for b, rec in enumerate(records):
        assert rec.name == f"bin{b}"
        assert rec.score == want[b]  # repr round trip, no rounding
    capsys.readouterr()


def test_cli_sasa_region_subset(model_file, tmp_path, capsys):
    out = tmp_path / "part.bed"
    assert cli.main(["sasa", "--model", str(model_file),
                     "--resolution", "5000", "--region", "chr2:0-15000",
                     "--out", str(out)]) == 0
    records = parse_bed(out.read_text())
    assert [r.name for r in records] == ["bin12", "bin13", "bin14"]
    assert all(r.chrom == "chr2" for r in records)
    capsys.readouterr()


# ---------------------------------------------------------------------------
# CLI: session mutation and queries

def session_with_model(tmp_path, model_file):
    sfile = tmp_path / "session.json"
    save_session(default_session(model_file.name, 5000), sfile)
    return sfile


def test_cli_select_appends_to_session(model_file, tmp_path, capsys):
    sfile = session_with_model(tmp_path, model_file)
    assert cli.main(["select", "--session", str(sfile), "sequence",
                     "--bin", "5", "--bin2", "2"]) == 0
    doc = load_session(sfile)
    assert doc["selections"][0]["runs"] == [[2, 5]]
    assert cli.main(["select", "--session", str(sfile), "point",
                     "--bin", "7", "--name", "poi"]) == 0
    doc = load_session(sfile)
    assert [s["id"] for s in doc["selections"]] == [0, 1]
    assert doc["selections"][1] == {
        "id": 1, "name": "poi", "runs": [[7, 7]],
        "color": doc["selections"][1]["color"],
        "visible": True, "clip_exempt": False, "order": 1,
    }
    # sphere tool, output to a new file leaves the original untouched
    before = sfile.read_bytes()
    out2 = tmp_path / "next.json"
    assert cli.main(["select", "--session", str(sfile), "sphere",
                     "--bin", "0", "--radius", "0.4",
                     "--out", str(out2)]) == 0
    assert sfile.read_bytes() == before
    assert len(load_session(out2)["selections"]) == 3
    capsys.readouterr()


def test_cli_select_usage_errors(model_file, tmp_path, capsys):
    sfile = session_with_model(tmp_path, model_file)
    assert cli.main(["select", "--session", str(sfile), "sequence",
                     "--bin", "1"]) == 2
    assert cli.main(["select", "--session", str(sfile), "sphere",
                     "--bin", "1"]) == 2
    assert cli.main(["select", "--session", str(sfile), "point"]) == 2
    capsys.readouterr()


def test_cli_pick_returns_stable_json(tmp_path, capsys):
    # three collinear bins: the fit camera looks at the tube's middle,
    # so the center pixel is a guaranteed hit
    line = tmp_path / "line.xyz"
    line.write_text("chrA 0 0 0\nchrA 1 0 0\nchrA 2 0 0\n")
    sfile = tmp_path / "s.json"
    save_session(default_session("line.xyz", 5000), sfile)
    assert cli.main(["pick", "--session", str(sfile),
                     "--x", "256", "--y", "256"]) == 0
    first = capsys.readouterr().out
    info = json.loads(first)
    assert info["bin"] in (0, 1)
    assert info["part"] == "chrA"
    assert "label" in info and "start_bp" in info
    assert cli.main(["pick", "--session", str(sfile),
                     "--x", "256", "--y", "256"]) == 0
    assert capsys.readouterr().out == first
    # a corner pixel looks past the model
    assert cli.main(["pick", "--session", str(sfile), "--x", "0", "--y", "0"]) == 0
    assert json.loads(capsys.readouterr().out) == {"bin": None}


def test_cli_tile_matches_library(model_file, tmp_path, capsys):
    sfile = session_with_model(tmp_path, model_file)
    assert cli.main(["tile", "--session", str(sfile), "--level", "1",
                     "--rows", "0:3"]) == 0
    payload = json.loads(capsys.readouterr().out)
    model = cli_model(model_file)
    want = distance_tile(model, 1, BinRange(0, 3), BinRange(0, 3)).values
    assert payload["level"] == 1
    assert payload["rows"] == [0, 3] and payload["cols"] == [0, 3]
    assert np.array_equal(np.array(payload["values"]), want)
