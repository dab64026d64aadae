#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""Tests of the tensor and parameter codecs, the JSON documents and the image helpers."""

import json
from pathlib import Path

import numpy as np
import pytest

from cvshl import (
    LATITUDE_TIERS,
    LONGITUDE_TIERS,
    GlimpseFeatures,
    GroundTruth,
    Highlight,
    HighlightMark,
    ManifestError,
    SegmentEntry,
    SphereScoreMap,
    TensorFormatError,
    Trajectory,
    TrajectoryEntry,
    VideoManifest,
    Viewpoint,
    WindowCandidate,
    init_params,
    load_ground_truth,
    load_manifest,
    load_plan,
    load_sphere_map,
    load_sphere_maps,
    load_triplets,
    read_params,
    read_pnm,
    read_tensor,
    save_manifest,
    save_sphere_maps,
    save_triplets,
    synth_triplets,
    write_params,
    write_pnm,
    write_tensor,
)
from cvshl._io import (
    PLAN_SCHEMA,
    encode_tensor,
    ground_truth_document,
    history_csv,
    plan_document,
    read_json,
    validate_json_schema,
    write_bytes_atomically,
    write_json,
)
from cvshl._ranking import EpochRecord


def test_tensor_file_layout(tmp_path: Path):
    tensor = np.arange(6, dtype=np.float32).reshape(2, 3)
    path = tmp_path / "t.cvst"
    assert write_tensor(tensor, path)
    raw = path.read_bytes()
    assert raw[:4] == b"CVST"
    assert raw[4:6] == b"\x01\x00" and raw[6] == 1 and raw[7] == 2
    assert raw[8:16] == b"\x02\x00\x00\x00\x03\x00\x00\x00"
    assert len(raw) == 16 + 6 * 4
    loaded = read_tensor(path)
    assert loaded.dtype == np.float32
    np.testing.assert_array_equal(loaded, tensor)
    assert not write_tensor(tensor, path)


def test_tensor_errors(tmp_path: Path):
    image = encode_tensor(np.zeros((2, 3), dtype=np.float64))
    path = tmp_path / "bad.cvst"

    path.write_bytes(image[:-1])
    with pytest.raises(TensorFormatError) as truncated:
        read_tensor(path)
    assert truncated.value.path == path and truncated.value.offset == len(image) - 1

    path.write_bytes(b"XXXX" + image[4:])
    with pytest.raises(TensorFormatError) as magic:
        read_tensor(path)
    assert magic.value.offset == 0

    path.write_bytes(image + b"\x00")
    with pytest.raises(TensorFormatError):
        read_tensor(path)

    path.write_bytes(image)
    with pytest.raises(TensorFormatError):
        read_tensor(path, dtype=np.float32)
    with pytest.raises(TensorFormatError):
        read_tensor(tmp_path / "missing.cvst")
    with pytest.raises(TensorFormatError):
        write_tensor(np.zeros(3, dtype=np.int32), path)


def test_params_container(tmp_path: Path):
    params = init_params(4, (3, 3, 4, 4, 4), 2, batch_norm=True)
    path = tmp_path / "params.cvsp"
    write_params(params, path)
    assert path.read_bytes()[:4] == b"CVSP"
    loaded = read_params(path)
    assert loaded.batch_norm and loaded.widths == params.widths
    for name, array in params.named_arrays().items():
        np.testing.assert_array_equal(loaded.named_arrays()[name], array)

    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(TensorFormatError):
        read_params(path)


def _features(directory: Path, segment: int, theta: float, phi: float) -> GlimpseFeatures:
    path = directory / "features" / f"{segment}_{theta:+.1f}_{phi:.0f}.cvst"
    write_tensor(np.zeros((2, 2, 1)), path)
    return GlimpseFeatures(Viewpoint(theta, phi), path)


def _grid_manifest(directory: Path, segments: int) -> VideoManifest:
    entries = []
    for segment in range(segments):
        glimpses = [_features(directory, segment, t, p) for t in LATITUDE_TIERS for p in LONGITUDE_TIERS]
        entries.append(SegmentEntry(25 * segment, 25 * (segment + 1), glimpses))
    return VideoManifest("clip", entries)


def test_manifest_round_trip(tmp_path: Path):
    manifest = _grid_manifest(tmp_path, 2)
    save_manifest(manifest, tmp_path / "manifest.json")
    document = json.loads((tmp_path / "manifest.json").read_text())
    assert document["segments"][0]["glimpses"][0]["features"].startswith("features/")
    loaded = load_manifest(tmp_path / "manifest.json")
    assert loaded.video_id == "clip" and len(loaded) == 2 and loaded.frames_per_segment == 25
    assert loaded.segments[1].feature_path(0.0, 180.0) == manifest.segments[1].feature_path(0.0, 180.0)


@pytest.mark.parametrize(
    "frames,message",
    [
        ([(0, 25), (30, 55)], "Gap"),
        ([(0, 25), (20, 45)], "overlaps"),
        ([(0, 25), (25, 40)], "expected 25"),
    ],
)
def test_manifest_contiguity(tmp_path: Path, frames: list[tuple[int, int]], message: str):
    segments = [SegmentEntry(start, end, [_features(tmp_path, 0, 0.0, 0.0)]) for start, end in frames]
    save_manifest(VideoManifest("clip", segments), tmp_path / "manifest.json")
    with pytest.raises(ManifestError, match=message):
        load_manifest(tmp_path / "manifest.json", require_grid=False)


def test_manifest_missing_data(tmp_path: Path):
    manifest = _grid_manifest(tmp_path, 1)
    manifest.segments[0].glimpses.pop()
    save_manifest(manifest, tmp_path / "manifest.json")
    with pytest.raises(ManifestError, match="missing the feature file"):
        load_manifest(tmp_path / "manifest.json")
    load_manifest(tmp_path / "manifest.json", require_grid=False)

    manifest.segments[0].glimpses[0].path.unlink()
    with pytest.raises(ManifestError, match="missing feature file"):
        load_manifest(tmp_path / "manifest.json", require_grid=False)


def test_json_errors(tmp_path: Path):
    path = tmp_path / "broken.json"
    path.write_text('{"version": 1,,}')
    with pytest.raises(ManifestError) as syntax:
        read_json(path)
    assert syntax.value.offset is not None and "@ byte" in str(syntax.value)

    path.write_text(json.dumps({"version": 2, "video_id": "x", "segments": []}))
    with pytest.raises(ManifestError, match="version"):
        load_manifest(path)
    path.write_text("[]")
    with pytest.raises(ManifestError):
        load_manifest(path)
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / "nothing.json")


def test_schema_validation():
    pytest.importorskip("jsonschema")
    assert validate_json_schema(PLAN_SCHEMA, {"version": 1, "video_id": "v", "trajectory": [], "highlights": []})
    assert not validate_json_schema(PLAN_SCHEMA, {"version": 1, "video_id": "v", "trajectory": [{}], "highlights": []})


def test_triplets_round_trip(tmp_path: Path):
    triplets = synth_triplets(0, 3, (5, 5, 2))
    save_triplets(triplets, tmp_path / "triplets.json")
    loaded = load_triplets(tmp_path / "triplets.json")
    assert len(loaded) == 3
    for before, after in zip(triplets, loaded):
        for a, b in zip(before.members(), after.members()):
            np.testing.assert_array_equal(a, b)
        assert before.quality == after.quality

    (tmp_path / "triplets" / "00001_casual.cvst").unlink()
    with pytest.raises(ManifestError, match="Triplet 1"):
        load_triplets(tmp_path / "triplets.json")
    write_json(tmp_path / "empty.json", {"version": 1, "triplets": []})
    with pytest.raises(ManifestError, match="empty"):
        load_triplets(tmp_path / "empty.json")


def test_plan_document(tmp_path: Path):
    windows = [WindowCandidate(Viewpoint(0.0, 10.0 * t), 90.0, float(s)) for t, s in enumerate([1.0, 3.0, 2.0])]
    trajectory = Trajectory([TrajectoryEntry(t, w) for t, w in enumerate(windows)])
    highlights = Highlight([trajectory.entries[1], trajectory.entries[2]])
    document = plan_document("clip", trajectory, highlights, 30.0)
    assert document["total_score"] == 6.0 and document["motion_limit"] == 30.0
    write_json(tmp_path / "plan.json", document)
    plan = load_plan(tmp_path / "plan.json")
    assert plan.video_id == "clip"
    assert plan.trajectory == [w.center for w in windows]
    assert [mark.segment for mark in plan.highlights] == [1, 2]


def test_ground_truth_round_trip(tmp_path: Path):
    gt = GroundTruth(
        [[Viewpoint(0.0, 0.0), Viewpoint(10.0, 350.0)], [Viewpoint(-5.0, 90.0), Viewpoint(0.0, 100.0)]],
        [[HighlightMark(1, Viewpoint(10.0, 350.0))], [HighlightMark(0, Viewpoint(-5.0, 90.0))]],
    )
    write_json(tmp_path / "gt.json", ground_truth_document(gt))
    assert load_ground_truth(tmp_path / "gt.json") == gt

    write_json(tmp_path / "gt.json", {"version": 1, "annotators": [{"trajectory": [{"theta": 0.0}]}]})
    with pytest.raises(ManifestError):
        load_ground_truth(tmp_path / "gt.json", no_schema_validation=True)


def test_ground_truth_keeps_annotators_without_highlights(tmp_path: Path):
    marks = [{"segment": 1, "theta": 0.0, "phi": 10.0}]
    document = {
        "version": 1,
        "annotators": [
            {"trajectory": [{"theta": 0.0, "phi": 0.0}, {"theta": 0.0, "phi": 10.0}]},
            {"trajectory": [{"theta": 5.0, "phi": 0.0}, {"theta": 5.0, "phi": 10.0}], "highlights": marks},
            {"trajectory": [{"theta": 9.0, "phi": 0.0}, {"theta": 9.0, "phi": 10.0}], "highlights": []},
        ],
    }
    write_json(tmp_path / "gt.json", document)
    gt = load_ground_truth(tmp_path / "gt.json")
    assert gt.highlights == [[], [HighlightMark(1, Viewpoint(0.0, 10.0))], []]
    write_json(tmp_path / "again.json", ground_truth_document(gt))
    assert load_ground_truth(tmp_path / "again.json") == gt

    for annotator in document["annotators"]:
        annotator.pop("highlights", None)
    write_json(tmp_path / "gt.json", document)
    assert load_ground_truth(tmp_path / "gt.json").highlights == []


def test_sphere_map_index(tmp_path: Path):
    rng = np.random.default_rng(0)
    maps = [SphereScoreMap(rng.standard_normal((3, 4, 1))) for _ in range(3)]
    index = save_sphere_maps("clip", maps, tmp_path / "maps")
    assert index == tmp_path / "maps" / "index.json"
    video_id, loaded = load_sphere_maps(tmp_path / "maps")
    assert video_id == "clip" and len(loaded) == 3
    for before, after in zip(maps, loaded):
        np.testing.assert_array_equal(before.cells, after.cells)
    assert len(load_sphere_maps(index)[1]) == 3

    document = json.loads(index.read_text())
    document["maps"][1]["segment"] = 5
    write_json(index, document)
    with pytest.raises(ManifestError, match="not contiguous"):
        load_sphere_maps(index)

    document["maps"][1]["segment"] = 1
    write_json(index, document)
    (tmp_path / "maps" / "segment_00002.cvst").unlink()
    with pytest.raises(ManifestError, match="missing map"):
        load_sphere_maps(index)
    with pytest.raises(ManifestError):
        save_sphere_maps("clip", [], tmp_path / "none")


def test_single_sphere_map_keeps_its_window_geometry(tmp_path: Path):
    rng = np.random.default_rng(1)
    maps = [SphereScoreMap(rng.standard_normal((6, 8, 4)), hfov=72.0, aspect=1.5) for _ in range(2)]
    save_sphere_maps("clip", maps, tmp_path / "maps")
    loaded = load_sphere_map(tmp_path / "maps" / "segment_00001.cvst")
    assert loaded.hfov == 72.0 and loaded.aspect == 1.5
    np.testing.assert_array_equal(loaded.cells, maps[1].cells)

    write_tensor(maps[0].cells, tmp_path / "maps" / "stray.cvst")
    with pytest.raises(ManifestError, match="does not list"):
        load_sphere_map(tmp_path / "maps" / "stray.cvst")
    write_tensor(maps[0].cells, tmp_path / "alone.cvst")
    with pytest.raises(ManifestError):
        load_sphere_map(tmp_path / "alone.cvst")


def test_history_csv():
    text = history_csv([EpochRecord(1, 0.5, 1e-3), EpochRecord(2, 0.25, 1e-3)])
    assert text.splitlines() == ["epoch,mean_loss,lr", "1,0.5,0.001", "2,0.25,0.001"]


@pytest.mark.parametrize("shape,name", [((6, 8), "gray.pgm"), ((6, 8, 3), "color.ppm")])
def test_pnm_round_trip(tmp_path: Path, shape: tuple[int, ...], name: str):
    image = np.random.default_rng(1).integers(0, 256, size=shape, dtype=np.uint8)
    write_pnm(image, tmp_path / name)
    np.testing.assert_array_equal(read_pnm(tmp_path / name), image)


def test_pnm_errors(tmp_path: Path):
    (tmp_path / "noise.pgm").write_bytes(b"not an image")
    with pytest.raises(ManifestError):
        read_pnm(tmp_path / "noise.pgm")
    with pytest.raises(ManifestError):
        read_pnm(tmp_path / "missing.pgm")


def test_atomic_writes_leave_no_temporary(tmp_path: Path):
    target = tmp_path / "out" / "data.bin"
    assert write_bytes_atomically(target, b"abc")
    assert not write_bytes_atomically(target, b"abc")
    assert write_bytes_atomically(target, b"abcd")
    assert target.read_bytes() == b"abcd"
    assert sorted(p.name for p in target.parent.iterdir()) == ["data.bin"]
