#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""Tests of the CLI entry point."""

import json
from pathlib import Path

import numpy as np
import pytest
from pytest_mock import MockerFixture

import cvshl.cli
from cvshl import (
    InfeasibleTrajectoryError,
    SphereScoreMap,
    cli_main,
    feature_size,
    load_manifest,
    read_pnm,
    read_tensor,
    save_sphere_maps,
    write_pnm,
)

SMALL = ["--k", "2", "--in-channels", "4"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """
    A workspace holding a small synthetic video, a decoder trained for two epochs and the video's sphere maps.
    """
    root = tmp_path_factory.mktemp("workspace")
    ws = ["--workspace", root.as_posix()]
    assert cli_main(ws + ["synth", *SMALL, "--segments", "4", "--triplet-count", "24", "-n", "2"]) == 0
    assert cli_main(ws + ["train", *SMALL, "--epochs", "2", "--batch-size", "8"]) == 0
    assert cli_main(ws + ["score", *SMALL]) == 0
    return root


def test_hello():
    """ """
    with pytest.raises(SystemExit) as wrapped_exception:
        cli_main(["--help"])
    assert wrapped_exception.type == SystemExit
    assert wrapped_exception.value.code == 0


def test_version():
    with pytest.raises(SystemExit) as wrapped_exception:
        cli_main(["--version"])
    assert wrapped_exception.value.code == 0


def test_pipeline_outputs(workspace: Path):
    assert (workspace / "video" / "manifest.json").is_file()
    assert (workspace / "triplets" / "manifest.json").is_file()
    assert (workspace / "ground_truth.json").is_file()
    assert (workspace / "decoder.cvsp").is_file()
    assert (workspace / "history.csv").read_text().splitlines()[0] == "epoch,mean_loss,lr"
    index = json.loads((workspace / "maps" / "index.json").read_text())
    assert [entry["segment"] for entry in index["maps"]] == [0, 1, 2, 3]


def test_plan_and_eval(workspace: Path, capsys: pytest.CaptureFixture):
    ws = ["--workspace", workspace.as_posix()]
    assert cli_main(ws + ["plan", "-n", "2"]) == 0
    plan = json.loads((workspace / "plan.json").read_text())
    assert len(plan["trajectory"]) == 4 and plan["motion_limit"] == 30.0
    assert [entry["rank"] for entry in plan["highlights"]] == [1, 2]
    for a, b in zip(plan["trajectory"], plan["trajectory"][1:]):
        assert abs(a["theta"] - b["theta"]) <= 30.0 + 1e-9
        assert min(abs(a["phi"] - b["phi"]), 360.0 - abs(a["phi"] - b["phi"])) <= 30.0 + 1e-9
    capsys.readouterr()

    assert cli_main(ws + ["eval"]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["segments"] == 4 and metrics["annotators"] == 3
    assert -1.0 <= metrics["frame_cosine"] <= metrics["trajectory_cosine"] <= 1.0
    assert 0.0 <= metrics["mean_average_precision"] <= 1.0
    assert json.loads((workspace / "report.json").read_text())["metrics"] == metrics

    assert cli_main(ws + ["eval", "--report", "report.csv"]) == 0
    assert (workspace / "report.csv").read_text().startswith("metric,value\n")


def test_plans_are_deterministic(workspace: Path):
    ws = ["--workspace", workspace.as_posix()]
    assert cli_main(ws + ["plan", "-n", "2", "--plan", "a.json"]) == 0
    assert cli_main(ws + ["plan", "-n", "2", "--plan", "b.json"]) == 0
    assert (workspace / "a.json").read_bytes() == (workspace / "b.json").read_bytes()
    assert cli_main(ws + ["plan", "-n", "2", "--greedy", "--plan", "greedy.json"]) == 0
    greedy = json.loads((workspace / "greedy.json").read_text())
    smooth = json.loads((workspace / "a.json").read_text())
    assert greedy["motion_limit"] is None
    assert greedy["total_score"] >= smooth["total_score"]


def test_score_and_plan_reruns_are_byte_identical(workspace: Path):
    ws = ["--workspace", workspace.as_posix()]
    runs = []
    for name in ("rerun_a", "rerun_b"):
        assert cli_main(ws + ["score", *SMALL, "--maps", name]) == 0
        assert cli_main(ws + ["plan", "-n", "2", "--maps", name, "--plan", f"{name}.json"]) == 0
        maps = workspace / name
        runs.append(
            {
                "index": (maps / "index.json").read_bytes(),
                "cells": [path.read_bytes() for path in sorted(maps.glob("*.cvst"))],
                "plan": (workspace / f"{name}.json").read_bytes(),
            }
        )
    assert len(runs[0]["cells"]) == 4
    assert runs[0] == runs[1]
    assert (workspace / "maps" / "index.json").read_bytes() == runs[0]["index"]


def test_synth_from_panoramas_uses_the_feature_family(tmp_path: Path, mocker: MockerFixture):
    spy = mocker.spy(cvshl.cli, "synth_panorama_video")
    ws = ["--workspace", tmp_path.as_posix()]
    args = ["synth", *SMALL, "--features", "motion", "--panoramas", "--panorama-height", "40", "--segments", "1"]
    assert cli_main(ws + args + ["--triplet-count", "2", "-n", "1"]) == 0
    extractor = spy.call_args.args[1]
    assert extractor.family == "motion" and extractor.channels == 4
    manifest = load_manifest(tmp_path / "video" / "manifest.json")
    assert manifest.video_id == "panorama" and len(manifest) == 1
    size = feature_size(2, padded=True)
    assert read_tensor(manifest.segments[0].feature_path(0.0, 0.0)).shape == (size, size, 4)
    assert cli_main(ws + ["synth", "--k", "2", "--in-channels", "1", "--panoramas"]) == 1
    with pytest.raises(SystemExit):
        cli_main(ws + ["synth", "--features", "audio"])


def test_config_file(workspace: Path, tmp_path: Path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"version": 1, "highlight_count": 1, "plan": "from_config.json"}))
    assert cli_main(["--workspace", workspace.as_posix(), "--config", config.as_posix(), "plan"]) == 0
    assert len(json.loads((workspace / "from_config.json").read_text())["highlights"]) == 1
    config.write_text(json.dumps({"version": 7}))
    assert cli_main(["--workspace", workspace.as_posix(), "--config", config.as_posix(), "plan"]) == 1


def test_infeasible_plans_exit_with_two(workspace: Path, mocker: MockerFixture):
    mocker.patch("cvshl.cli.plan_video", side_effect=InfeasibleTrajectoryError("no path", (1, 2)))
    assert cli_main(["--workspace", workspace.as_posix(), "plan"]) == 2


def test_bad_input_exits_with_one(workspace: Path, tmp_path: Path):
    assert cli_main(["--workspace", tmp_path.as_posix(), "score"]) == 1
    assert cli_main(["--workspace", workspace.as_posix(), "score", "--k", "3", "--in-channels", "4"]) == 1
    assert cli_main(["--workspace", workspace.as_posix(), "plan", "-n", "9"]) == 1
    assert cli_main(["--workspace", workspace.as_posix(), "plan", "--motion-limit", "-1"]) == 1


def test_cost_table(capsys: pytest.CaptureFixture):
    assert cli_main(["cost"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("grid")
    rows = {line.split("|")[0].strip(): [cell.strip() for cell in line.split("|")] for line in lines[2:]}
    assert rows["cvs"][1] == "12" and rows["dense"][1] == "198"
    assert rows["cvs"][2].startswith("x 2.06")


def test_heatmap(workspace: Path):
    args = ["heatmap", "maps/segment_00000.cvst", "--width", "40", "--height", "20", "-o", "heat.pgm"]
    assert cli_main(["--workspace", workspace.as_posix()] + args) == 0
    image = read_pnm(workspace / "heat.pgm")
    assert image.shape == (20, 40) and image.dtype == np.uint8


def test_heatmap_uses_the_stored_window_geometry(tmp_path: Path, mocker: MockerFixture):
    rng = np.random.default_rng(4)
    save_sphere_maps("clip", [SphereScoreMap(rng.standard_normal((6, 8, 4)), hfov=72.0, aspect=1.5)], tmp_path / "m")
    spy = mocker.spy(cvshl.cli, "render_heatmap")
    args = ["heatmap", "m/segment_00000.cvst", "--width", "16", "--height", "8", "-o", "heat.pgm"]
    assert cli_main(["--workspace", tmp_path.as_posix()] + args) == 0
    rendered = spy.call_args.args[0]
    assert rendered.hfov == 72.0 and rendered.aspect == 1.5
    assert read_pnm(tmp_path / "heat.pgm").shape == (8, 16)
    assert cli_main(["--workspace", tmp_path.as_posix(), "heatmap", "missing.cvst"]) == 1


def test_nfov(tmp_path: Path):
    erp = np.random.default_rng(0).integers(0, 256, size=(20, 40, 3), dtype=np.uint8)
    write_pnm(erp, tmp_path / "erp.ppm")
    args = ["nfov", "erp.ppm", "--theta", "10", "--phi", "350", "--width", "16", "--height", "12", "-o", "still.ppm"]
    assert cli_main(["--workspace", tmp_path.as_posix()] + args) == 0
    assert read_pnm(tmp_path / "still.ppm").shape == (12, 16, 3)
