#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""Tests of the trajectory and highlight metrics and of the cost accounting."""

import math

import numpy as np
import pytest

from cvshl import (
    GroundTruth,
    Highlight,
    HighlightMark,
    MetricError,
    Trajectory,
    TrajectoryEntry,
    Viewpoint,
    WindowCandidate,
    average_precision,
    cost_report,
    evaluate,
    format_cost_table,
    frame_cosine_similarity,
    frame_overlap,
    glimpse_grid,
    mean_average_precision,
    trajectory_metrics,
)
from cvshl._metrics import dataset_map


def _trajectory(points: list[Viewpoint], scores: list[float] | None = None) -> Trajectory:
    scores = scores or [0.0] * len(points)
    return Trajectory([TrajectoryEntry(t, WindowCandidate(p, 90.0, s)) for t, (p, s) in enumerate(zip(points, scores))])


def test_cosine_fixtures():
    track = [Viewpoint(10.0, 20.0), Viewpoint(-30.0, 200.0)]
    assert math.isclose(frame_cosine_similarity(track, GroundTruth([track])), 1.0)
    antipodes = [Viewpoint(-10.0, 200.0), Viewpoint(30.0, 20.0)]
    assert math.isclose(frame_cosine_similarity(track, GroundTruth([antipodes])), -1.0)


def test_frame_and_trajectory_levels():
    """
    Frame level averages every annotator and segment pair, trajectory level reports the best annotator.
    """
    pred = [Viewpoint(0.0, 0.0), Viewpoint(0.0, 0.0)]
    gt = GroundTruth(
        [
            [Viewpoint(0.0, 0.0), Viewpoint(0.0, 90.0)],
            [Viewpoint(0.0, 90.0), Viewpoint(0.0, 90.0)],
        ]
    )
    assert math.isclose(frame_cosine_similarity(pred, gt), 0.25, abs_tol=1e-12)
    scores = trajectory_metrics(pred, gt)
    assert math.isclose(scores.cosine, 0.5, abs_tol=1e-12)
    single = GroundTruth([gt.trajectories[0]])
    assert math.isclose(trajectory_metrics(pred, single).cosine, frame_cosine_similarity(pred, single))


def test_overlap_fixtures():
    track = [Viewpoint(0.0, 0.0), Viewpoint(45.0, 300.0)]
    assert frame_overlap(track, GroundTruth([track])) == 1.0
    antipodes = [Viewpoint(0.0, 180.0), Viewpoint(-45.0, 120.0)]
    assert frame_overlap(track, GroundTruth([antipodes])) == 0.0


def test_overlap_of_shifted_windows():
    """
    Two equatorial windows 45 degrees apart overlap partially, symmetrically and independently of where they sit.
    """
    a = [Viewpoint(0.0, 0.0)]
    b = [Viewpoint(0.0, 45.0)]
    forward = frame_overlap(a, GroundTruth([b]), seed=5)
    backward = frame_overlap(b, GroundTruth([a]), seed=5)
    assert 0.2 < forward < 0.5
    assert forward == backward
    moved = frame_overlap([Viewpoint(0.0, 130.0)], GroundTruth([[Viewpoint(0.0, 175.0)]]), seed=5)
    assert abs(moved - forward) < 0.02


def test_metrics_are_rotation_invariant():
    rng = np.random.default_rng(0)
    for _ in range(100):
        pred = [Viewpoint(rng.uniform(-80, 80), rng.uniform(0, 360)) for _ in range(3)]
        truth = [Viewpoint(rng.uniform(-80, 80), rng.uniform(0, 360)) for _ in range(3)]
        shift = rng.uniform(0, 360)
        original = frame_cosine_similarity(pred, GroundTruth([truth]))
        turned = GroundTruth([[t.rotated(shift) for t in truth]])
        rotated = frame_cosine_similarity([p.rotated(shift) for p in pred], turned)
        assert math.isclose(original, rotated, abs_tol=1e-9)
        assert math.isclose(original, frame_cosine_similarity(truth, GroundTruth([pred])), abs_tol=1e-12)


def test_alignment_errors():
    with pytest.raises(MetricError):
        frame_cosine_similarity([Viewpoint(0.0, 0.0)], GroundTruth([[Viewpoint(0.0, 0.0)] * 2]))
    with pytest.raises(MetricError):
        frame_cosine_similarity([], GroundTruth([[]]))
    with pytest.raises(MetricError):
        GroundTruth([[Viewpoint(0.0, 0.0)], []])
    with pytest.raises(MetricError):
        GroundTruth([[Viewpoint(0.0, 0.0)]], [[HighlightMark(0, Viewpoint(0, 0)), HighlightMark(0, Viewpoint(9, 0))]])
    with pytest.raises(MetricError):
        frame_overlap([Viewpoint(0.0, 0.0)], GroundTruth([[Viewpoint(0.0, 0.0)]]), n_samples=10)


def test_average_precision():
    truth = [HighlightMark(0, Viewpoint(0.0, 0.0)), HighlightMark(2, Viewpoint(0.0, 0.0))]
    hit_miss_hit = [
        HighlightMark(0, Viewpoint(0.0, 10.0)),
        HighlightMark(1, Viewpoint(0.0, 0.0)),
        HighlightMark(2, Viewpoint(0.0, 0.0)),
    ]
    assert average_precision(hit_miss_hit, truth) == 5 / 6
    assert average_precision(list(reversed(truth)), truth) == 1.0
    assert average_precision([HighlightMark(0, Viewpoint(0.0, 90.0))], truth) == 0.0
    assert average_precision(hit_miss_hit, []) == 0.0
    with pytest.raises(MetricError):
        average_precision([], truth)


def test_each_mark_is_used_once():
    truth = [HighlightMark(0, Viewpoint(0.0, 0.0))]
    twice = [HighlightMark(0, Viewpoint(0.0, 0.0)), HighlightMark(0, Viewpoint(0.0, 5.0))]
    assert average_precision(twice, truth) == 1.0
    assert average_precision(twice, truth, threshold=1.0) == 1.0
    assert average_precision([HighlightMark(0, Viewpoint(0.0, 5.0))], truth, threshold=1.0) == 0.0


def test_mean_average_precision_over_annotators_and_videos():
    truth_a = [HighlightMark(0, Viewpoint(0.0, 0.0))]
    truth_b = [HighlightMark(1, Viewpoint(0.0, 0.0))]
    ranked = [HighlightMark(0, Viewpoint(0.0, 0.0))]
    assert mean_average_precision(ranked, [truth_a, truth_b]) == 0.5
    assert dataset_map([(ranked, [truth_a]), (ranked, [truth_b])]) == 0.5
    with pytest.raises(MetricError):
        mean_average_precision(ranked, [])


def test_evaluate_report():
    points = [Viewpoint(0.0, 0.0), Viewpoint(10.0, 20.0), Viewpoint(20.0, 40.0)]
    trajectory = _trajectory(points, [1.0, 3.0, 2.0])
    gt = GroundTruth([points], [[HighlightMark(1, points[1]), HighlightMark(2, points[2])]])
    highlights = Highlight([trajectory.entries[1], trajectory.entries[2]])
    report = evaluate(trajectory, gt, highlights)
    assert report.frame_cosine == pytest.approx(1.0)
    assert report.frame_overlap == 1.0 and report.trajectory_overlap == 1.0
    assert report.mean_average_precision == 1.0
    assert report.segments == 3 and report.annotators == 1
    document = report.as_json()
    assert set(document) == {"metrics", "definitions"}
    assert "map" in document["definitions"]
    lines = report.as_csv().splitlines()
    assert lines[0] == "metric,value" and len(lines) == 8
    assert evaluate(trajectory, GroundTruth([points])).mean_average_precision is None


def test_cost_report_of_the_sphere_tiling():
    report = cost_report("cvs", glimpse_grid(), enlarge=0.2)
    assert report.projections == 12
    assert math.isclose(report.solid_angle_ratio, 2.06, abs_tol=0.01)
    assert abs(report.solid_angle_ratio / 1.96 - 1.0) <= 0.15
    assert report.tangent_plane_ratio > report.solid_angle_ratio
    assert cost_report("plain", glimpse_grid()).solid_angle_ratio < report.solid_angle_ratio
    with pytest.raises(MetricError):
        cost_report("empty", [])


def test_format_cost_table():
    table = format_cost_table([cost_report("cvs", glimpse_grid(), 0.2, 360, 180)])
    lines = table.splitlines()
    assert lines[0].startswith("grid") and "# glimpses" in lines[0]
    assert set(lines[1]) <= {"-", "+"}
    assert lines[2].startswith("cvs") and lines[2].endswith("-")
    assert table.endswith("\n")
