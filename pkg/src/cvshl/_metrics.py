#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Evaluation metrics for planned trajectories and highlights, and projection cost accounting for glimpse grids.

Spatial metrics compare a predicted trajectory with every annotator's trajectory segment by segment:

* cosine similarity of the principal axes,
* overlap, the intersection over union of the two NFOV footprints on the sphere.

Frame level values average over all annotator and segment pairs. Trajectory level values average per annotator
first and report the best matching annotator.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from ._errors import MetricError
from ._geometry import (
    DEFAULT_ASPECT,
    DEFAULT_HFOV,
    MIN_MONTE_CARLO_SAMPLES,
    Glimpse,
    Viewpoint,
    analytic_solid_angle,
    angular_distance,
    erp_footprint_fraction,
    footprint_contains,
    sphere_samples,
    tangent_plane_area,
)
from ._planner import Highlight, Trajectory
from .cli._parser import __script_name__

_metrics_logger = logging.getLogger(__script_name__)

DEFAULT_MATCH_THRESHOLD = 45.0

METRIC_DEFINITIONS: dict[str, str] = {
    "cosine": "mean cosine of the angle between predicted and annotated principal axes",
    "overlap": "mean intersection over union of the NFOV footprints, Monte Carlo over the sphere",
    "map": "average precision of ranked highlights; a hit shares the segment and lies within the match threshold",
}
"""
Definitions attached to every metric report. The benchmark does not publish formulas; these are the interpretations
used here.
"""


@dataclass(frozen=True)
class HighlightMark:
    """
    An annotated (or predicted) highlight: a segment index and a viewing direction.
    """

    segment: int
    center: Viewpoint


@dataclass
class GroundTruth:
    """
    Annotations of one video. ``trajectories`` holds one viewpoint per segment for each annotator, ``highlights`` one
    top-N set per annotator.
    """

    trajectories: list[list[Viewpoint]]
    highlights: list[list[HighlightMark]] = field(default_factory=list)

    def __post_init__(self) -> None:
        lengths = {len(t) for t in self.trajectories}
        if len(lengths) > 1:
            raise MetricError(f"Annotator trajectories differ in length: {sorted(lengths)}.")
        for annotator, marks in enumerate(self.highlights):
            segments = [mark.segment for mark in marks]
            if len(set(segments)) != len(segments):
                raise MetricError(f"Annotator {annotator} marks one segment more than once.")


def _viewpoints(pred: Trajectory | Sequence[Viewpoint]) -> list[Viewpoint]:
    if isinstance(pred, Trajectory):
        return [entry.window.center for entry in pred.entries]
    return list(pred)


def _vectors(points: Sequence[Viewpoint]) -> np.ndarray:
    return np.array([p.unit_vector() for p in points])


def _check_alignment(pred: Sequence[Viewpoint], gt: GroundTruth) -> None:
    if not pred:
        raise MetricError("Prediction is empty.")
    if not gt.trajectories:
        raise MetricError("Ground truth has no annotator trajectories.")
    for annotator, trajectory in enumerate(gt.trajectories):
        if len(trajectory) != len(pred):
            raise MetricError(
                f"Prediction has {len(pred)} segments, annotator {annotator} has {len(trajectory)}."
            )


def _cosine_table(pred: Sequence[Viewpoint], gt: GroundTruth) -> np.ndarray:
    predicted = _vectors(pred)
    return np.array([np.sum(predicted * _vectors(t), axis=1) for t in gt.trajectories])


def window_iou(a: Glimpse, b: Glimpse, directions: np.ndarray) -> float:
    """
    Intersection over union of two glimpse footprints estimated over shared sample ``directions``.
    """
    inside_a = footprint_contains(a, directions)
    inside_b = footprint_contains(b, directions)
    union = np.count_nonzero(inside_a | inside_b)
    if union == 0:
        return 0.0
    return float(np.count_nonzero(inside_a & inside_b)) / union


def _overlap_table(
    pred: Sequence[Viewpoint], gt: GroundTruth, hfov: float, aspect: float, n_samples: int, seed: int
) -> np.ndarray:
    if n_samples < MIN_MONTE_CARLO_SAMPLES:
        raise MetricError(f"Overlap needs at least {MIN_MONTE_CARLO_SAMPLES} samples, got {n_samples}.")
    directions = sphere_samples(n_samples, seed)
    return np.array(
        [
            [window_iou(Glimpse(p, hfov, aspect), Glimpse(q, hfov, aspect), directions) for p, q in zip(pred, t)]
            for t in gt.trajectories
        ]
    )


def frame_cosine_similarity(pred: Trajectory | Sequence[Viewpoint], gt: GroundTruth) -> float:
    """
    Mean cosine similarity over all annotator and segment pairs.

    .. invisible-code-block: python

        from cvshl import GroundTruth, Viewpoint, frame_cosine_similarity

    >>> gt = GroundTruth([[Viewpoint(0, 90)]])
    >>> abs(frame_cosine_similarity([Viewpoint(0, 0)], gt)) < 1e-12
    True

    :raises MetricError: if the segment counts disagree.
    """
    points = _viewpoints(pred)
    _check_alignment(points, gt)
    return float(np.mean(_cosine_table(points, gt)))


def frame_overlap(
    pred: Trajectory | Sequence[Viewpoint],
    gt: GroundTruth,
    hfov: float = DEFAULT_HFOV,
    aspect: float = DEFAULT_ASPECT,
    n_samples: int = MIN_MONTE_CARLO_SAMPLES,
    seed: int = 0,
) -> float:
    """
    Mean footprint overlap over all annotator and segment pairs. Both views use the same field of view.

    :raises MetricError: if the segment counts disagree.
    """
    points = _viewpoints(pred)
    _check_alignment(points, gt)
    return float(np.mean(_overlap_table(points, gt, hfov, aspect, n_samples, seed)))


@dataclass
class TrajectoryScores:
    cosine: float
    overlap: float


def trajectory_metrics(
    pred: Trajectory | Sequence[Viewpoint],
    gt: GroundTruth,
    hfov: float = DEFAULT_HFOV,
    aspect: float = DEFAULT_ASPECT,
    n_samples: int = MIN_MONTE_CARLO_SAMPLES,
    seed: int = 0,
) -> TrajectoryScores:
    """
    Per-annotator mean cosine and overlap, reporting the best annotator for each.
    """
    points = _viewpoints(pred)
    _check_alignment(points, gt)
    cosine = float(np.max(np.mean(_cosine_table(points, gt), axis=1)))
    overlap = float(np.max(np.mean(_overlap_table(points, gt, hfov, aspect, n_samples, seed), axis=1)))
    return TrajectoryScores(cosine, overlap)


# +------------------------------------------------------------------------------------------------------------------+
# | AVERAGE PRECISION
# +------------------------------------------------------------------------------------------------------------------+


def _marks(ranked: Highlight | Sequence[HighlightMark]) -> list[HighlightMark]:
    if isinstance(ranked, Highlight):
        return [HighlightMark(entry.segment, entry.window.center) for entry in ranked.entries]
    return list(ranked)


def average_precision(
    ranked: Highlight | Sequence[HighlightMark],
    truth: Sequence[HighlightMark],
    threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> float:
    """
    Average precision of a ranked list against one annotator's highlight set. A prediction hits when it shares the
    segment of an unused ground-truth mark within ``threshold`` degrees; the closest such mark is used up.

    .. invisible-code-block: python

        from cvshl import HighlightMark, Viewpoint, average_precision

    .. code-block:: python

        truth = [HighlightMark(0, Viewpoint(0, 0)), HighlightMark(2, Viewpoint(0, 0))]
        ranked = [
            HighlightMark(0, Viewpoint(0, 10)),  # hit
            HighlightMark(1, Viewpoint(0, 0)),  # miss
            HighlightMark(2, Viewpoint(0, 0)),  # hit
        ]
        assert average_precision(ranked, truth) == 5 / 6

    """
    predictions = _marks(ranked)
    if not predictions:
        raise MetricError("Ranked prediction list is empty.")
    if not truth:
        return 0.0
    used = [False] * len(truth)
    hits = 0
    total = Fraction(0)
    for rank, prediction in enumerate(predictions, start=1):
        match: int | None = None
        match_distance = math.inf
        for index, mark in enumerate(truth):
            if used[index] or mark.segment != prediction.segment:
                continue
            distance = angular_distance(mark.center, prediction.center)
            if distance <= threshold and distance < match_distance:
                match, match_distance = index, distance
        if match is not None:
            used[match] = True
            hits += 1
            total += Fraction(hits, rank)
    return float(total / len(truth))


def mean_average_precision(
    ranked: Highlight | Sequence[HighlightMark],
    truth_sets: Sequence[Sequence[HighlightMark]],
    threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> float:
    """
    Average precision of one video's ranked highlights, averaged over annotators.
    """
    if not truth_sets:
        raise MetricError("No annotator highlight sets.")
    return float(np.mean([average_precision(ranked, truth, threshold) for truth in truth_sets]))


def dataset_map(
    videos: Sequence[tuple[Highlight | Sequence[HighlightMark], Sequence[Sequence[HighlightMark]]]],
    threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> float:
    """
    :func:`mean_average_precision` averaged over videos.
    """
    if not videos:
        raise MetricError("No videos to evaluate.")
    return float(np.mean([mean_average_precision(ranked, truth, threshold) for ranked, truth in videos]))


# +------------------------------------------------------------------------------------------------------------------+
# | REPORTS
# +------------------------------------------------------------------------------------------------------------------+


@dataclass
class MetricReport:
    """
    Every metric of one prediction against one ground truth.
    """

    frame_cosine: float
    frame_overlap: float
    trajectory_cosine: float
    trajectory_overlap: float
    mean_average_precision: float | None
    segments: int
    annotators: int

    def as_json(self) -> dict[str, Any]:
        return {"metrics": asdict(self), "definitions": dict(METRIC_DEFINITIONS)}

    def as_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["metric", "value"])
        for name, value in asdict(self).items():
            writer.writerow([name, "" if value is None else repr(value)])
        return buffer.getvalue()


def evaluate(
    pred: Trajectory | Sequence[Viewpoint],
    gt: GroundTruth,
    ranked: Highlight | Sequence[HighlightMark] | None = None,
    hfov: float = DEFAULT_HFOV,
    n_samples: int = MIN_MONTE_CARLO_SAMPLES,
    seed: int = 0,
    threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> MetricReport:
    """
    Compute the full report. Average precision is only reported when both ranked highlights and annotated highlight
    sets are available.
    """
    points = _viewpoints(pred)
    trajectory = trajectory_metrics(points, gt, hfov, DEFAULT_ASPECT, n_samples, seed)
    precision = None
    if ranked is not None and gt.highlights and _marks(ranked):
        precision = mean_average_precision(ranked, gt.highlights, threshold)
    report = MetricReport(
        frame_cosine=frame_cosine_similarity(points, gt),
        frame_overlap=frame_overlap(points, gt, hfov, DEFAULT_ASPECT, n_samples, seed),
        trajectory_cosine=trajectory.cosine,
        trajectory_overlap=trajectory.overlap,
        mean_average_precision=precision,
        segments=len(points),
        annotators=len(gt.trajectories),
    )
    _metrics_logger.info("Evaluated %d segments against %d annotators.", report.segments, report.annotators)
    return report


# +------------------------------------------------------------------------------------------------------------------+
# | COST ACCOUNTING
# +------------------------------------------------------------------------------------------------------------------+


@dataclass
class CostReport:
    """
    Projection count and total projected area of a glimpse grid, each area as a multiple of the sphere under three
    accounting models. Overlapping glimpses are counted in full.
    """

    name: str
    projections: int
    solid_angle_ratio: float
    erp_pixel_ratio: float
    tangent_plane_ratio: float
    seconds_per_segment: float | None = None

    def as_row(self) -> list[str]:
        seconds = "-" if self.seconds_per_segment is None else f"{self.seconds_per_segment:.3f}"
        return [
            self.name,
            str(self.projections),
            f"x {self.solid_angle_ratio:.4f}",
            f"x {self.erp_pixel_ratio:.4f}",
            f"x {self.tangent_plane_ratio:.4f}",
            seconds,
        ]


COST_HEADER = ["grid", "# glimpses", "solid angle", "ERP pixels", "tangent plane", "s / segment"]


def cost_report(
    name: str, glimpses: Sequence[Glimpse], enlarge: float = 0.0, erp_width: int = 720, erp_height: int = 360
) -> CostReport:
    """
    Count projections and total the footprint areas of one segment's glimpses.

    :param name: Label of the grid.
    :param glimpses: The projected glimpses of one segment.
    :param enlarge: Enlargement applied to every glimpse before projection.
    :param erp_width: Width of the ERP raster used by the pixel model.
    :param erp_height: Height of that raster.
    """
    if not glimpses:
        raise MetricError(f"Grid '{name}' has no glimpses.")
    sphere = 4.0 * math.pi
    return CostReport(
        name=name,
        projections=len(glimpses),
        solid_angle_ratio=sum(analytic_solid_angle(g, enlarge) for g in glimpses) / sphere,
        erp_pixel_ratio=sum(erp_footprint_fraction(g, enlarge, erp_width, erp_height) for g in glimpses),
        tangent_plane_ratio=sum(tangent_plane_area(g, enlarge) for g in glimpses) / sphere,
    )


def format_cost_table(reports: Sequence[CostReport]) -> str:
    """
    Render cost reports as a fixed-width text table.
    """
    rows = [COST_HEADER] + [report.as_row() for report in reports]
    widths = [max(len(row[column]) for row in rows) for column in range(len(COST_HEADER))]
    lines = [" | ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "-+-".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"
