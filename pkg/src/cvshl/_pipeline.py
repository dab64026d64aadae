#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Pipeline stages shared by the command line commands: scoring videos into sphere maps, planning, training, evaluation,
cost accounting with the timing harness, heatmaps and NFOV stills.
"""

from __future__ import annotations

import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from ._config import PipelineConfig
from ._decoder import DecoderParams, decode_batch, init_params
from ._errors import ConfigError, CvshlError, ScoreMapError, SegmentError
from ._features import (
    NFOV_HEIGHT,
    NFOV_WIDTH,
    FeatureExtractor,
    feature_size,
    synth_erp_clip,
)
from ._geometry import (
    LATITUDE_TIERS,
    LONGITUDE_TIERS,
    ErpFrame,
    Glimpse,
    Viewpoint,
    extract_nfov,
    extract_nfov_clip,
    glimpse_grid,
)
from ._gridspec import GridSpec, parse_grid
from ._io import LoadedPlan, SegmentEntry, VideoManifest, read_tensor
from ._metrics import CostReport, GroundTruth, MetricReport, cost_report, evaluate
from ._planner import (
    Highlight,
    SegmentCandidates,
    Trajectory,
    greedy_trajectory,
    select_highlights,
    stitch_trajectory,
)
from ._ranking import TrainResult, Triplet, train
from ._scoremap import (
    PaddedScoreMap,
    SphereScoreMap,
    position_pool_batch,
    score_windows,
    sliding_window_search,
    stitch_sphere_map,
)
from .cli._parser import __script_name__

_pipeline_logger = logging.getLogger(__script_name__)


# +------------------------------------------------------------------------------------------------------------------+
# | TIMING
# +------------------------------------------------------------------------------------------------------------------+


@dataclass
class StageTimer:
    """
    Accumulates wall time per named stage.

    .. invisible-code-block: python

        from cvshl._pipeline import StageTimer

    .. code-block:: python

        timer = StageTimer()
        with timer.stage("decoder"):
            pass
        with timer.stage("decoder"):
            pass
        assert list(timer.seconds) == ["decoder"] and timer.total >= 0.0

    """

    seconds: dict[str, float] = field(default_factory=dict)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + time.perf_counter() - start

    @property
    def total(self) -> float:
        return float(sum(self.seconds.values()))

    def summary(self, per: int = 1) -> str:
        return ", ".join(f"{name} {seconds / per:.4f} s" for name, seconds in self.seconds.items())


# +------------------------------------------------------------------------------------------------------------------+
# | SCORE
# +------------------------------------------------------------------------------------------------------------------+


def score_segment(
    segment: SegmentEntry, params: DecoderParams, index: int = 0, timer: StageTimer | None = None
) -> SphereScoreMap:
    """
    Decode the twelve padded glimpse feature tensors of a segment in one batch and stitch them into a sphere map.

    :raises ScoreMapError: if the features do not decode to padded maps.
    """
    timer = timer or StageTimer()
    glimpses = glimpse_grid(segment=index)
    with timer.stage("read"):
        features = np.stack([read_tensor(segment.feature_path(g.center.theta, g.center.phi)) for g in glimpses])
    with timer.stage("decoder"):
        maps = decode_batch(features, params)
    padded = [m for m in maps if isinstance(m, PaddedScoreMap)]
    if len(padded) != len(maps):
        raise ScoreMapError(
            f"Features of shape {features.shape[1:]} decode to unpadded maps; sphere maps need "
            f"{feature_size(params.k, padded=True)} x {feature_size(params.k, padded=True)} inputs."
        )
    with timer.stage("stitch"):
        return stitch_sphere_map(zip(glimpses, padded))


def score_video(manifest: VideoManifest, params: DecoderParams) -> list[SphereScoreMap]:
    """
    Sphere maps of every segment of a video, in segment order.

    :raises SegmentError: wrapping the first failure, naming its segment.
    """
    timer = StageTimer()
    maps = []
    for index, segment in enumerate(manifest.segments):
        try:
            maps.append(score_segment(segment, params, index, timer))
        except CvshlError as e:
            raise SegmentError(index, e) from e
        _pipeline_logger.debug("Scored segment %d of %s.", index, manifest.video_id)
    _pipeline_logger.info(
        "Scored %d segments of %s; per segment: %s.", len(maps), manifest.video_id, timer.summary(len(maps))
    )
    return maps


# +------------------------------------------------------------------------------------------------------------------+
# | PLAN
# +------------------------------------------------------------------------------------------------------------------+


def segment_candidates(maps: Sequence[SphereScoreMap], scales: Sequence[float], h: float) -> list[SegmentCandidates]:
    candidates = []
    for index, sphere_map in enumerate(maps):
        try:
            candidates.append(SegmentCandidates(index, score_windows(sphere_map, scales, h)))
        except ScoreMapError as e:
            raise SegmentError(index, e) from e
    return candidates


def plan_video(
    maps: Sequence[SphereScoreMap],
    scales: Sequence[float],
    h: float,
    motion_limit: float,
    highlight_count: int,
    greedy: bool = False,
) -> tuple[Trajectory, Highlight]:
    """
    Score every window of every segment, link one window per segment and pick the top highlights.

    :param maps: Sphere maps in segment order.
    :param scales: Window scales in degrees.
    :param h: Pooling bandwidth.
    :param motion_limit: Per-axis motion bound in degrees between consecutive segments.
    :param highlight_count: Number of highlights.
    :param greedy: Take every segment's best window and ignore the motion bound.
    :raises InfeasibleTrajectoryError: if no trajectory satisfies the motion bound.
    :raises PlannerError: if more highlights are requested than there are segments.
    """
    segments = segment_candidates(maps, scales, h)
    if greedy:
        trajectory = greedy_trajectory(segments, motion_limit)
    else:
        trajectory = stitch_trajectory(segments, motion_limit)
    highlights = select_highlights(trajectory, highlight_count)
    _pipeline_logger.info(
        "Planned %d segments (total score %.4f), %d highlights.", len(trajectory), trajectory.total, highlight_count
    )
    return trajectory, highlights


# +------------------------------------------------------------------------------------------------------------------+
# | TRAIN / EVAL
# +------------------------------------------------------------------------------------------------------------------+


def train_decoder(triplets: Sequence[Triplet], config: PipelineConfig) -> TrainResult:
    """
    Initialise a decoder from ``config.seed`` sized for the triplet features and train it.

    :raises ConfigError: if ``config.in_channels`` disagrees with the triplet tensors.
    """
    channels = int(triplets[0].professional.shape[-1])
    if config.in_channels is not None and config.in_channels != channels:
        raise ConfigError(f"Triplet features have {channels} channels, in_channels is {config.in_channels}.")
    params = init_params(config.seed, config.decoder_widths(), channels)
    return train(triplets, config.train_config(), params)


def evaluate_plan(plan: LoadedPlan, gt: GroundTruth, config: PipelineConfig) -> MetricReport:
    return evaluate(
        plan.trajectory,
        gt,
        plan.highlights or None,
        n_samples=config.overlap_samples,
        seed=config.seed,
        threshold=config.map_threshold,
    )


# +------------------------------------------------------------------------------------------------------------------+
# | COST AND TIMING HARNESS
# +------------------------------------------------------------------------------------------------------------------+


def is_sphere_tiling(spec: GridSpec) -> bool:
    """
    True if ``spec`` is the twelve glimpse tiling whose padded maps stitch into a sphere map.
    """
    return sorted(spec.latitudes) == sorted(LATITUDE_TIERS) and sorted(spec.longitudes) == sorted(LONGITUDE_TIERS)


def _harness_params(config: PipelineConfig) -> DecoderParams:
    return init_params(config.seed, config.decoder_widths(), config.feature_channels())


def time_grid(
    spec: GridSpec,
    config: PipelineConfig,
    segments: int = 1,
    extractor: FeatureExtractor | None = None,
    params: DecoderParams | None = None,
    erp_height: int = 180,
) -> StageTimer:
    """
    Run synthetic segments through the full scoring path of a grid and time every stage: NFOV projection of all
    frames, feature extraction, one batched decoder pass and then either stitching plus sliding window search (for
    the sphere tiling) or pooling every glimpse and taking the best.

    :return: Accumulated stage times; divide by ``segments`` for per segment values.
    """
    if segments < 1:
        raise ConfigError(f"At least one segment must be timed, got {segments}.")
    extractor = extractor or config.feature_extractor()
    params = params or _harness_params(config)
    tiling = is_sphere_tiling(spec)
    size = feature_size(params.k, padded=tiling)
    timer = StageTimer()
    for t in range(segments):
        clip = synth_erp_clip(config.seed + t, height=erp_height)
        glimpses = spec.glimpses(t)
        with timer.stage("projection"):
            nfov = [extract_nfov_clip(clip, g, NFOV_WIDTH, NFOV_HEIGHT, spec.enlarge) for g in glimpses]
        with timer.stage("features"):
            features = np.stack([extractor(frames, size) for frames in nfov])
        with timer.stage("decoder"):
            maps = decode_batch(features, params)
        with timer.stage("search"):
            if tiling:
                sphere_map = stitch_sphere_map((g, m) for g, m in zip(glimpses, maps) if isinstance(m, PaddedScoreMap))
                best = sliding_window_search(sphere_map, config.scales, config.h).center
            else:
                pooled = position_pool_batch(np.stack([m.scores for m in maps]), config.h)
                best = glimpses[int(np.argmax(pooled))].center
        _pipeline_logger.debug("Segment %d of grid '%s': best view %s.", t, spec.name, best)
    _pipeline_logger.info("Timed grid '%s' per segment: %s.", spec.name, timer.summary(segments))
    return timer


def cost_table(
    grids: Sequence[str],
    config: PipelineConfig,
    timed: bool = False,
    segments: int = 1,
    erp_width: int = 720,
) -> list[CostReport]:
    """
    Cost reports of the named or described grids, with per segment wall time when ``timed``.
    """
    reports = []
    for text in grids:
        spec = parse_grid(text)
        report = cost_report(spec.name, spec.glimpses(), spec.enlarge, erp_width, erp_width // 2)
        if timed:
            timer = time_grid(spec, config, segments)
            report = replace(report, seconds_per_segment=timer.total / segments)
        reports.append(report)
    if timed and len(reports) > 1:
        fastest = min(reports, key=lambda r: r.seconds_per_segment or math.inf)
        for r in reports:
            if r is not fastest and r.seconds_per_segment and fastest.seconds_per_segment:
                _pipeline_logger.info(
                    "'%s' takes %.1fx the time of '%s'.",
                    r.name,
                    r.seconds_per_segment / fastest.seconds_per_segment,
                    fastest.name,
                )
    return reports


# +------------------------------------------------------------------------------------------------------------------+
# | IMAGES
# +------------------------------------------------------------------------------------------------------------------+


def nfov_image(
    image: np.ndarray, center: Viewpoint, hfov: float, width: int, height: int, enlarge: float = 0.0
) -> np.ndarray:
    """
    Render an 8 bit NFOV still from an 8 bit equirectangular image.
    """
    frame = ErpFrame(np.asarray(image, dtype=np.float32))
    rendered = extract_nfov(frame, Glimpse(center, hfov), width, height, enlarge)
    return np.clip(np.rint(rendered), 0, 255).astype(np.uint8)
