#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Feature inputs of the score map decoder: a pluggable extractor interface, deterministic pixel statistics extractors of
the motion and frame feature families and their fusion, and generators of synthetic videos and panoramas.

Any callable turning an NFOV clip into an ``(size, size, channels)`` tensor can stand in for a video backbone:

.. invisible-code-block: python

    import numpy as np
    from cvshl import FeatureExtractor, PixelStatisticsExtractor, feature_size

.. code-block:: python

    extractor: FeatureExtractor = PixelStatisticsExtractor(channels=8, seed=0)
    clip = np.random.default_rng(0).random((25, 84, 112, 3), dtype=np.float32)
    assert extractor(clip, 14).shape == (14, 14, 8)

"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Protocol

import cv2
import numpy as np

from ._decoder import SPATIAL_SHRINK
from ._errors import ConfigError
from ._geometry import (
    LATITUDE_TIERS,
    LONGITUDE_TIERS,
    ErpFrame,
    Viewpoint,
    angular_distances,
    extract_nfov_clip,
    glimpse_grid,
    gnomonic_inverse_vectors,
    nfov_sampling_grid,
    unit_vectors,
)
from ._io import DEFAULT_FPS, SEGMENT_SECONDS, GlimpseFeatures, SegmentEntry, VideoManifest, save_manifest, write_tensor
from ._metrics import GroundTruth, HighlightMark
from ._ranking import planted_directions
from .cli._parser import __script_name__

_features_logger = logging.getLogger(__script_name__)

NFOV_WIDTH = 112
NFOV_HEIGHT = 84
INTEREST_WIDTH = 25.0


def padded_enlargement(k: int) -> float:
    """
    Enlargement of a glimpse whose decoded map carries one extra ring of cells: ``1 / k``.
    """
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}.")
    return 1.0 / k


def feature_size(k: int, padded: bool = False) -> int:
    """
    Spatial size of the feature tensor decoding to a ``k x k`` map, or to a ``(k+2) x (k+2)`` map when ``padded``.

    >>> feature_size(5), feature_size(5, padded=True)
    (14, 16)
    """
    return k + SPATIAL_SHRINK + (2 if padded else 0)


class FeatureExtractor(Protocol):
    """
    Turns an NFOV clip ``(frames, height, width[, 3])`` into a ``(size, size, channels)`` feature tensor.
    """

    channels: int

    def __call__(self, clip: np.ndarray, size: int) -> np.ndarray: ...


FeatureFamily = Literal["motion", "frame", "fusion"]
FEATURE_FAMILIES: tuple[FeatureFamily, ...] = ("motion", "frame", "fusion")

MOTION_STATISTICS = 3
FRAME_STATISTICS = 5


def _clip_array(clip: np.ndarray) -> np.ndarray:
    clip = np.asarray(clip, dtype=np.float32)
    if clip.ndim == 3:
        clip = np.repeat(clip[..., np.newaxis], 3, axis=-1)
    if clip.ndim != 4 or clip.shape[-1] != 3 or clip.shape[0] < 1:
        raise ConfigError(f"Expected a (frames, height, width[, 3]) clip, got shape {clip.shape}.")
    return clip


def motion_statistics(clip: np.ndarray) -> np.ndarray:
    """
    The ``(height, width, 3)`` temporal statistics of a clip: luminance deviation over time and the mean and largest
    absolute luminance change between consecutive frames. A single frame has no motion.
    """
    luminance = _clip_array(clip).mean(axis=-1)
    deviation = luminance.std(axis=0)
    if luminance.shape[0] < 2:
        return np.dstack((deviation, np.zeros_like(deviation), np.zeros_like(deviation)))
    change = np.abs(np.diff(luminance, axis=0))
    return np.dstack((deviation, change.mean(axis=0), change.max(axis=0)))


def frame_statistics(clip: np.ndarray) -> np.ndarray:
    """
    The ``(height, width, 5)`` appearance statistics of a clip: colour means over time and the luminance gradient
    magnitudes of the mean frame.
    """
    clip = _clip_array(clip)
    colour = clip.mean(axis=0)
    mean_luminance = np.ascontiguousarray(colour.mean(axis=-1))
    gradient_x = np.abs(cv2.Sobel(mean_luminance, cv2.CV_32F, 1, 0, ksize=3))
    gradient_y = np.abs(cv2.Sobel(mean_luminance, cv2.CV_32F, 0, 1, ksize=3))
    return np.dstack((colour, gradient_x, gradient_y))


def family_layout(family: FeatureFamily, channels: int) -> list[tuple[int, int]]:
    """
    ``(statistics, channels)`` of every block a family stacks along the channel axis. Fused features put the motion
    block first and give it half the channels, rounded down.

    >>> family_layout("fusion", 7)
    [(3, 3), (5, 4)]
    """
    if family not in FEATURE_FAMILIES:
        raise ConfigError(f"Unknown feature family '{family}'.")
    if family == "motion":
        return [(MOTION_STATISTICS, channels)]
    if family == "frame":
        return [(FRAME_STATISTICS, channels)]
    if channels < 2:
        raise ConfigError(f"Fused features need at least two channels, got {channels}.")
    return [(MOTION_STATISTICS, channels // 2), (FRAME_STATISTICS, channels - channels // 2)]


@dataclass
class PixelStatisticsExtractor:
    """
    Pixel statistics of a clip, area-resampled to the feature grid, standardised per statistic and mixed into
    ``channels`` channels by fixed random matrices. ``family`` picks the statistics: ``motion`` (temporal change),
    ``frame`` (appearance) or ``fusion``, which stacks a mixed motion block on top of a mixed frame block.
    """

    channels: int = 8
    seed: int = 0
    family: FeatureFamily = "fusion"
    _mixing: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.channels < 1:
            raise ConfigError(f"Extractor needs at least one channel, got {self.channels}.")
        rng = np.random.default_rng(self.seed)
        self._mixing = [
            rng.standard_normal((statistics, channels)) / math.sqrt(statistics)
            for statistics, channels in family_layout(self.family, self.channels)
        ]

    def statistics(self, clip: np.ndarray) -> np.ndarray:
        """
        The per-pixel statistics of a clip, motion before frame statistics when fused.
        """
        if self.family == "motion":
            return motion_statistics(clip)
        if self.family == "frame":
            return frame_statistics(clip)
        return np.dstack((motion_statistics(clip), frame_statistics(clip)))

    def __call__(self, clip: np.ndarray, size: int) -> np.ndarray:
        if size < 1:
            raise ConfigError(f"Feature size must be positive, got {size}.")
        stats = self.statistics(clip)
        resized = cv2.resize(stats, (size, size), interpolation=cv2.INTER_AREA).reshape(size, size, stats.shape[-1])
        resized = resized.astype(np.float64)
        centred = resized - resized.mean(axis=(0, 1))
        scaled = centred / (centred.std(axis=(0, 1)) + 1e-6)
        blocks = []
        start = 0
        for mixing in self._mixing:
            blocks.append(scaled[..., start : start + mixing.shape[0]] @ mixing)
            start += mixing.shape[0]
        return np.concatenate(blocks, axis=-1)


# +------------------------------------------------------------------------------------------------------------------+
# | SYNTHETIC VIDEO
# +------------------------------------------------------------------------------------------------------------------+


@dataclass
class SyntheticVideo:
    """
    A synthetic video: its manifest plus the planted interesting region, one centre and one intensity per segment.
    """

    manifest: VideoManifest
    track: list[Viewpoint]
    intensity: list[float]


def interest_track(segments: int, seed: int) -> tuple[list[Viewpoint], list[float]]:
    """
    A smoothly moving region of interest: it drifts east by 20 degrees per segment and sways in latitude, moving less
    than 30 degrees per axis between segments. Intensities vary per segment in ``[0.5, 1.5]``.
    """
    rng = np.random.default_rng(seed)
    start = float(rng.uniform(0.0, 360.0))
    track = [Viewpoint(20.0 * math.sin(t / 3.0), start + 20.0 * t) for t in range(segments)]
    intensity = [float(value) for value in rng.uniform(0.5, 1.5, size=segments)]
    return track, intensity


def interest_field(directions: np.ndarray, center: Viewpoint, intensity: float) -> np.ndarray:
    """
    Gaussian interest ``intensity * exp(-(d / 25 deg)^2)`` of unit vectors at angular distance ``d`` from ``center``.
    """
    distance = angular_distances(directions, center.unit_vector())
    return np.asarray(intensity * np.exp(-((distance / INTEREST_WIDTH) ** 2)))


def synth_video(
    manifest_path: Path,
    segments: int = 12,
    seed: int = 0,
    channels: int = 8,
    k: int = 5,
    noise: float = 1.0,
    world_seed: int = 0,
    video_id: str = "synthetic",
) -> SyntheticVideo:
    """
    Write a synthetic video: for every segment, the padded feature tensors of the twelve grid glimpses and a manifest
    indexing them. Feature bins carry the planted quality direction of :func:`~cvshl.synth_triplets` in proportion
    to the interest at their direction, so a decoder trained on synthetic triplets scores the region of interest
    highest.

    :param manifest_path: The manifest to write; feature tensors go to a ``features`` directory next to it.
    :param segments: Number of five second segments.
    :param seed: Seed of the region of interest and the noise.
    :param channels: Feature channels.
    :param k: Score map grid size the features are sized for.
    :param noise: Standard deviation of the additive feature noise.
    :param world_seed: Seed of the planted channel directions, shared with the triplets.
    :param video_id: Identifier written to the manifest.
    """
    if segments < 1:
        raise ConfigError(f"A video needs at least one segment, got {segments}.")
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    quality_axis = planted_directions(world_seed, channels)[0]
    size = feature_size(k, padded=True)
    enlarge = padded_enlargement(k)
    track, intensity = interest_track(segments, seed)
    rng = np.random.default_rng(seed + 1)
    frames = DEFAULT_FPS * SEGMENT_SECONDS
    bins = {}
    for g in glimpse_grid():
        u, v = nfov_sampling_grid(g, size, size, enlarge)
        bins[(g.center.theta, g.center.phi)] = gnomonic_inverse_vectors(u, v, g.center)
    entries = []
    for t in range(segments):
        glimpses = []
        for row, theta in enumerate(LATITUDE_TIERS):
            for col, phi in enumerate(LONGITUDE_TIERS):
                interest = interest_field(bins[(theta, phi)], track[t], intensity[t])
                quality = 2.0 * interest - 1.0
                tensor = noise * rng.standard_normal((size, size, channels)) + quality[..., np.newaxis] * quality_axis
                path = root / "features" / f"{t:05d}_{row}_{col}.cvst"
                write_tensor(tensor, path)
                glimpses.append(GlimpseFeatures(Viewpoint(theta, phi), path))
        entries.append(SegmentEntry(t * frames, (t + 1) * frames, glimpses))
    manifest = VideoManifest(video_id, entries)
    save_manifest(manifest, manifest_path)
    _features_logger.info("Wrote a synthetic video of %d segments to %s.", segments, root)
    return SyntheticVideo(manifest, track, intensity)


def synth_ground_truth(
    video: SyntheticVideo, annotators: int = 3, highlight_count: int = 5, jitter: float = 5.0, seed: int = 0
) -> GroundTruth:
    """
    Annotations of a synthetic video: every annotator follows the region of interest with a few degrees of jitter
    and marks the segments of highest intensity as highlights.
    """
    if annotators < 1:
        raise ConfigError(f"At least one annotator is required, got {annotators}.")
    rng = np.random.default_rng(seed)
    count = min(highlight_count, len(video.track))
    ranked = sorted(range(len(video.track)), key=lambda t: (-video.intensity[t], t))[:count]
    trajectories = []
    highlights = []
    for _ in range(annotators):
        trajectory = [
            Viewpoint(
                float(np.clip(c.theta + jitter * rng.standard_normal(), -90.0, 90.0)),
                c.phi + jitter * float(rng.standard_normal()),
            )
            for c in video.track
        ]
        trajectories.append(trajectory)
        highlights.append([HighlightMark(t, trajectory[t]) for t in ranked])
    return GroundTruth(trajectories, highlights)


# +------------------------------------------------------------------------------------------------------------------+
# | SYNTHETIC PANORAMAS
# +------------------------------------------------------------------------------------------------------------------+


@functools.lru_cache(maxsize=8)
def _erp_directions(height: int) -> np.ndarray:
    theta = 90.0 - (np.arange(height) + 0.5) * 180.0 / height
    phi = (np.arange(2 * height) + 0.5) * 180.0 / height - 180.0
    directions = unit_vectors(*np.meshgrid(theta, phi, indexing="ij"))
    directions.setflags(write=False)
    return directions


def synth_erp_clip(
    seed: int,
    frames: int = DEFAULT_FPS * SEGMENT_SECONDS,
    height: int = 180,
    center: Viewpoint | None = None,
    intensity: float = 0.7,
) -> list[ErpFrame]:
    """
    Synthetic RGB panoramas: a dim noisy background and a bright striped blob that drifts east one degree per frame.

    :param seed: Seed of the noise and, without ``center``, of the blob position.
    :param frames: Number of frames.
    :param height: Panorama height; the width is twice that.
    :param center: Blob position in the first frame.
    :param intensity: Peak brightness of the blob above the background.
    """
    if frames < 1 or height < 1:
        raise ConfigError(f"Clip needs positive frames and height, got {frames} and {height}.")
    rng = np.random.default_rng(seed)
    if center is None:
        center = Viewpoint(float(rng.uniform(-45.0, 45.0)), float(rng.uniform(0.0, 360.0)))
    directions = _erp_directions(height)
    tint = rng.uniform(0.5, 1.0, size=3)
    clip = []
    for index in range(frames):
        blob = interest_field(directions, center.rotated(float(index)), intensity)
        stripes = 0.5 + 0.5 * np.sin(np.radians(directions[..., 2] * 2000.0))
        background = 0.15 + 0.05 * rng.standard_normal((height, 2 * height))
        luminance = background + blob * stripes
        pixels = np.clip(luminance[..., np.newaxis] * tint, 0.0, 1.0).astype(np.float32)
        clip.append(ErpFrame(pixels))
    return clip


def synth_panorama_video(
    manifest_path: Path,
    extractor: FeatureExtractor,
    segments: int = 12,
    seed: int = 0,
    k: int = 5,
    frames: int = DEFAULT_FPS * SEGMENT_SECONDS,
    height: int = 180,
    video_id: str = "panorama",
) -> SyntheticVideo:
    """
    Write a video whose features come from rendered pixels: every segment is a :func:`synth_erp_clip` whose blob
    passes the region of interest track halfway through the segment, and every grid glimpse of it is projected with
    the padded enlargement and run through ``extractor``.

    :param manifest_path: The manifest to write; feature tensors go to a ``features`` directory next to it.
    :param extractor: Feature extractor of the projected NFOV clips.
    :param frames: Frames rendered per segment.
    :param height: Panorama height; the width is twice that.
    """
    if segments < 1:
        raise ConfigError(f"A video needs at least one segment, got {segments}.")
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    size = feature_size(k, padded=True)
    enlarge = padded_enlargement(k)
    track, intensity = interest_track(segments, seed)
    entries = []
    for t in range(segments):
        clip = synth_erp_clip(seed + t, frames, height, track[t].rotated(-0.5 * frames), 0.7 * intensity[t])
        glimpses = []
        for index, g in enumerate(glimpse_grid()):
            row, col = divmod(index, len(LONGITUDE_TIERS))
            nfov = extract_nfov_clip(clip, g, NFOV_WIDTH, NFOV_HEIGHT, enlarge)
            path = root / "features" / f"{t:05d}_{row}_{col}.cvst"
            write_tensor(extractor(nfov, size), path)
            glimpses.append(GlimpseFeatures(g.center, path))
        entries.append(SegmentEntry(t * frames, (t + 1) * frames, glimpses))
    manifest = VideoManifest(video_id, entries)
    save_manifest(manifest, manifest_path)
    _features_logger.info(
        "Wrote %d segments of %d channel features rendered from panoramas to %s.", segments, extractor.channels, root
    )
    return SyntheticVideo(manifest, track, intensity)
