#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Scores every view of a 360 degree video at once and plans where a virtual camera should look. Per-glimpse score maps
decoded from video features are stitched into one map over the sphere, a sliding window search finds the best views
of every segment, and a dynamic program links them into a smooth trajectory from which highlights are selected.
"""
# isort: skip_file

# + ------------------------------------------------------------------------------------------------------------------+
# | LIBRARY EXPORTS                                                                                                   |
# + ------------------------------------------------------------------------------------------------------------------+

from .cli import cli_main
from ._errors import CvshlError
from ._errors import GeometryError
from ._errors import ScoreMapError
from ._errors import DecoderError
from ._errors import StaleCacheError
from ._errors import TrainingError
from ._errors import PlannerError
from ._errors import InfeasibleTrajectoryError
from ._errors import MetricError
from ._errors import ConfigError
from ._errors import GridSpecError
from ._errors import TensorFormatError
from ._errors import ManifestError
from ._errors import SegmentError
from ._geometry import Viewpoint
from ._geometry import ErpFrame
from ._geometry import Glimpse
from ._geometry import AreaEstimate
from ._geometry import LATITUDE_TIERS
from ._geometry import LONGITUDE_TIERS
from ._geometry import wrap_longitude
from ._geometry import wrap_delta
from ._geometry import unit_vectors
from ._geometry import from_unit_vectors
from ._geometry import angular_distance
from ._geometry import angular_distances
from ._geometry import erp_angular
from ._geometry import erp_project
from ._geometry import erp_unproject
from ._geometry import gnomonic_forward
from ._geometry import gnomonic_inverse
from ._geometry import glimpse_grid
from ._geometry import nfov_sampling_grid
from ._geometry import extract_nfov
from ._geometry import extract_nfov_clip
from ._geometry import sphere_samples
from ._geometry import monte_carlo_area
from ._geometry import solid_angle
from ._geometry import analytic_solid_angle
from ._geometry import tangent_plane_area
from ._geometry import erp_footprint_fraction
from ._scoremap import DEFAULT_SCALES
from ._scoremap import PositionScoreMap
from ._scoremap import PaddedScoreMap
from ._scoremap import SphereScoreMap
from ._scoremap import WindowCandidate
from ._scoremap import gaussian_kernel
from ._scoremap import pooling_weights
from ._scoremap import position_pool
from ._scoremap import position_pool_batch
from ._scoremap import pad_strip
from ._scoremap import embed
from ._scoremap import stitch_sphere_map
from ._scoremap import window_gather
from ._scoremap import scan_set
from ._scoremap import score_windows
from ._scoremap import sliding_window_search
from ._scoremap import render_heatmap
from ._decoder import DecoderParams
from ._decoder import WIDTH_PRESETS
from ._decoder import resolve_widths
from ._decoder import init_params
from ._decoder import decoder_forward
from ._decoder import decoder_backward
from ._decoder import estimate_population_stats
from ._decoder import decode_score_map
from ._decoder import decode_batch
from ._ranking import Triplet
from ._ranking import TrainConfig
from ._ranking import TrainResult
from ._ranking import EpochRecord
from ._ranking import triplet_loss
from ._ranking import pairwise_loss
from ._ranking import total_objective
from ._ranking import planted_directions
from ._ranking import synth_triplets
from ._ranking import train
from ._ranking import triplet_accuracy
from ._planner import SegmentCandidates
from ._planner import TrajectoryEntry
from ._planner import Trajectory
from ._planner import Highlight
from ._planner import within_motion_limit
from ._planner import stitch_trajectory
from ._planner import greedy_trajectory
from ._planner import select_highlights
from ._metrics import HighlightMark
from ._metrics import GroundTruth
from ._metrics import MetricReport
from ._metrics import CostReport
from ._metrics import frame_cosine_similarity
from ._metrics import frame_overlap
from ._metrics import trajectory_metrics
from ._metrics import average_precision
from ._metrics import mean_average_precision
from ._metrics import evaluate
from ._metrics import cost_report
from ._metrics import format_cost_table
from ._io import VideoManifest
from ._io import SegmentEntry
from ._io import GlimpseFeatures
from ._io import LoadedPlan
from ._io import read_tensor
from ._io import write_tensor
from ._io import read_params
from ._io import write_params
from ._io import load_manifest
from ._io import save_manifest
from ._io import load_triplets
from ._io import save_triplets
from ._io import load_plan
from ._io import load_ground_truth
from ._io import load_sphere_map
from ._io import load_sphere_maps
from ._io import save_sphere_maps
from ._io import read_pnm
from ._io import write_pnm
from ._gridspec import GridSpec
from ._gridspec import NAMED_GRIDS
from ._gridspec import parse_grid
from ._config import PipelineConfig
from ._features import FEATURE_FAMILIES
from ._features import FeatureExtractor
from ._features import FeatureFamily
from ._features import PixelStatisticsExtractor
from ._features import SyntheticVideo
from ._features import family_layout
from ._features import feature_size
from ._features import frame_statistics
from ._features import motion_statistics
from ._features import synth_video
from ._features import synth_ground_truth
from ._features import synth_erp_clip
from ._features import synth_panorama_video
from ._pipeline import StageTimer
from ._pipeline import score_video
from ._pipeline import plan_video
from ._pipeline import train_decoder
from ._pipeline import evaluate_plan
from ._pipeline import time_grid
from ._pipeline import cost_table

__all__ = [
    "AreaEstimate",
    "ConfigError",
    "CostReport",
    "CvshlError",
    "DEFAULT_SCALES",
    "DecoderError",
    "DecoderParams",
    "EpochRecord",
    "ErpFrame",
    "FEATURE_FAMILIES",
    "FeatureExtractor",
    "FeatureFamily",
    "GeometryError",
    "Glimpse",
    "GlimpseFeatures",
    "GridSpec",
    "GridSpecError",
    "GroundTruth",
    "Highlight",
    "HighlightMark",
    "InfeasibleTrajectoryError",
    "LATITUDE_TIERS",
    "LONGITUDE_TIERS",
    "LoadedPlan",
    "ManifestError",
    "MetricError",
    "MetricReport",
    "NAMED_GRIDS",
    "PaddedScoreMap",
    "PipelineConfig",
    "PixelStatisticsExtractor",
    "PlannerError",
    "PositionScoreMap",
    "ScoreMapError",
    "SegmentCandidates",
    "SegmentEntry",
    "SegmentError",
    "SphereScoreMap",
    "StageTimer",
    "StaleCacheError",
    "SyntheticVideo",
    "TensorFormatError",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "Trajectory",
    "TrajectoryEntry",
    "Triplet",
    "VideoManifest",
    "Viewpoint",
    "WIDTH_PRESETS",
    "WindowCandidate",
    "analytic_solid_angle",
    "angular_distance",
    "angular_distances",
    "average_precision",
    "cli_main",
    "cost_report",
    "cost_table",
    "decode_batch",
    "decode_score_map",
    "decoder_backward",
    "decoder_forward",
    "embed",
    "erp_angular",
    "erp_footprint_fraction",
    "erp_project",
    "erp_unproject",
    "estimate_population_stats",
    "evaluate",
    "evaluate_plan",
    "extract_nfov",
    "extract_nfov_clip",
    "family_layout",
    "feature_size",
    "format_cost_table",
    "frame_cosine_similarity",
    "frame_overlap",
    "frame_statistics",
    "from_unit_vectors",
    "gaussian_kernel",
    "glimpse_grid",
    "gnomonic_forward",
    "gnomonic_inverse",
    "greedy_trajectory",
    "init_params",
    "load_ground_truth",
    "load_manifest",
    "load_plan",
    "load_sphere_map",
    "load_sphere_maps",
    "load_triplets",
    "mean_average_precision",
    "monte_carlo_area",
    "motion_statistics",
    "nfov_sampling_grid",
    "pad_strip",
    "pairwise_loss",
    "parse_grid",
    "plan_video",
    "planted_directions",
    "pooling_weights",
    "position_pool",
    "position_pool_batch",
    "read_params",
    "read_pnm",
    "read_tensor",
    "render_heatmap",
    "resolve_widths",
    "save_manifest",
    "save_sphere_maps",
    "save_triplets",
    "scan_set",
    "score_video",
    "score_windows",
    "select_highlights",
    "sliding_window_search",
    "solid_angle",
    "sphere_samples",
    "stitch_sphere_map",
    "stitch_trajectory",
    "synth_erp_clip",
    "synth_ground_truth",
    "synth_panorama_video",
    "synth_triplets",
    "synth_video",
    "tangent_plane_area",
    "time_grid",
    "total_objective",
    "train",
    "train_decoder",
    "trajectory_metrics",
    "triplet_accuracy",
    "triplet_loss",
    "unit_vectors",
    "window_gather",
    "within_motion_limit",
    "wrap_delta",
    "wrap_longitude",
    "write_params",
    "write_pnm",
    "write_tensor",
]

# + ------------------------------------------------------------------------------------------------------------------+
