#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
CLI for the cvshl tool.
"""

import json
import logging
import sys
from dataclasses import fields
from typing import Any, Callable

from .._config import PipelineConfig
from .._errors import CvshlError, InfeasibleTrajectoryError
from .._features import feature_size, synth_ground_truth, synth_panorama_video, synth_video
from .._geometry import Viewpoint
from .._io import (
    encode_params,
    ground_truth_document,
    history_csv,
    load_ground_truth,
    load_manifest,
    load_plan,
    load_sphere_map,
    load_sphere_maps,
    load_triplets,
    plan_document,
    read_json,
    read_params,
    read_pnm,
    save_sphere_maps,
    save_triplets,
    write_bytes_atomically,
    write_json,
    write_pnm,
)
from .._metrics import format_cost_table
from .._pipeline import cost_table, evaluate_plan, nfov_image, plan_video, score_video, train_decoder
from .._ranking import synth_triplets, triplet_accuracy
from .._scoremap import render_heatmap
from ._parser import __script_name__, make_parser

_cli_logger = logging.getLogger(__script_name__)

EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


def configure_logging(verbose: int | None, quiet: bool) -> None:
    """
    INFO by default, DEBUG with ``-v`` and ERROR with ``--quiet``. The stream handler is attached once.
    """
    if not any(getattr(handler, "_cvshl", False) for handler in _cli_logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(name)s - %(message)s"))
        setattr(handler, "_cvshl", True)
        _cli_logger.addHandler(handler)
    if quiet:
        logging.Logger.setLevel(_cli_logger, logging.ERROR)
    elif verbose:
        logging.Logger.setLevel(_cli_logger, logging.DEBUG)
    else:
        logging.Logger.setLevel(_cli_logger, logging.INFO)


def make_config(args: Any) -> PipelineConfig:
    """
    Merge the config file named by ``--config`` with the flags given on the command line and validate the result.
    """
    document = read_json(args.config, "config file") if args.config is not None else None
    overrides = {
        f.name: getattr(args, f.name) for f in fields(PipelineConfig) if f.name != "workspace" and hasattr(args, f.name)
    }
    return PipelineConfig.from_sources(document, overrides, args.workspace).validate()


# +------------------------------------------------------------------------------------------------------------------+
# | COMMANDS
# +------------------------------------------------------------------------------------------------------------------+


def cmd_synth(args: Any, config: PipelineConfig) -> int:
    channels = config.feature_channels()
    manifest = config.resolve(config.manifest)
    if args.panoramas:
        video = synth_panorama_video(
            manifest, config.feature_extractor(), args.segments, config.seed, config.k, height=args.panorama_height
        )
    else:
        video = synth_video(manifest, args.segments, config.seed, channels, config.k, args.noise)
    triplets = synth_triplets(
        config.seed, args.triplet_count, (feature_size(config.k),) * 2 + (channels,), noise=args.noise
    )
    save_triplets(triplets, config.resolve(config.triplets))
    gt = synth_ground_truth(video, args.annotators, min(config.highlight_count, args.segments), seed=config.seed)
    write_json(config.resolve(config.ground_truth), ground_truth_document(gt))
    _cli_logger.info(
        "Wrote %d segments, %d triplets and %d annotators under %s.",
        args.segments,
        len(triplets),
        args.annotators,
        config.workspace,
    )
    return 0


def cmd_train(args: Any, config: PipelineConfig) -> int:
    triplets = load_triplets(config.resolve(config.triplets), args.no_schema_validation)
    result = train_decoder(triplets, config)
    write_bytes_atomically(config.resolve(config.params), encode_params(result.params))
    write_bytes_atomically(config.resolve(config.history), history_csv(result.history).encode("utf-8"))
    _cli_logger.info(
        "Trained %d epochs; final mean loss %s, training triplet accuracy %.3f.",
        len(result.history),
        result.losses[-1] if result.losses else "-",
        triplet_accuracy(result.params, triplets, config.h),
    )
    return 0


def cmd_score(args: Any, config: PipelineConfig) -> int:
    params = read_params(config.resolve(config.params))
    if params.k != config.k:
        _cli_logger.error("Decoder parameters produce k=%d maps but k=%d is configured.", params.k, config.k)
        return EXIT_ERROR
    manifest = load_manifest(config.resolve(config.manifest), no_schema_validation=args.no_schema_validation)
    maps = score_video(manifest, params)
    index = save_sphere_maps(manifest.video_id, maps, config.resolve(config.maps))
    _cli_logger.info("Wrote %d sphere maps indexed by %s.", len(maps), index)
    return 0


def cmd_plan(args: Any, config: PipelineConfig) -> int:
    video_id, maps = load_sphere_maps(config.resolve(config.maps), args.no_schema_validation)
    trajectory, highlights = plan_video(
        maps, config.scales, config.h, config.motion_limit, config.highlight_count, greedy=args.greedy
    )
    limit = None if args.greedy else config.motion_limit
    write_json(config.resolve(config.plan), plan_document(video_id, trajectory, highlights, limit))
    for entry in highlights.entries:
        _cli_logger.info(
            "Highlight: segment %d at (%.2f, %.2f), %.1f deg, score %.4f.",
            entry.segment,
            entry.window.center.theta,
            entry.window.center.phi,
            entry.window.hfov_scale,
            entry.window.score,
        )
    return 0


def cmd_eval(args: Any, config: PipelineConfig) -> int:
    plan = load_plan(config.resolve(config.plan), args.no_schema_validation)
    gt = load_ground_truth(config.resolve(config.ground_truth), args.no_schema_validation)
    report = evaluate_plan(plan, gt, config)
    output = config.resolve(config.report)
    if output.suffix == ".csv":
        write_bytes_atomically(output, report.as_csv().encode("utf-8"))
    else:
        write_json(output, report.as_json())
    print(json.dumps(report.as_json()["metrics"], indent=2))
    return 0


def cmd_cost(args: Any, config: PipelineConfig) -> int:
    reports = cost_table(args.grid or ["cvs", "dense"], config, args.time, args.segments, args.erp_width)
    print(format_cost_table(reports), end="")
    return 0


def cmd_heatmap(args: Any, config: PipelineConfig) -> int:
    sphere_map = load_sphere_map(config.resolve(args.map), args.no_schema_validation)
    image = render_heatmap(sphere_map, args.width, args.height, config.h, args.scale)
    write_pnm(image, config.resolve(args.output))
    _cli_logger.info("Wrote a %dx%d heatmap to %s.", args.width, args.height, config.resolve(args.output))
    return 0


def cmd_nfov(args: Any, config: PipelineConfig) -> int:
    image = read_pnm(config.resolve(args.image))
    still = nfov_image(image, Viewpoint(args.theta, args.phi), args.hfov, args.width, args.height, args.enlarge)
    write_pnm(still, config.resolve(args.output))
    return 0


COMMANDS: dict[str, Callable[[Any, PipelineConfig], int]] = {
    "synth": cmd_synth,
    "train": cmd_train,
    "score": cmd_score,
    "plan": cmd_plan,
    "eval": cmd_eval,
    "cost": cmd_cost,
    "heatmap": cmd_heatmap,
    "nfov": cmd_nfov,
}


def cli_main(args: Any | None = None) -> int:
    """
    Run one cvshl command. Returns 0 on success, 1 for invalid input or data and 2 when no trajectory satisfies the
    motion limit.
    """
    if args is None:
        args = sys.argv[1:]

    args = make_parser().parse_args(args)
    configure_logging(args.verbose, args.quiet)

    try:
        config = make_config(args)
        return COMMANDS[args.command](args, config)
    except InfeasibleTrajectoryError as e:
        _cli_logger.error("No feasible trajectory between segments %d and %d: %s", *e.boundary, e)
        return EXIT_INFEASIBLE
    except CvshlError as e:
        _cli_logger.error("%s", e)
        return EXIT_ERROR
