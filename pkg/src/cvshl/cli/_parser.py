#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Argparse parser for the cvshl tool.
"""

import argparse
import textwrap
from pathlib import Path

__script_name__ = "cvshl"


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got '{text}'") from e


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """
    Flags that override :class:`cvshl.PipelineConfig` fields. Defaults are suppressed so only flags actually given
    override the config file.
    """
    group = parser.add_argument_group("pipeline configuration (overrides --config)")
    group.add_argument("--k", type=int, default=argparse.SUPPRESS, help="Score map grid size. Default: 5.")
    group.add_argument(
        "--h", type=float, default=argparse.SUPPRESS, help="Gaussian position pooling bandwidth. Default: 1.0."
    )
    group.add_argument(
        "--scales",
        type=_float_list,
        default=argparse.SUPPRESS,
        help="Comma separated window scales in degrees, each in [60, 110]. Default: 65.5,90,110.",
    )
    group.add_argument("--alpha", type=float, default=argparse.SUPPRESS, help="Triplet margin. Default: 0.3.")
    group.add_argument("--lam", type=float, default=argparse.SUPPRESS, help="L2 weight decay. Default: 1e-4.")
    group.add_argument("--lr", type=float, default=argparse.SUPPRESS, help="Initial learning rate. Default: 1e-3.")
    group.add_argument(
        "--lr-halve-every", type=int, default=argparse.SUPPRESS, help="Halve the learning rate every N epochs."
    )
    group.add_argument("--batch-size", type=int, default=argparse.SUPPRESS, help="Triplets per SGD step.")
    group.add_argument("--epochs", type=int, default=argparse.SUPPRESS, help="Training epochs. Default: 50.")
    group.add_argument(
        "--loss", choices=["triplet", "pairwise"], default=argparse.SUPPRESS, help="Ranking loss to train with."
    )
    group.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Seed of all randomness. Default: 0.")
    group.add_argument(
        "--widths", choices=["desk", "full"], default=argparse.SUPPRESS, help="Decoder width preset."
    )
    group.add_argument(
        "--in-channels", type=int, default=argparse.SUPPRESS, help="Feature channels. Default: from --widths."
    )
    group.add_argument(
        "--features",
        choices=["motion", "frame", "fusion"],
        default=argparse.SUPPRESS,
        help="Feature family extracted from NFOV clips. Fusion stacks motion over frame features. Default: fusion.",
    )
    group.add_argument(
        "--motion-limit",
        type=float,
        default=argparse.SUPPRESS,
        help="Per-axis bound on view motion between segments, in degrees. Default: 30.",
    )
    group.add_argument(
        "--highlight-count", "-n", type=int, default=argparse.SUPPRESS, help="Highlights to select. Default: 5."
    )
    group.add_argument(
        "--map-threshold",
        type=float,
        default=argparse.SUPPRESS,
        help="Angular distance in degrees under which a highlight matches an annotation. Default: 45.",
    )
    group.add_argument(
        "--overlap-samples",
        type=int,
        default=argparse.SUPPRESS,
        help="Monte Carlo samples of the overlap metric. Default: 100000.",
    )


def _path_argument(parser: argparse.ArgumentParser, name: str, help_text: str) -> None:
    parser.add_argument(f"--{name}", type=Path, default=argparse.SUPPRESS, help=help_text)


def make_parser() -> argparse.ArgumentParser:
    """
    Define and parse the command line arguments.
    """

    from cvshl.version import __version__ as cvshl_version  # pylint: disable=import-outside-toplevel

    parser = argparse.ArgumentParser(
        prog=__script_name__,
        formatter_class=argparse.RawTextHelpFormatter,
        description=textwrap.dedent(
            """
            Score views of 360 degree videos and plan highlight trajectories.

            A typical run on synthetic data:

                cvshl synth                  # video features, triplets and ground truth
                cvshl train                  # fit the score map decoder
                cvshl score                  # stitched sphere score maps per segment
                cvshl plan -n 3              # smooth trajectory and top-3 highlights
                cvshl eval                   # cosine, overlap and mAP against ground truth

            Settings come from a JSON config file ('version': 1) overridden by flags of the same name. Relative
            paths resolve against the workspace (--workspace or the CVSHL_WORKSPACE environment variable).

    """
        ).lstrip(),
        epilog=textwrap.dedent(
            f"""

        Version: {cvshl_version}

    """
        ),
    )

    parser.add_argument(
        "--version",
        action="version",
        version=cvshl_version,
        help="Print the version of the script and exit.",
    )

    parser.add_argument("--verbose", "-v", action="count", help="Print verbose output.")

    parser.add_argument("--quiet", "-q", action="store_true", help="Only print errors.")

    parser.add_argument(
        "--workspace",
        type=Path,
        default=None,
        help="Root that relative paths resolve against. Default: $CVSHL_WORKSPACE or the current directory.",
    )

    parser.add_argument("--config", type=Path, default=None, help="A JSON pipeline configuration file.")

    parser.add_argument("--no-schema-validation", action="store_true", help="Skip schema validation.")

    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    synth = commands.add_parser("synth", help="Write a synthetic video manifest, triplet set and ground truth.")
    _add_config_arguments(synth)
    _path_argument(synth, "manifest", "Video manifest to write.")
    _path_argument(synth, "triplets", "Triplet manifest to write.")
    _path_argument(synth, "ground-truth", "Ground truth to write.")
    synth.add_argument("--segments", type=int, default=12, help="Five second segments in the video.")
    synth.add_argument("--triplet-count", type=int, default=500, help="Training triplets to generate.")
    synth.add_argument("--noise", type=float, default=1.0, help="Noise level of the synthetic features.")
    synth.add_argument("--annotators", type=int, default=3, help="Annotators in the ground truth.")
    synth.add_argument(
        "--panoramas",
        action="store_true",
        help="Extract the video features from rendered panoramas with the configured feature family.",
    )
    synth.add_argument("--panorama-height", type=int, default=180, help="Height of the rendered panoramas.")

    train = commands.add_parser("train", help="Train the score map decoder on a triplet manifest.")
    _add_config_arguments(train)
    _path_argument(train, "triplets", "Triplet manifest to train on.")
    _path_argument(train, "params", "Decoder parameter file to write.")
    _path_argument(train, "history", "CSV file receiving the per-epoch loss.")

    score = commands.add_parser("score", help="Stitch a sphere score map for every segment of a video.")
    _add_config_arguments(score)
    _path_argument(score, "manifest", "Video manifest to score.")
    _path_argument(score, "params", "Decoder parameters.")
    _path_argument(score, "maps", "Directory receiving the sphere maps and their index.")

    plan = commands.add_parser("plan", help="Plan a smooth trajectory and select highlights.")
    _add_config_arguments(plan)
    _path_argument(plan, "maps", "Directory of sphere maps written by 'score'.")
    _path_argument(plan, "plan", "Plan JSON to write.")
    plan.add_argument(
        "--greedy", action="store_true", help="Pick the best view of every segment, ignoring the motion limit."
    )

    evaluate = commands.add_parser("eval", help="Compare a plan with ground truth annotations.")
    _add_config_arguments(evaluate)
    _path_argument(evaluate, "plan", "Plan JSON to evaluate.")
    _path_argument(evaluate, "ground-truth", "Ground truth JSON.")
    _path_argument(evaluate, "report", "Metric report to write (.json or .csv).")

    cost = commands.add_parser(
        "cost",
        formatter_class=argparse.RawTextHelpFormatter,
        help="Compare projection counts, areas and timings of glimpse grids.",
        description=textwrap.dedent(
            """
            Grids are names ('cvs', 'dense') or descriptions such as

                grid(lon=0:340:20, lat=-75:75:15, hfov=90)
                grid(lon=[0, 90, 180, 270], lat=[67.5, 0, -67.5], hfov=90, enlarge=0.2)

    """
        ).lstrip(),
    )
    _add_config_arguments(cost)
    cost.add_argument("--grid", action="append", default=None, help="A grid to report. Default: cvs and dense.")
    cost.add_argument(
        "--time", action="store_true", help="Time every grid through the full scoring path on a synthetic clip."
    )
    cost.add_argument("--segments", type=int, default=1, help="Synthetic segments timed per grid.")
    cost.add_argument("--erp-width", type=int, default=720, help="Width of the ERP raster of the pixel model.")

    heatmap = commands.add_parser("heatmap", help="Render a sphere map as an ERP heatmap (PGM).")
    _add_config_arguments(heatmap)
    heatmap.add_argument("map", type=Path, help="A sphere map tensor written by 'score'.")
    heatmap.add_argument("--output", "-o", type=Path, default=Path("heatmap.pgm"), help="Image to write.")
    heatmap.add_argument("--width", type=int, default=360, help="Image width in pixels.")
    heatmap.add_argument("--height", type=int, default=180, help="Image height in pixels.")
    heatmap.add_argument("--scale", type=float, default=90.0, help="Window scale scoring every cell.")

    nfov = commands.add_parser("nfov", help="Render an NFOV still from an ERP image (PPM or PGM).")
    _add_config_arguments(nfov)
    nfov.add_argument("image", type=Path, help="An equirectangular PPM or PGM image.")
    nfov.add_argument("--theta", type=float, default=0.0, help="Latitude of the view centre in degrees.")
    nfov.add_argument("--phi", type=float, default=0.0, help="Longitude of the view centre in degrees.")
    nfov.add_argument("--hfov", type=float, default=90.0, help="Horizontal field of view in degrees.")
    nfov.add_argument("--width", type=int, default=640, help="Output width in pixels.")
    nfov.add_argument("--height", type=int, default=480, help="Output height in pixels.")
    nfov.add_argument("--enlarge", type=float, default=0.0, help="Fractional enlargement of the view.")
    nfov.add_argument("--output", "-o", type=Path, default=Path("nfov.ppm"), help="Image to write.")

    return parser
