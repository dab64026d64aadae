#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Structured errors for the cvshl package.
"""

from __future__ import annotations

from pathlib import Path


class CvshlError(Exception):
    """
    Base class for every error raised on purpose by cvshl.
    """

    def __init__(self, message: str):
        super().__init__(message)


class GeometryError(CvshlError, ValueError):
    """
    Raised for invalid viewpoints, glimpses or projections outside their domain.
    """


class ScoreMapError(CvshlError, ValueError):
    """
    Raised when a score map has the wrong shape or a stitch set is incomplete.
    """


class DecoderError(CvshlError, ValueError):
    """
    Raised when decoder parameters and inputs disagree.
    """


class StaleCacheError(DecoderError):
    """
    Raised when a backward pass is given a cache that does not belong to the current parameters.
    """


class TrainingError(CvshlError, RuntimeError):
    """
    Raised when training cannot continue (for example a non-finite loss).
    """


class PlannerError(CvshlError, ValueError):
    """
    Raised for malformed planner inputs.
    """


class InfeasibleTrajectoryError(PlannerError):
    """
    Raised when no chain of candidates satisfies the motion bound.
    """

    def __init__(self, message: str, boundary: tuple[int, int]):
        super().__init__(message)
        self.boundary = boundary


class MetricError(CvshlError, ValueError):
    """
    Raised when predictions and ground truth cannot be compared.
    """


class ConfigError(CvshlError, ValueError):
    """
    Raised when a configuration value violates a precondition.
    """


class GridSpecError(CvshlError, ValueError):
    """
    Raised when a glimpse grid specification fails to parse.
    """


class _FileError(CvshlError, ValueError):
    """
    An error tied to a location in a file.
    """

    def __init__(self, message: str, path: Path | str | None = None, offset: int | None = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if offset is not None:
                location += f" @ byte {offset}"
            location += ": "
        super().__init__(f"{location}{message}")
        self.path = None if path is None else Path(path)
        self.offset = offset


class TensorFormatError(_FileError):
    """
    Raised when a tensor or parameter container is corrupt, truncated or of the wrong dtype.
    """


class ManifestError(_FileError):
    """
    Raised when a manifest is malformed or references missing data.
    """


class SegmentError(CvshlError):
    """
    Wraps an error raised while processing one segment of a video, naming the segment.
    """

    def __init__(self, segment: int, cause: CvshlError):
        super().__init__(f"Segment {segment}: {cause}")
        self.segment = segment
        self.cause = cause
