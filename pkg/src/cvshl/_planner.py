#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Per-segment view selection under a smooth-motion bound and top-N highlight selection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from ._errors import InfeasibleTrajectoryError, PlannerError
from ._geometry import wrap_delta
from ._scoremap import WindowCandidate
from .cli._parser import __script_name__

_planner_logger = logging.getLogger(__script_name__)

DEFAULT_MOTION_LIMIT = 30.0
_MOTION_SLACK = 1e-9


@dataclass
class SegmentCandidates:
    """
    The scored views of one segment, in scan order.
    """

    segment: int
    candidates: list[WindowCandidate]

    def __post_init__(self) -> None:
        if not self.candidates:
            raise PlannerError(f"Segment {self.segment} has no candidates.")
        if not all(np.isfinite(c.score) for c in self.candidates):
            raise PlannerError(f"Segment {self.segment} has non-finite candidate scores.")


@dataclass
class TrajectoryEntry:
    segment: int
    window: WindowCandidate

    def as_json(self, rank: int | None = None) -> dict[str, Any]:
        return {
            "segment": self.segment,
            "theta": self.window.center.theta,
            "phi": self.window.center.phi,
            "scale": self.window.hfov_scale,
            "score": self.window.score,
            "rank": rank,
        }


@dataclass
class Trajectory:
    """
    One chosen view per segment.
    """

    entries: list[TrajectoryEntry]

    @property
    def total(self) -> float:
        return float(sum(entry.window.score for entry in self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def as_json(self) -> list[dict[str, Any]]:
        return [entry.as_json() for entry in self.entries]


def within_motion_limit(a: WindowCandidate, b: WindowCandidate, motion_limit: float = DEFAULT_MOTION_LIMIT) -> bool:
    """
    True if both the latitude change and the wrapped longitude change between two views are at most
    ``motion_limit`` degrees.

    .. invisible-code-block: python

        from cvshl import Viewpoint, WindowCandidate, within_motion_limit

    >>> within_motion_limit(WindowCandidate(Viewpoint(0, 350), 90.0), WindowCandidate(Viewpoint(10, 15), 90.0))
    True
    """
    dtheta = abs(a.center.theta - b.center.theta)
    dphi = abs(float(wrap_delta(a.center.phi - b.center.phi)))
    return dtheta <= motion_limit + _MOTION_SLACK and dphi <= motion_limit + _MOTION_SLACK


def _transition_mask(
    previous: Sequence[WindowCandidate], current: Sequence[WindowCandidate], limit: float
) -> np.ndarray:
    theta_prev = np.array([c.center.theta for c in previous])
    phi_prev = np.array([c.center.phi for c in previous])
    theta_cur = np.array([c.center.theta for c in current])
    phi_cur = np.array([c.center.phi for c in current])
    dtheta = np.abs(theta_cur[:, np.newaxis] - theta_prev[np.newaxis, :])
    dphi = np.abs(wrap_delta(phi_cur[:, np.newaxis] - phi_prev[np.newaxis, :]))
    return (dtheta <= limit + _MOTION_SLACK) & (dphi <= limit + _MOTION_SLACK)


def stitch_trajectory(
    segments: Sequence[SegmentCandidates], motion_limit: float = DEFAULT_MOTION_LIMIT
) -> Trajectory:
    """
    Choose one candidate per segment maximising the total score subject to the motion bound between consecutive
    segments. Among equal totals the candidate earliest in scan order wins, both within a segment and for the
    predecessor link.

    :param segments: Candidates of consecutive segments.
    :param motion_limit: Per-axis bound in degrees.
    :return: The optimal trajectory.
    :raises InfeasibleTrajectoryError: if no candidate of a segment can follow any reachable candidate of the
        previous one. The error names the ``(previous, next)`` segment boundary.
    """
    if not segments:
        raise PlannerError("No segments to plan.")
    if motion_limit < 0.0:
        raise PlannerError(f"Motion limit must be non-negative, got {motion_limit}.")
    best = np.array([c.score for c in segments[0].candidates], dtype=np.float64)
    back: list[np.ndarray] = []
    for previous, current in zip(segments, segments[1:]):
        mask = _transition_mask(previous.candidates, current.candidates, motion_limit)
        linked = np.where(mask, best[np.newaxis, :], -np.inf)
        # argmax returns the first maximum: lowest predecessor index on ties
        predecessor = np.argmax(linked, axis=1)
        reach = linked[np.arange(len(current.candidates)), predecessor]
        if not np.any(np.isfinite(reach)):
            raise InfeasibleTrajectoryError(
                f"No candidate of segment {current.segment} is within {motion_limit} degrees of a reachable "
                f"candidate of segment {previous.segment}.",
                (previous.segment, current.segment),
            )
        best = reach + np.array([c.score for c in current.candidates])
        back.append(predecessor)
    choice = int(np.argmax(best))
    chosen = [choice]
    for predecessor in reversed(back):
        choice = int(predecessor[choice])
        chosen.append(choice)
    chosen.reverse()
    trajectory = Trajectory(
        [TrajectoryEntry(s.segment, s.candidates[index]) for s, index in zip(segments, chosen)]
    )
    _planner_logger.debug("Stitched %d segments, total score %f.", len(segments), trajectory.total)
    return trajectory


def greedy_trajectory(
    segments: Sequence[SegmentCandidates], motion_limit: float | None = None
) -> Trajectory:
    """
    The best candidate of every segment, ignoring the motion bound. ``motion_limit`` is accepted for interface
    symmetry with :func:`stitch_trajectory`; violations are only logged.
    """
    if not segments:
        raise PlannerError("No segments to plan.")
    entries = []
    for s in segments:
        scores = np.array([c.score for c in s.candidates])
        entries.append(TrajectoryEntry(s.segment, s.candidates[int(np.argmax(scores))]))
    if motion_limit is not None:
        for a, b in zip(entries, entries[1:]):
            if not within_motion_limit(a.window, b.window, motion_limit):
                _planner_logger.debug("Greedy step %d -> %d exceeds %s degrees.", a.segment, b.segment, motion_limit)
    return Trajectory(entries)


@dataclass
class Highlight:
    """
    The top-N entries of a trajectory in rank order.
    """

    entries: list[TrajectoryEntry]

    def as_json(self) -> list[dict[str, Any]]:
        return [entry.as_json(rank) for rank, entry in enumerate(self.entries, start=1)]


def select_highlights(trajectory: Trajectory, n: int) -> Highlight:
    """
    The ``n`` highest scoring trajectory entries, best first; equal scores go to the earlier segment.

    :raises PlannerError: if ``n`` exceeds the trajectory length or is negative.
    """
    if n < 0 or n > len(trajectory):
        raise PlannerError(f"Cannot select {n} highlights from a trajectory of {len(trajectory)} segments.")
    ranked = sorted(trajectory.entries, key=lambda entry: (-entry.window.score, entry.segment))
    return Highlight(ranked[:n])
