#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Position score maps, Gaussian position pooling, padded stitching into a sphere score map and sliding window search.

A position score map for grid size ``k`` is a ``k x k x k^2`` tensor. Channel ``k*l + m`` at spatial cell ``(i, j)``
holds the evidence that cell ``(i, j)`` plays the role of grid position ``(l, m)`` in a well composed view. Pooling
weighs that evidence by the Gaussian proximity of the two positions:

.. invisible-code-block: python

    import numpy as np
    from cvshl import PositionScoreMap, position_pool

.. code-block:: python

    scores = np.zeros((3, 3, 9))
    scores[1, 1, 4] = 1.0  # centre cell voting for the centre position
    assert position_pool(PositionScoreMap(scores), h=1.0) == position_pool(scores, h=1.0)

"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from ._errors import ScoreMapError
from ._geometry import (
    DEFAULT_ASPECT,
    DEFAULT_HFOV,
    LATITUDE_TIERS,
    LONGITUDE_TIERS,
    Glimpse,
    Viewpoint,
    angular_distances,
    from_unit_vectors,
    gnomonic_inverse_vectors,
    nfov_sampling_grid,
    unit_vectors,
)
from .cli._parser import __script_name__

_scoremap_logger = logging.getLogger(__script_name__)

DEFAULT_K = 5
DEFAULT_BANDWIDTH = 1.0
DEFAULT_SCALES: tuple[float, ...] = (65.5, 90.0, 110.0)
MIN_SCALE = 60.0
MAX_SCALE = 110.0
# cells closer to a bin than the nearest plus this many degrees are tied for it
NEAREST_CELL_TIE = 1e-9


def gaussian_kernel(u: float | np.ndarray, h: float = DEFAULT_BANDWIDTH) -> float | np.ndarray:
    """
    Gaussian pooling kernel ``exp(-u^2 / 2h^2) / (sqrt(2 pi) h)``.

    .. invisible-code-block: python

        from cvshl import gaussian_kernel

    >>> round(gaussian_kernel(0.0, 1.0), 6)
    0.398942
    >>> round(gaussian_kernel(1.0, 1.0), 6)
    0.241971

    :raises ScoreMapError: if ``h`` is not positive.
    """
    if not h > 0.0:
        raise ScoreMapError(f"Pooling bandwidth must be positive, got {h}.")
    value = np.exp(-np.square(u) / (2.0 * h * h)) / (math.sqrt(2.0 * math.pi) * h)
    return float(value) if np.ndim(value) == 0 else value


# +------------------------------------------------------------------------------------------------------------------+
# | SCORE MAPS
# +------------------------------------------------------------------------------------------------------------------+


def _grid_size(scores: np.ndarray, pad: int) -> int:
    if scores.ndim != 3:
        raise ScoreMapError(f"Score map must be 3D, got shape {scores.shape}.")
    k = scores.shape[0] - pad
    if k < 1 or scores.shape != (k + pad, k + pad, k * k):
        expected = "(k, k, k^2)" if pad == 0 else f"(k+{pad}, k+{pad}, k^2)"
        raise ScoreMapError(f"Score map shape {scores.shape} does not match {expected}.")
    return k


@dataclass
class PositionScoreMap:
    """
    The ``k x k x k^2`` layered score tensor of one glimpse.
    """

    scores: np.ndarray

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        _grid_size(self.scores, 0)
        if not np.all(np.isfinite(self.scores)):
            raise ScoreMapError("Score map contains non-finite values.")

    @property
    def k(self) -> int:
        return int(self.scores.shape[0])


@dataclass
class PaddedScoreMap:
    """
    A score map decoded from an enlarged glimpse: one extra ring of cells around the ``k x k`` centre block.
    """

    scores: np.ndarray

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        _grid_size(self.scores, 2)
        if not np.all(np.isfinite(self.scores)):
            raise ScoreMapError("Padded score map contains non-finite values.")

    @property
    def k(self) -> int:
        return int(self.scores.shape[0]) - 2


@lru_cache(maxsize=64)
def pooling_weights(k: int, h: float) -> np.ndarray:
    """
    Read-only ``(k, k, k^2)`` weights of :func:`position_pool`. Pooling is the sum of their product with a map.
    """
    kappa = gaussian_kernel(np.subtract.outer(np.arange(k), np.arange(k)).astype(np.float64), h)
    # weights[i, j, k*l + m] = kappa(l - i) * kappa(m - j)
    weights = np.einsum("il,jm->ijlm", kappa, kappa).reshape(k, k, k * k)
    weights.setflags(write=False)
    return weights


def position_pool(w: PositionScoreMap | np.ndarray, h: float = DEFAULT_BANDWIDTH) -> float:
    """
    Composition score of a position score map (or a gathered crop of the same shape):
    ``sum_{i,j} sum_{l,m} kappa(l - i) kappa(m - j) w[i, j, k*l + m]``.

    :param w: A ``k x k x k^2`` map.
    :param h: Gaussian bandwidth in grid units.
    :return: The pooled score.
    :raises ScoreMapError: on a shape mismatch or non-positive bandwidth.
    """
    scores = w.scores if isinstance(w, PositionScoreMap) else np.asarray(w, dtype=np.float64)
    _grid_size(scores, 0)
    return float(position_pool_batch(scores[np.newaxis], h)[0])


def position_pool_batch(crops: np.ndarray, h: float = DEFAULT_BANDWIDTH) -> np.ndarray:
    """
    :func:`position_pool` of every map of a ``(N, k, k, k^2)`` stack. Every map is reduced the same way a single map
    is, so the results are bitwise equal to pooling them one at a time.
    """
    crops = np.ascontiguousarray(crops, dtype=np.float64)
    k = crops.shape[1] if crops.ndim == 4 else 0
    if k < 1 or crops.shape[1:] != (k, k, k * k):
        raise ScoreMapError(f"Expected a (N, k, k, k^2) stack of maps, got shape {crops.shape}.")
    if not h > 0.0:
        raise ScoreMapError(f"Pooling bandwidth must be positive, got {h}.")
    return np.sum(crops * pooling_weights(k, float(h)), axis=(1, 2, 3))


def pad_strip(padded: PaddedScoreMap) -> PositionScoreMap:
    """
    Cut the padded ring off a padded score map.

    .. invisible-code-block: python

        import numpy as np
        from cvshl import PaddedScoreMap, pad_strip

    >>> pad_strip(PaddedScoreMap(np.zeros((7, 7, 25)))).scores.shape
    (5, 5, 25)
    """
    return PositionScoreMap(padded.scores[1:-1, 1:-1, :].copy())


def embed(m: PositionScoreMap, border: float = 0.0) -> PaddedScoreMap:
    """
    Surround ``m`` with a one-cell ring filled with ``border``. ``pad_strip(embed(m))`` returns ``m``.
    """
    k = m.k
    padded = np.full((k + 2, k + 2, k * k), float(border))
    padded[1:-1, 1:-1, :] = m.scores
    return PaddedScoreMap(padded)


# +------------------------------------------------------------------------------------------------------------------+
# | SPHERE MAP
# +------------------------------------------------------------------------------------------------------------------+


@lru_cache(maxsize=16)
def _sphere_geometry(k: int, hfov: float, aspect: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Cell centre latitudes, longitudes (both ``(3k, 4k)``) and unit vectors (``(3k * 4k, 3)``) of a stitched grid.
    """
    vectors = np.empty((len(LATITUDE_TIERS) * k, len(LONGITUDE_TIERS) * k, 3))
    for row_band, theta in enumerate(LATITUDE_TIERS):
        for col_band, phi in enumerate(LONGITUDE_TIERS):
            g = Glimpse(Viewpoint(theta, phi), hfov, aspect)
            u, v = nfov_sampling_grid(g, k, k)
            vectors[row_band * k : (row_band + 1) * k, col_band * k : (col_band + 1) * k] = gnomonic_inverse_vectors(
                u, v, g.center
            )
    theta, phi = from_unit_vectors(vectors)
    flat = vectors.reshape(-1, 3)
    for array in (theta, phi, flat):
        array.setflags(write=False)
    return theta, phi, flat


@dataclass
class SphereScoreMap:
    """
    The stitched ``3k x 4k x k^2`` score map of one segment. Row bands follow :data:`LATITUDE_TIERS` north to south,
    column bands follow :data:`LONGITUDE_TIERS`; the column index wraps modulo ``4k``.
    """

    cells: np.ndarray
    hfov: float = DEFAULT_HFOV
    aspect: float = DEFAULT_ASPECT

    def __post_init__(self) -> None:
        self.cells = np.asarray(self.cells, dtype=np.float64)
        if self.cells.ndim != 3:
            raise ScoreMapError(f"Sphere map must be 3D, got shape {self.cells.shape}.")
        k = self.cells.shape[0] // len(LATITUDE_TIERS)
        if k < 1 or self.cells.shape != (len(LATITUDE_TIERS) * k, len(LONGITUDE_TIERS) * k, k * k):
            raise ScoreMapError(f"Sphere map shape {self.cells.shape} does not match (3k, 4k, k^2).")
        if not np.all(np.isfinite(self.cells)):
            raise ScoreMapError("Sphere map contains non-finite values.")

    @property
    def k(self) -> int:
        return int(self.cells.shape[0]) // len(LATITUDE_TIERS)

    @property
    def shape(self) -> tuple[int, int, int]:
        rows, cols, channels = self.cells.shape
        return int(rows), int(cols), int(channels)

    @property
    def cell_theta(self) -> np.ndarray:
        return _sphere_geometry(self.k, float(self.hfov), float(self.aspect))[0]

    @property
    def cell_phi(self) -> np.ndarray:
        return _sphere_geometry(self.k, float(self.hfov), float(self.aspect))[1]

    def cell_center(self, row: int, col: int) -> Viewpoint:
        return Viewpoint(float(self.cell_theta[row, col]), float(self.cell_phi[row, col]))

    def rotated(self, quarter_turns: int) -> SphereScoreMap:
        """
        The same map with its content rotated east by ``quarter_turns`` x 90 degrees.
        """
        return SphereScoreMap(np.roll(self.cells, quarter_turns * self.k, axis=1), self.hfov, self.aspect)


def _tier_index(value: float, tiers: Sequence[float], what: str) -> int:
    for index, tier in enumerate(tiers):
        if math.isclose(value, tier, abs_tol=1e-9):
            return index
    raise ScoreMapError(f"{what} {value} is not on the glimpse grid {list(tiers)}.")


def stitch_sphere_map(maps: Iterable[tuple[Glimpse, PaddedScoreMap]]) -> SphereScoreMap:
    """
    Stitch the twelve padded glimpse maps of a segment into one sphere map. The padded ring of every map is cut off
    and its centre block is written to the band of its glimpse.

    :param maps: ``(glimpse, padded map)`` pairs, one per :func:`~cvshl.glimpse_grid` position, in any order.
    :return: The stitched map.
    :raises ScoreMapError: if a grid position is missing or duplicated, or the maps disagree on ``k``.
    """
    items = list(maps)
    if not items:
        raise ScoreMapError("Nothing to stitch.")
    k = items[0][1].k
    reference = items[0][0]
    cells = np.zeros((len(LATITUDE_TIERS) * k, len(LONGITUDE_TIERS) * k, k * k))
    seen: dict[tuple[int, int], int] = {}
    for glimpse, padded in items:
        if padded.k != k:
            raise ScoreMapError(f"Map for {glimpse.center} has k={padded.k}, expected {k}.")
        if not (math.isclose(glimpse.hfov, reference.hfov) and math.isclose(glimpse.aspect, reference.aspect)):
            raise ScoreMapError(f"Glimpse {glimpse.center} does not share the grid field of view.")
        band = (
            _tier_index(glimpse.center.theta, LATITUDE_TIERS, "Latitude"),
            _tier_index(glimpse.center.phi, LONGITUDE_TIERS, "Longitude"),
        )
        if band in seen:
            raise ScoreMapError(f"Duplicate map for grid glimpse {glimpse.center}.")
        seen[band] = glimpse.segment
        row, col = band[0] * k, band[1] * k
        cells[row : row + k, col : col + k] = pad_strip(padded).scores
    missing = [
        (theta, phi)
        for r, theta in enumerate(LATITUDE_TIERS)
        for c, phi in enumerate(LONGITUDE_TIERS)
        if (r, c) not in seen
    ]
    if missing:
        raise ScoreMapError(f"Missing maps for grid glimpses (theta, phi) {missing}.")
    _scoremap_logger.debug("Stitched %d glimpse maps into a %s sphere map.", len(items), cells.shape)
    return SphereScoreMap(cells, reference.hfov, reference.aspect)


# +------------------------------------------------------------------------------------------------------------------+
# | WINDOW SEARCH
# +------------------------------------------------------------------------------------------------------------------+


@dataclass(frozen=True)
class WindowCandidate:
    """
    A scored view: a window centre, its horizontal field of view in degrees and its composition score. ``cell`` is
    the sphere map cell the centre was taken from when the window belongs to the scan set.
    """

    center: Viewpoint
    hfov_scale: float
    score: float = 0.0
    cell: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if not MIN_SCALE <= self.hfov_scale <= MAX_SCALE:
            raise ScoreMapError(f"Window scale {self.hfov_scale} outside [{MIN_SCALE}, {MAX_SCALE}].")


def _nearest_cells(center: Viewpoint, scale: float, k: int, hfov: float, aspect: float) -> np.ndarray:
    _, _, cell_vectors = _sphere_geometry(k, hfov, aspect)
    u, v = nfov_sampling_grid(Glimpse(center, scale, aspect), k, k)
    bins = gnomonic_inverse_vectors(u, v, center).reshape(-1, 1, 3)
    distances = angular_distances(bins, cell_vectors[np.newaxis])
    tied = distances <= distances.min(axis=1, keepdims=True) + NEAREST_CELL_TIE
    # first tied cell in row-major order, the lowest (row, col)
    return np.argmax(tied, axis=1)


@lru_cache(maxsize=4096)
def _scan_cells(row: int, col: int, scale: float, k: int, hfov: float, aspect: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Cell indices gathered by the window centred on cell ``(row, col)``, the same cells :func:`window_gather` picks for
    a free window at that centre.
    """
    theta, phi, _ = _sphere_geometry(k, hfov, aspect)
    center = Viewpoint(float(theta[row, col]), float(phi[row, col]))
    rows, cols = np.divmod(_nearest_cells(center, scale, k, hfov, aspect), len(LONGITUDE_TIERS) * k)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def window_gather(s: SphereScoreMap, w: WindowCandidate) -> np.ndarray:
    """
    Crop a ``k x k x k^2`` map for a window from the sphere map. The window is divided into ``k x k`` bins in its own
    tangent plane and every bin takes the channel vector of the sphere map cell nearest to its centre. Cells within
    :data:`NEAREST_CELL_TIE` degrees of the nearest are tied and the lowest ``(row, col)`` among them wins.

    :param s: The stitched sphere map.
    :param w: The window. Windows from the scan set use their cell's precomputed index table.
    :return: The gathered crop.
    """
    k = s.k
    if w.cell is not None:
        rows, cols = _scan_cells(w.cell[0], w.cell[1], float(w.hfov_scale), k, float(s.hfov), float(s.aspect))
    else:
        rows, cols = np.divmod(
            _nearest_cells(w.center, float(w.hfov_scale), k, float(s.hfov), float(s.aspect)),
            len(LONGITUDE_TIERS) * k,
        )
    return s.cells[rows, cols].reshape(k, k, k * k)


def _checked_scales(scales: Iterable[float]) -> list[float]:
    ordered = sorted({float(scale) for scale in scales})
    if not ordered:
        raise ScoreMapError("At least one window scale is required.")
    for scale in ordered:
        if not MIN_SCALE <= scale <= MAX_SCALE:
            raise ScoreMapError(f"Window scale {scale} outside [{MIN_SCALE}, {MAX_SCALE}].")
    return ordered


def scan_set(s: SphereScoreMap, scales: Iterable[float] = DEFAULT_SCALES) -> list[WindowCandidate]:
    """
    Unscored windows at every cell centre for every scale, in scan order (scale ascending, then row, then column).
    """
    rows, cols = s.cells.shape[:2]
    return [
        WindowCandidate(s.cell_center(row, col), scale, 0.0, (row, col))
        for scale in _checked_scales(scales)
        for row in range(rows)
        for col in range(cols)
    ]


@lru_cache(maxsize=64)
def _scan_table(scale: float, k: int, hfov: float, aspect: float) -> tuple[np.ndarray, np.ndarray]:
    """
    The :func:`_scan_cells` tables of every cell stacked in scan order, ``(3k * 4k, k^2)`` each.
    """
    tables = [
        _scan_cells(row, col, scale, k, hfov, aspect)
        for row in range(len(LATITUDE_TIERS) * k)
        for col in range(len(LONGITUDE_TIERS) * k)
    ]
    rows = np.stack([table[0] for table in tables])
    cols = np.stack([table[1] for table in tables])
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def _scan_scores(s: SphereScoreMap, scales: list[float], h: float) -> np.ndarray:
    """
    Pooled scores of the scan set in scan order, gathered and pooled one scale at a time.
    """
    k = s.k
    scores = []
    for scale in scales:
        rows, cols = _scan_table(scale, k, float(s.hfov), float(s.aspect))
        crops = s.cells[rows, cols].reshape(-1, k, k, k * k)
        scores.append(position_pool_batch(crops, h))
    return np.concatenate(scores)


def score_windows(
    s: SphereScoreMap, scales: Iterable[float] = DEFAULT_SCALES, h: float = DEFAULT_BANDWIDTH
) -> list[WindowCandidate]:
    """
    Every window of the scan set with its pooled score, in scan order. Each score equals
    ``position_pool(window_gather(s, w), h)`` exactly.
    """
    checked = _checked_scales(scales)
    scores = _scan_scores(s, checked, h)
    return [
        WindowCandidate(w.center, w.hfov_scale, float(score), w.cell) for w, score in zip(scan_set(s, checked), scores)
    ]


def sliding_window_search(
    s: SphereScoreMap, scales: Iterable[float] = DEFAULT_SCALES, h: float = DEFAULT_BANDWIDTH
) -> WindowCandidate:
    """
    The best scoring window of the scan set. Ties go to the candidate first in scan order.

    :raises ScoreMapError: if ``scales`` is empty or out of range.
    """
    checked = _checked_scales(scales)
    scores = _scan_scores(s, checked, h)
    # argmax returns the first maximum, the earliest window in scan order
    best_index = int(np.argmax(scores))
    cells_per_scale = s.cells.shape[0] * s.cells.shape[1]
    scale_index, cell_index = divmod(best_index, cells_per_scale)
    row, col = divmod(cell_index, s.cells.shape[1])
    best = WindowCandidate(s.cell_center(row, col), checked[scale_index], float(scores[best_index]), (row, col))
    _scoremap_logger.debug("Best window %s at %.1f deg scores %f.", best.center, best.hfov_scale, best.score)
    return best


# +------------------------------------------------------------------------------------------------------------------+
# | HEATMAP
# +------------------------------------------------------------------------------------------------------------------+


def render_heatmap(
    s: SphereScoreMap, width: int, height: int, h: float = DEFAULT_BANDWIDTH, scale: float = DEFAULT_HFOV
) -> np.ndarray:
    """
    Render the pooled composition score over an ERP raster. Each cell is scored by a window of ``scale`` degrees
    centred on it and each pixel shows its nearest cell. The lowest score is black and the highest white; a constant
    map renders as uniform mid gray.

    :return: A ``uint8`` image of shape ``(height, width)``.
    """
    if width <= 0 or height <= 0:
        raise ScoreMapError(f"Heatmap size must be positive, got {width}x{height}.")
    pooled = np.array([w.score for w in score_windows(s, [scale], h)])
    low, high = float(pooled.min()), float(pooled.max())
    if high - low <= 1e-12 * max(1.0, abs(high)):
        levels = np.full_like(pooled, 128.0)
    else:
        levels = np.round((pooled - low) / (high - low) * 255.0)
    _, _, cell_vectors = _sphere_geometry(s.k, float(s.hfov), float(s.aspect))
    theta = 90.0 - (np.arange(height) + 0.5) * 180.0 / height
    phi = (np.arange(width) + 0.5) * 360.0 / width - 180.0
    pixels = unit_vectors(*np.meshgrid(theta, phi, indexing="ij")).reshape(-1, 3)
    nearest = np.argmax(pixels @ cell_vectors.T, axis=1)
    return levels[nearest].reshape(height, width).astype(np.uint8)
