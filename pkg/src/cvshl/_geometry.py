#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Spherical coordinates, equirectangular and gnomonic projections, glimpse footprints and area accounting.

Angles are degrees everywhere in the public interface. Latitude ``theta`` is positive north, longitude ``phi`` grows
east and is kept in ``[0, 360)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import cv2
import numpy as np

from ._errors import GeometryError

LATITUDE_TIERS: tuple[float, ...] = (67.5, 0.0, -67.5)
"""
Latitudes of the glimpse grid, north to south. Row bands of a sphere score map follow this order.
"""

LONGITUDE_TIERS: tuple[float, ...] = (0.0, 90.0, 180.0, 270.0)
"""
Longitudes of the glimpse grid. Column bands of a sphere score map follow this order.
"""

DEFAULT_HFOV = 90.0
DEFAULT_ASPECT = 4.0 / 3.0
MIN_MONTE_CARLO_SAMPLES = 100_000

_LATITUDE_SLACK = 1e-9


def wrap_longitude(phi: float) -> float:
    """
    Normalise a longitude into ``[0, 360)``.

    .. invisible-code-block: python

        from cvshl._geometry import wrap_longitude

    >>> wrap_longitude(-90.0)
    270.0
    >>> wrap_longitude(720.0)
    0.0
    """
    wrapped = math.fmod(phi, 360.0)
    if wrapped < 0.0:
        wrapped += 360.0
    if wrapped >= 360.0:
        wrapped -= 360.0
    return wrapped + 0.0  # no negative zero


def wrap_delta(dphi: float | np.ndarray) -> float | np.ndarray:
    """
    Signed longitude difference folded into ``[-180, 180)``.
    """
    return (dphi + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class Viewpoint:
    """
    A camera principal axis on the unit sphere.

    .. invisible-code-block: python

        from cvshl import Viewpoint

    >>> Viewpoint(10.0, -30.0)
    Viewpoint(theta=10.0, phi=330.0)
    """

    theta: float
    phi: float

    def __post_init__(self) -> None:
        theta = float(self.theta)
        phi = float(self.phi)
        if not (math.isfinite(theta) and math.isfinite(phi)):
            raise GeometryError(f"Non-finite viewpoint ({self.theta}, {self.phi}).")
        if theta > 90.0 + _LATITUDE_SLACK or theta < -90.0 - _LATITUDE_SLACK:
            raise GeometryError(f"Latitude {theta} outside [-90, 90].")
        object.__setattr__(self, "theta", min(90.0, max(-90.0, theta)))
        object.__setattr__(self, "phi", wrap_longitude(phi))

    def rotated(self, dphi: float) -> Viewpoint:
        """
        The same viewpoint rotated about the polar axis by ``dphi`` degrees.
        """
        return Viewpoint(self.theta, self.phi + dphi)

    def unit_vector(self) -> np.ndarray:
        return unit_vectors(np.asarray(self.theta), np.asarray(self.phi))

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> Viewpoint:
        theta, phi = from_unit_vectors(np.asarray(vector, dtype=np.float64))
        return cls(float(theta), float(phi))


def unit_vectors(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """
    Cartesian unit vectors for arrays of latitudes and longitudes. The result has a trailing axis of size 3.
    """
    t = np.radians(np.asarray(theta, dtype=np.float64))
    p = np.radians(np.asarray(phi, dtype=np.float64))
    cos_t = np.cos(t)
    return np.stack((cos_t * np.cos(p), cos_t * np.sin(p), np.sin(t)), axis=-1)


def from_unit_vectors(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Latitude and longitude (degrees) of direction vectors. Vectors need not be normalised.
    """
    x = vectors[..., 0]
    y = vectors[..., 1]
    z = vectors[..., 2]
    theta = np.degrees(np.arctan2(z, np.hypot(x, y)))
    phi = np.degrees(np.arctan2(y, x)) % 360.0
    phi = np.where(phi >= 360.0, 0.0, phi)
    return theta, phi


def angular_distance(a: Viewpoint, b: Viewpoint) -> float:
    """
    Great-circle distance between two viewpoints in degrees.

    .. invisible-code-block: python

        from cvshl import Viewpoint, angular_distance

    >>> round(angular_distance(Viewpoint(0, 0), Viewpoint(0, 180)), 9)
    180.0
    >>> round(angular_distance(Viewpoint(0, 0), Viewpoint(90, 123)), 9)
    90.0
    """
    return float(angular_distances(a.unit_vector(), b.unit_vector()))


def angular_distances(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    Element-wise great-circle distances (degrees) between broadcastable arrays of unit vectors.
    """
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    dot = np.sum(u * v, axis=-1)
    return np.degrees(np.arctan2(cross, dot))


# +------------------------------------------------------------------------------------------------------------------+
# | EQUIRECTANGULAR
# +------------------------------------------------------------------------------------------------------------------+


@dataclass
class ErpFrame:
    """
    A full equirectangular panorama. Row 0 is the northern edge, column 0 the western edge of the map centred on
    ``phi0``. Pixel centres sit at integer continuous coordinates.
    """

    pixels: np.ndarray
    theta1: float = 0.0
    phi0: float = 0.0

    def __post_init__(self) -> None:
        if self.pixels.ndim not in (2, 3):
            raise GeometryError(f"ERP pixels must be 2D or 3D, got shape {self.pixels.shape}.")
        height, width = self.pixels.shape[:2]
        if height <= 0 or width != 2 * height:
            raise GeometryError(f"ERP frame must be 2:1, got {width}x{height}.")
        if not -90.0 < self.theta1 < 90.0:
            raise GeometryError(f"Standard parallel {self.theta1} must lie strictly inside (-90, 90).")

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])


def erp_angular(p: Viewpoint, theta1: float = 0.0, phi0: float = 0.0) -> tuple[float, float]:
    """
    The equirectangular relations ``x = (phi - phi0) cos(theta1)``, ``y = theta - theta1`` in degrees, with the
    longitude difference wrapped into ``[-180, 180)``.

    .. invisible-code-block: python

        from cvshl import Viewpoint, erp_angular

    >>> erp_angular(Viewpoint(30, 70))
    (70.0, 30.0)
    >>> x, _ = erp_angular(Viewpoint(0, 90), theta1=60.0)
    >>> round(x, 12)
    45.0
    """
    dphi = float(wrap_delta(p.phi - phi0))
    return dphi * math.cos(math.radians(theta1)), p.theta - theta1


def erp_project(p: Viewpoint, frame: ErpFrame) -> tuple[float, float]:
    """
    Continuous pixel coordinates ``(x, y)`` = ``(column, row)`` of a viewpoint in an ERP frame.
    """
    x, y = erp_angular(p, frame.theta1, frame.phi0)
    return _angular_to_pixel(x, y, frame.width, frame.height, frame.theta1)


def erp_unproject(x: float, y: float, frame: ErpFrame) -> Viewpoint:
    """
    Inverse of :func:`erp_project`.
    """
    cos_t1 = math.cos(math.radians(frame.theta1))
    ax = ((x + 0.5) * 360.0 / frame.width - 180.0) * cos_t1
    ay = 90.0 - (y + 0.5) * 180.0 / frame.height - frame.theta1
    return Viewpoint(ay + frame.theta1, ax / cos_t1 + frame.phi0)


def _angular_to_pixel(x: float, y: float, width: int, height: int, theta1: float) -> tuple[float, float]:
    column = (x / math.cos(math.radians(theta1)) + 180.0) * width / 360.0 - 0.5
    row = (90.0 - (y + theta1)) * height / 180.0 - 0.5
    return column, row


def erp_pixel_coordinates(
    theta: np.ndarray, phi: np.ndarray, width: int, height: int, phi0: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """
    Vectorised :func:`erp_project` (the standard parallel cancels out of the pixel mapping).
    """
    column = (wrap_delta(np.asarray(phi, dtype=np.float64) - phi0) + 180.0) * width / 360.0 - 0.5
    row = (90.0 - np.asarray(theta, dtype=np.float64)) * height / 180.0 - 0.5
    return column, row


# +------------------------------------------------------------------------------------------------------------------+
# | GNOMONIC
# +------------------------------------------------------------------------------------------------------------------+


def tangent_basis(center: Viewpoint) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    ``(normal, east, north)`` orthonormal frame of the tangent plane at ``center``. ``north`` follows the local
    meridian.
    """
    t = math.radians(center.theta)
    p = math.radians(center.phi)
    normal = np.array([math.cos(t) * math.cos(p), math.cos(t) * math.sin(p), math.sin(t)])
    east = np.array([-math.sin(p), math.cos(p), 0.0])
    north = np.array([-math.sin(t) * math.cos(p), -math.sin(t) * math.sin(p), math.cos(t)])
    return normal, east, north


def gnomonic_inverse_vectors(u: np.ndarray, v: np.ndarray, center: Viewpoint) -> np.ndarray:
    """
    Unit direction vectors for tangent-plane coordinates around ``center``.
    """
    normal, east, north = tangent_basis(center)
    u = np.asarray(u, dtype=np.float64)[..., np.newaxis]
    v = np.asarray(v, dtype=np.float64)[..., np.newaxis]
    directions = normal + u * east + v * north
    return directions / np.linalg.norm(directions, axis=-1, keepdims=True)


def gnomonic_inverse_arrays(u: np.ndarray, v: np.ndarray, center: Viewpoint) -> tuple[np.ndarray, np.ndarray]:
    return from_unit_vectors(gnomonic_inverse_vectors(u, v, center))


def gnomonic_forward(p: Viewpoint, center: Viewpoint) -> tuple[float, float]:
    """
    Tangent-plane coordinates ``(u, v)`` of ``p`` projected from the sphere centre onto the plane touching
    ``center``. ``u`` grows east, ``v`` north.

    .. invisible-code-block: python

        from cvshl import Viewpoint, gnomonic_forward

    >>> u, v = gnomonic_forward(Viewpoint(0, 45), Viewpoint(0, 0))
    >>> round(u, 12), round(v, 12)
    (1.0, 0.0)

    :raises GeometryError: if ``p`` is 90 degrees or more away from ``center``.
    """
    normal, east, north = tangent_basis(center)
    d = p.unit_vector()
    cos_c = float(d @ normal)
    if cos_c <= 1e-12:
        raise GeometryError(f"{p} is at least 90 degrees from projection centre {center}.")
    return float(d @ east) / cos_c, float(d @ north) / cos_c


def gnomonic_inverse(u: float, v: float, center: Viewpoint) -> Viewpoint:
    """
    Viewpoint on the sphere for tangent-plane coordinates ``(u, v)`` around ``center``.
    """
    return Viewpoint.from_vector(gnomonic_inverse_vectors(np.asarray(u), np.asarray(v), center))


# +------------------------------------------------------------------------------------------------------------------+
# | GLIMPSES
# +------------------------------------------------------------------------------------------------------------------+


@dataclass(frozen=True)
class Glimpse:
    """
    An NFOV window on the sphere for one segment. The vertical extent is fixed in tangent space:
    ``tan(v/2) = tan(hfov/2) / aspect``.
    """

    center: Viewpoint
    hfov: float = DEFAULT_HFOV
    aspect: float = DEFAULT_ASPECT
    segment: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.hfov < 180.0:
            raise GeometryError(f"Horizontal field of view {self.hfov} outside (0, 180).")
        if not self.aspect > 0.0:
            raise GeometryError(f"Aspect ratio must be positive, got {self.aspect}.")

    def half_extents(self, enlarge: float = 0.0) -> tuple[float, float]:
        """
        Tangent-plane half width and half height, each scaled by ``1 + enlarge``.
        """
        if enlarge < 0.0:
            raise GeometryError(f"Enlargement must be non-negative, got {enlarge}.")
        half_u = math.tan(math.radians(self.hfov) / 2.0) * (1.0 + enlarge)
        return half_u, half_u / self.aspect

    @property
    def vfov(self) -> float:
        return math.degrees(2.0 * math.atan(self.half_extents()[1]))


def glimpse_grid(hfov: float = DEFAULT_HFOV, aspect: float = DEFAULT_ASPECT, segment: int = 0) -> list[Glimpse]:
    """
    The twelve glimpses tiling the sphere, latitude tier major, in :data:`LATITUDE_TIERS` x :data:`LONGITUDE_TIERS`
    order.

    .. invisible-code-block: python

        from cvshl import Viewpoint, glimpse_grid

    >>> grid = glimpse_grid()
    >>> len(grid)
    12
    >>> Viewpoint(67.5, 270.0) in [g.center for g in grid]
    True
    """
    return [
        Glimpse(Viewpoint(theta, phi), hfov, aspect, segment) for theta in LATITUDE_TIERS for phi in LONGITUDE_TIERS
    ]


def nfov_sampling_grid(g: Glimpse, out_w: int, out_h: int, enlarge: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """
    Tangent-plane coordinates of the pixel centres of an ``out_h`` x ``out_w`` NFOV image. Row 0 is the top (north)
    edge. Both arrays have shape ``(out_h, out_w)``.
    """
    if out_w <= 0 or out_h <= 0:
        raise GeometryError(f"Output size must be positive, got {out_w}x{out_h}.")
    half_u, half_v = g.half_extents(enlarge)
    u = ((2.0 * np.arange(out_w) + 1.0) / out_w - 1.0) * half_u
    v = (1.0 - (2.0 * np.arange(out_h) + 1.0) / out_h) * half_v
    return np.meshgrid(u, v)


def _remap_tables(
    g: Glimpse, width: int, height: int, phi0: float, out_w: int, out_h: int, enlarge: float
) -> tuple[np.ndarray, np.ndarray]:
    u, v = nfov_sampling_grid(g, out_w, out_h, enlarge)
    theta, phi = gnomonic_inverse_arrays(u, v, g.center)
    column, row = erp_pixel_coordinates(theta, phi, width, height, phi0)
    # one wrapped column is prepended to the source image
    return (column + 1.0).astype(np.float32), row.astype(np.float32)


def _wrap_pad(pixels: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.concatenate((pixels[:, -1:], pixels, pixels[:, :1]), axis=1), dtype=np.float32)


def extract_nfov(frame: ErpFrame, g: Glimpse, out_w: int, out_h: int, enlarge: float = 0.0) -> np.ndarray:
    """
    Render the NFOV image of a glimpse by gnomonic back-projection and bilinear sampling of the ERP frame. Longitude
    wraps around the seam and latitude clamps at the poles.

    :param frame: The source panorama.
    :param g: The glimpse to render.
    :param out_w: Output width in pixels.
    :param out_h: Output height in pixels.
    :param enlarge: Fraction by which both tangent-plane half extents grow.
    :return: A float32 image with the channel layout of ``frame``.
    """
    map_x, map_y = _remap_tables(g, frame.width, frame.height, frame.phi0, out_w, out_h, enlarge)
    return _sample(_wrap_pad(frame.pixels), map_x, map_y)


def extract_nfov_clip(
    frames: Sequence[ErpFrame], g: Glimpse, out_w: int, out_h: int, enlarge: float = 0.0
) -> np.ndarray:
    """
    Render every frame of a segment through one shared sampling grid. Returns ``(frames, out_h, out_w[, C])``.
    """
    if len(frames) == 0:
        raise GeometryError("A clip needs at least one frame.")
    first = frames[0]
    map_x, map_y = _remap_tables(g, first.width, first.height, first.phi0, out_w, out_h, enlarge)
    return np.stack([_sample(_wrap_pad(f.pixels), map_x, map_y) for f in frames])


def _sample(padded: np.ndarray, map_x: np.ndarray, map_y: np.ndarray) -> np.ndarray:
    return np.asarray(
        cv2.remap(padded, map_x, map_y, interpolation=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE)
    )


# +------------------------------------------------------------------------------------------------------------------+
# | AREAS
# +------------------------------------------------------------------------------------------------------------------+


class AreaEstimate(NamedTuple):
    """
    A Monte Carlo area in steradians with its standard error.
    """

    area: float
    stderr: float


def sphere_samples(n_samples: int, seed: int) -> np.ndarray:
    """
    ``n_samples`` directions drawn uniformly on the unit sphere, reproducible from ``seed``.
    """
    rng = np.random.default_rng(seed)
    points = rng.standard_normal((n_samples, 3))
    return points / np.linalg.norm(points, axis=1, keepdims=True)


def footprint_contains(g: Glimpse, directions: np.ndarray, enlarge: float = 0.0) -> np.ndarray:
    """
    Boolean mask of the unit ``directions`` (shape ``(N, 3)``) that fall inside the glimpse window.
    """
    normal, east, north = tangent_basis(g.center)
    half_u, half_v = g.half_extents(enlarge)
    depth = directions @ normal
    inside_u = np.abs(directions @ east) <= half_u * depth
    inside_v = np.abs(directions @ north) <= half_v * depth
    return (depth > 0.0) & inside_u & inside_v


def monte_carlo_area(
    contains: Callable[[np.ndarray], np.ndarray], n_samples: int = MIN_MONTE_CARLO_SAMPLES, seed: int = 0
) -> AreaEstimate:
    """
    Estimate the area of a spherical region given its membership test.

    .. invisible-code-block: python

        import math
        from cvshl._geometry import monte_carlo_area

    .. code-block:: python

        north = monte_carlo_area(lambda d: d[:, 2] >= 0.0, 10_000, seed=1)
        south = monte_carlo_area(lambda d: d[:, 2] < 0.0, 10_000, seed=1)
        assert math.isclose(north.area + south.area, 4.0 * math.pi)

    """
    if n_samples <= 0:
        raise GeometryError(f"Sample count must be positive, got {n_samples}.")
    fraction = float(np.count_nonzero(contains(sphere_samples(n_samples, seed)))) / n_samples
    return AreaEstimate(
        4.0 * math.pi * fraction, 4.0 * math.pi * math.sqrt(fraction * (1.0 - fraction) / n_samples)
    )


def solid_angle(
    g: Glimpse, enlarge: float = 0.0, n_samples: int = MIN_MONTE_CARLO_SAMPLES, seed: int = 0
) -> AreaEstimate:
    """
    Monte Carlo estimate of the spherical footprint of a glimpse window.
    """
    if n_samples < MIN_MONTE_CARLO_SAMPLES:
        raise GeometryError(f"At least {MIN_MONTE_CARLO_SAMPLES} samples are required, got {n_samples}.")
    return monte_carlo_area(lambda d: footprint_contains(g, d, enlarge), n_samples, seed)


def analytic_solid_angle(g: Glimpse, enlarge: float = 0.0) -> float:
    """
    Closed-form solid angle of a rectangular pyramid window: ``4 asin(sin a sin b)`` with half angles ``a``, ``b``.

    .. invisible-code-block: python

        from cvshl import Glimpse, Viewpoint, analytic_solid_angle

    >>> round(analytic_solid_angle(Glimpse(Viewpoint(0, 0))), 3)
    1.753
    """
    half_u, half_v = g.half_extents(enlarge)
    return 4.0 * math.asin(math.sin(math.atan(half_u)) * math.sin(math.atan(half_v)))


def tangent_plane_area(g: Glimpse, enlarge: float = 0.0) -> float:
    half_u, half_v = g.half_extents(enlarge)
    return 4.0 * half_u * half_v


def erp_footprint_fraction(g: Glimpse, enlarge: float = 0.0, width: int = 720, height: int = 360) -> float:
    """
    Fraction of the pixels of a ``width`` x ``height`` ERP raster whose centres fall inside the glimpse window.
    Pixels count equally regardless of latitude.
    """
    rows = 90.0 - (np.arange(height) + 0.5) * 180.0 / height
    columns = (np.arange(width) + 0.5) * 360.0 / width - 180.0
    phi, theta = np.meshgrid(columns, rows)
    directions = unit_vectors(theta, phi).reshape(-1, 3)
    return float(np.count_nonzero(footprint_contains(g, directions, enlarge))) / directions.shape[0]
