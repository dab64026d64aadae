#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""Tests of the spherical geometry, projections and area accounting."""

import math

import numpy as np
import pytest

from cvshl import (
    ErpFrame,
    Glimpse,
    GeometryError,
    Viewpoint,
    analytic_solid_angle,
    angular_distance,
    erp_footprint_fraction,
    erp_project,
    erp_unproject,
    extract_nfov,
    extract_nfov_clip,
    glimpse_grid,
    gnomonic_forward,
    gnomonic_inverse,
    solid_angle,
    tangent_plane_area,
)
from cvshl._geometry import footprint_contains, wrap_delta


def test_viewpoint_normalisation():
    """
    Longitudes wrap into [0, 360) and latitudes outside the sphere are rejected.
    """
    assert Viewpoint(0.0, 360.0).phi == 0.0
    assert Viewpoint(0.0, -0.0).phi == 0.0
    assert Viewpoint(45.0, 350.0).rotated(20.0) == Viewpoint(45.0, 10.0)
    with pytest.raises(GeometryError):
        Viewpoint(91.0, 0.0)
    with pytest.raises(GeometryError):
        Viewpoint(float("nan"), 0.0)


def test_wrap_delta():
    assert wrap_delta(350.0) == -10.0
    assert wrap_delta(-190.0) == 170.0
    assert wrap_delta(180.0) == -180.0


def test_angular_distance_across_seam():
    """
    Distances are symmetric and do not care which side of the 0/360 seam a longitude sits on.
    """
    a = Viewpoint(10.0, 355.0)
    b = Viewpoint(10.0, 5.0)
    assert math.isclose(angular_distance(a, b), angular_distance(b, a))
    assert angular_distance(a, b) < 10.0
    assert math.isclose(angular_distance(Viewpoint(90.0, 0.0), Viewpoint(-90.0, 77.0)), 180.0)


def test_vector_round_trip():
    for theta, phi in [(0.0, 0.0), (45.0, 90.0), (-30.0, 300.0), (89.0, 181.0)]:
        v = Viewpoint(theta, phi)
        back = Viewpoint.from_vector(v.unit_vector())
        assert angular_distance(v, back) < 1e-9


def test_erp_round_trip():
    frame = ErpFrame(np.zeros((90, 180), dtype=np.float32), theta1=30.0, phi0=45.0)
    for theta, phi in [(0.0, 0.0), (60.0, 10.0), (-80.0, 200.0)]:
        x, y = erp_project(Viewpoint(theta, phi), frame)
        assert 0.0 <= y < frame.height
        back = erp_unproject(x, y, frame)
        assert angular_distance(back, Viewpoint(theta, phi)) < 1e-9


def test_erp_frame_shape():
    with pytest.raises(GeometryError):
        ErpFrame(np.zeros((10, 10)))
    with pytest.raises(GeometryError):
        ErpFrame(np.zeros((10, 20)), theta1=90.0)


def test_gnomonic_round_trip():
    center = Viewpoint(30.0, 120.0)
    for theta, phi in [(30.0, 120.0), (50.0, 150.0), (0.0, 90.0), (70.0, 60.0)]:
        p = Viewpoint(theta, phi)
        u, v = gnomonic_forward(p, center)
        assert angular_distance(gnomonic_inverse(u, v, center), p) < 1e-9


def test_gnomonic_rejects_far_hemisphere():
    with pytest.raises(GeometryError):
        gnomonic_forward(Viewpoint(0.0, 180.0), Viewpoint(0.0, 0.0))


def test_gnomonic_north_is_up():
    """
    A point north of the centre lands at positive v, a point to the east at positive u.
    """
    center = Viewpoint(20.0, 40.0)
    _, v = gnomonic_forward(Viewpoint(30.0, 40.0), center)
    u, _ = gnomonic_forward(Viewpoint(20.0, 50.0), center)
    assert v > 0.0 and u > 0.0


def test_glimpse_grid_and_fov():
    grid = glimpse_grid(segment=7)
    assert len(grid) == 12
    assert all(g.segment == 7 for g in grid)
    assert grid[0].center == Viewpoint(67.5, 0.0)
    assert grid[-1].center == Viewpoint(-67.5, 270.0)
    assert math.isclose(Glimpse(Viewpoint(0.0, 0.0)).vfov, math.degrees(2.0 * math.atan(0.75)))
    with pytest.raises(GeometryError):
        Glimpse(Viewpoint(0.0, 0.0), hfov=180.0)
    with pytest.raises(GeometryError):
        Glimpse(Viewpoint(0.0, 0.0)).half_extents(-0.1)


def test_solid_angle_matches_closed_form():
    """
    The Monte Carlo footprint of a 90 degree 4:3 window agrees with the pyramid formula.
    """
    g = Glimpse(Viewpoint(10.0, 200.0))
    exact = analytic_solid_angle(g)
    assert math.isclose(exact, 1.7526, abs_tol=5e-4)
    estimate = solid_angle(g, n_samples=100_000, seed=3)
    assert abs(estimate.area - exact) < max(5.0 * estimate.stderr, 0.05)
    with pytest.raises(GeometryError):
        solid_angle(g, n_samples=10)


def test_enlargement_grows_every_measure():
    g = Glimpse(Viewpoint(0.0, 0.0))
    assert analytic_solid_angle(g, 0.2) > analytic_solid_angle(g)
    assert math.isclose(tangent_plane_area(g, 0.2), tangent_plane_area(g) * 1.44)


def test_footprint_contains():
    g = Glimpse(Viewpoint(0.0, 90.0))
    directions = np.stack(
        [Viewpoint(0.0, 90.0).unit_vector(), Viewpoint(0.0, 270.0).unit_vector(), Viewpoint(40.0, 90.0).unit_vector()]
    )
    assert footprint_contains(g, directions).tolist() == [True, False, False]
    assert footprint_contains(g, directions, enlarge=0.2)[2]


def test_erp_footprint_grows_towards_poles():
    """
    The same window covers more ERP pixels near a pole than at the equator.
    """
    equator = erp_footprint_fraction(Glimpse(Viewpoint(0.0, 0.0)), width=360, height=180)
    polar = erp_footprint_fraction(Glimpse(Viewpoint(67.5, 0.0)), width=360, height=180)
    assert 0.0 < equator < polar < 1.0


def test_extract_nfov_centre_pixel():
    """
    The centre of a window looking at longitude 0 samples the middle column of a column ramp.
    """
    height = 90
    ramp = np.tile(np.arange(2 * height, dtype=np.float32), (height, 1))
    image = extract_nfov(ErpFrame(ramp), Glimpse(Viewpoint(0.0, 0.0), hfov=10.0), 5, 5)
    assert image.shape == (5, 5)
    assert abs(image[2, 2] - (height - 0.5)) < 0.05
    assert image[2, 4] > image[2, 0]


def test_extract_nfov_seam_and_pole():
    """
    A constant panorama stays constant across the seam and over a pole.
    """
    frame = ErpFrame(np.full((60, 120, 3), 0.7, dtype=np.float32))
    for center in [Viewpoint(0.0, 180.0), Viewpoint(90.0, 0.0), Viewpoint(-67.5, 270.0)]:
        image = extract_nfov(frame, Glimpse(center), 32, 24, enlarge=0.2)
        assert image.shape == (24, 32, 3)
        np.testing.assert_allclose(image, 0.7, atol=1e-5)


def test_extract_nfov_clip():
    frames = [ErpFrame(np.full((30, 60), float(i), dtype=np.float32)) for i in range(4)]
    clip = extract_nfov_clip(frames, Glimpse(Viewpoint(0.0, 0.0)), 16, 12)
    assert clip.shape == (4, 12, 16)
    np.testing.assert_allclose(clip[:, 6, 8], [0.0, 1.0, 2.0, 3.0], atol=1e-5)
    with pytest.raises(GeometryError):
        extract_nfov_clip([], Glimpse(Viewpoint(0.0, 0.0)), 16, 12)
