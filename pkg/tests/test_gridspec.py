#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""Tests of the glimpse grid language."""

import pytest

from cvshl import NAMED_GRIDS, GridSpecError, parse_grid


def test_named_grids():
    cvs = parse_grid("cvs")
    assert cvs.name == "cvs"
    assert cvs.longitudes == (0.0, 90.0, 180.0, 270.0)
    assert cvs.latitudes == (67.5, 0.0, -67.5)
    assert cvs.enlarge == 0.2 and cvs.hfov == 90.0
    assert len(cvs.glimpses()) == 12
    dense = parse_grid(" dense ")
    assert len(dense.glimpses()) == 198
    assert dense.longitudes[-1] == 340.0 and dense.latitudes[0] == -75.0
    assert set(NAMED_GRIDS) == {"cvs", "dense"}


def test_grid_call_values():
    spec = parse_grid("grid( lat = 0 , lon=[10, 20.5,-30], aspect=1.5e0 )")
    assert spec.latitudes == (0.0,)
    assert spec.longitudes == (10.0, 20.5, -30.0)
    assert spec.aspect == 1.5 and spec.hfov == 90.0 and spec.enlarge == 0.0
    glimpses = spec.glimpses(segment=4)
    assert [g.center.phi for g in glimpses] == [10.0, 20.5, 330.0]
    assert all(g.segment == 4 for g in glimpses)


def test_ranges_are_inclusive():
    assert parse_grid("grid(lon=0:90:30, lat=0)").longitudes == (0.0, 30.0, 60.0, 90.0)
    assert parse_grid("grid(lon=0:100:30, lat=0)").longitudes == (0.0, 30.0, 60.0, 90.0)
    assert parse_grid("grid(lon=0:0.3:0.1, lat=0)").longitudes == pytest.approx((0.0, 0.1, 0.2, 0.3))
    assert parse_grid("grid(lon=5:5:1, lat=0)").longitudes == (5.0,)


@pytest.mark.parametrize(
    "text",
    [
        "grid(lon=0)",
        "grid(lat=0)",
        "grid(lon=0, lat=0, lon=1)",
        "grid(lon=0, lat=0, hfov=[90, 60])",
        "grid(lon=0, lat=0, enlarge=-0.1)",
        "grid(lon=0:90:0, lat=0)",
        "grid(lon=90:0:10, lat=0)",
        "grid(lon=0, lat=95)",
        "grid(lon=0, lat=0, hfov=180)",
        "grid(lon=0, lat=0, fov=90)",
        "grid(lon=0 lat=0)",
        "sparse",
        "",
    ],
)
def test_invalid_grids(text: str):
    with pytest.raises(GridSpecError):
        parse_grid(text)


def test_syntax_errors_name_the_column():
    with pytest.raises(GridSpecError, match="column"):
        parse_grid("grid(lon=0, lat=)")
