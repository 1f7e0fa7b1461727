from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from compass.errors import NegativeDepth, OutOfRange
from compass.extract.geo import (
    find_coordinates,
    find_dates,
    find_depths,
    find_station,
    format_dms,
    normalize_station,
    parse_coordinate,
    parse_depth,
)


@pytest.mark.parametrize("text,expected", [
    ("36°30'N", (36.5, None)),
    ("123°15.6'E", (None, 123.26)),
    ("45°30'00\"S 12°W", (-45.5, -12.0)),
    ("10.5 N, 20.25 W", (10.5, -20.25)),
    ("-31.5", (None, None)),
    ("12 deg 30 min N", (12.5, None)),
])
def test_parse_coordinate(text, expected):
    assert parse_coordinate(text) == expected


def test_axis_hint_for_bare_numbers():
    assert parse_coordinate("-31.5", axis="lat") == (-31.5, None)
    assert parse_coordinate("−64°10'", axis="lon") == (None, -(64 + 10 / 60))


@pytest.mark.parametrize("text", ["95°N", "181°E", "10°60'N", "10°10'60\"N"])
def test_out_of_range(text):
    with pytest.raises(OutOfRange):
        parse_coordinate(text)


@given(st.floats(-90, 90), st.floats(-180, 180))
def test_dms_round_trip(lat, lon):
    got = parse_coordinate(f"{format_dms(lat, 'lat')} {format_dms(lon, 'lon')}")
    assert abs(got[0] - lat) <= 1e-9 and abs(got[1] - lon) <= 1e-9


def test_find_coordinates_with_labels():
    hits = find_coordinates("a Station A: 49°30'N, 127°00'W; Station B: 50°12.6'N, 145°30'W.")
    assert [(h.label, h.latitude, h.longitude) for h in hits] == [
        ("A", 49.5, -127.0), ("B", 50.21, -145.5)]


def test_find_coordinates_ignores_lone_axis():
    assert find_coordinates("sampled near 36°30'N only") == []


@pytest.mark.parametrize("text,expected", [
    ("2000 m", 2000.0), ("2 km", 2000.0), ("surface", 0.0), ("1,5 km", 1500.0), ("150", None), ("10-20 m", None)])
def test_parse_depth(text, expected):
    assert parse_depth(text) == expected


def test_parse_depth_default_unit_and_sign():
    assert parse_depth("150", default_unit="m") == 150.0
    with pytest.raises(NegativeDepth):
        parse_depth("-20 m")


def test_find_depths_in_prose():
    assert [d for d, _ in find_depths("sampled at 20 m depth")] == [20.0, 20.0]
    assert find_depths("surface seawater was filtered")[0][0] == 0.0
    assert find_depths("a depth of 1.5 km")[0][0] == 1500.0


def test_find_dates():
    assert [d for d, _ in find_dates("on 2008-06-12 and 3 March 2011, or May 4, 2012")] == [
        "2008-06-12", "2011-03-03", "2012-05-04"]
    assert find_dates("in June 2008 and 2008-13-40") == []


def test_station_labels():
    assert find_station("at station K1, sampled at 20 m depth") == "K1"
    assert find_station("stations S1 and S2") is None
    assert find_station("Dissolved Pb at stations in the gyre") is None
    assert find_station("Station C and station D") is None
    assert normalize_station("Stn. k-1") == "K1"
    assert normalize_station(" ") is None
