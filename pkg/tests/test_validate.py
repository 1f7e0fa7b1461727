from __future__ import annotations

import pytest

from compass.errors import MalformedCheckSpec
from compass.knowledge_tree import collect_checks
from compass.records import MeasurementType as MT
from compass.records import PbRecord, Provenance
from compass.validate.checks import (
    FATAL,
    FLAG,
    CoordinateSanity,
    GeoBounds,
    Range,
    RequiredFields,
    UnitWhitelist,
    parse_check,
    run_checks,
)
from compass.validate.ocean import COLS, MAGIC, ROWS, OceanMask, parse_mask


def _rec(rid="r", value=10.0, unit="pmol/kg", lat=31.67, lon=-64.17, mtype=MT.PbConc):
    prov = Provenance("p", "T1", 0, "Pb", "file://p")
    return PbRecord(rid, mtype, value, unit, (prov,), latitude=lat, longitude=lon, depth_m=10.0)


def test_range():
    chk = Range("r", FATAL, MT.PbConc, 0.0, 500.0, "pmol/kg")
    assert chk.evaluate(_rec(), None) is None
    assert "outside" in chk.evaluate(_rec(value=-1), None)
    assert "not evaluable" in chk.evaluate(_rec(unit="ng/kg"), None)
    assert not chk.applies_to(_rec(mtype=MT.Pb210Conc))


def test_geo_bounds(mask):
    chk = GeoBounds("g", FATAL)
    assert chk.evaluate(_rec(), mask) is None
    assert "land" in chk.evaluate(_rec(lat=40.0, lon=-100.0), mask)
    assert "no ocean mask" in chk.evaluate(_rec(), None)
    assert "does not match" in GeoBounds("g", FATAL, "other").evaluate(_rec(), mask)
    assert "no coordinates" in chk.evaluate(_rec(lat=None), mask)


def test_unit_whitelist_required_and_sanity():
    assert UnitWhitelist("u", FATAL, MT.PbConc, ("pmol/kg",)).evaluate(_rec(unit="ppt"), None)
    assert RequiredFields("f", FATAL, ("sample_date",)).evaluate(_rec(), None) == "missing sample_date"
    sanity = CoordinateSanity("c", FATAL)
    assert sanity.evaluate(_rec(lat=0.0, lon=0.0), None)
    assert sanity.evaluate(_rec(lat=91.0), None)
    assert sanity.evaluate(_rec(), None) is None


@pytest.mark.parametrize("raw", [
    None, {}, {"kind": "nope"}, {"kind": "range", "params": {"min": 2, "max": 1, "mtype": "PbConc", "unit": "u"}},
    {"kind": "range", "params": {"min": 0, "max": 1, "mtype": "Gold", "unit": "u"}},
    {"kind": "range", "severity": "warn", "params": {"min": 0, "max": 1, "mtype": "PbConc", "unit": "u"}},
    {"kind": "unit_whitelist", "params": {"mtype": "PbConc", "allowed_units": []}},
    {"kind": "required_fields", "params": {"fields": ["colour"]}},
    {"kind": "coordinate_sanity", "params": {"x": 1}},
    {"kind": "geo_bounds", "params": []},
])
def test_malformed_checks(raw):
    with pytest.raises(MalformedCheckSpec):
        parse_check(raw, "n", 0)


def test_parse_round_trip():
    raw = {"kind": "range", "id": "x", "severity": FLAG,
           "params": {"mtype": "PbConc", "min": 0.0, "max": 5.0, "unit": "pmol/kg"}}
    chk = parse_check(raw, "n", 0)
    assert chk.to_dict() == raw
    assert parse_check({"kind": "coordinate_sanity"}, "node", 3).check_id == "node.vc3"


def test_flag_failures_do_not_invalidate():
    checks = [Range("hard", FATAL, MT.PbConc, 0, 100, "pmol/kg"), Range("soft", FLAG, MT.PbConc, 0, 1, "pmol/kg")]
    report = run_checks([_rec("a", 50.0), _rec("b", 500.0)], checks)
    assert report.invalid_ids() == {"b"}
    assert report.summary == {"hard": {"pass": 1, "fail": 1}, "soft": {"pass": 0, "fail": 2}}
    assert [r.record_id for r in report.rows] == ["a", "a", "b", "b"]


def test_tree_checks_inherited(tree):
    ids = [c.check_id for c in collect_checks(tree, "pb_conc_extraction")]
    assert ids[:3] == ["root.coordinate_sanity", "root.ocean", "root.required"]
    assert {"pb_conc.range", "pb_conc.unit"} <= set(ids)
    assert "pb_conc.range" not in [c.check_id for c in collect_checks(tree, "pb210_extraction")]


def test_mask_round_trip(mask):
    assert parse_mask(mask.dumps()) == mask
    assert mask.dumps().startswith(MAGIC)


def test_mask_cell_index():
    assert OceanMask.cell_index(89.5, -179.5) == (0, 0)
    assert OceanMask.cell_index(-90.0, 179.99) == (ROWS - 1, COLS - 1)
    assert OceanMask.cell_index(0.0, 180.0) == (89, 0)


def test_mask_known_cells(mask):
    assert mask.is_ocean(40.0, -30.0)
    assert not mask.is_ocean(47.0, 2.5)
    assert mask.is_ocean(0.0, -140.0)
    assert not mask.is_ocean(-80.0, 0.0)
    assert not mask.is_ocean(48.0, 10.0)


@pytest.mark.parametrize("text", ["", "garbage\n", MAGIC + "\n" + "2" * COLS, MAGIC + "\n" + "1" * COLS],
                         ids=["empty", "no_header", "bad_digit", "one_row"])
def test_bad_mask_files(text):
    with pytest.raises(ValueError):
        parse_mask(text)
