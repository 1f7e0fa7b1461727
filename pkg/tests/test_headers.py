from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from compass.harmonize.headers import (
    BACKEND,
    RECIPROCAL,
    UNCERTAINTY,
    UNRESOLVED,
    clean_header,
    mappings_by_field,
    normalize_headers,
    rule_mapping,
)
from compass.records import MeasurementType as MT
from compass.records import Phase
from compass.validate.rollback import PipelineState

from .conftest import fn_gateway


@pytest.mark.parametrize("header,field,mtype", [
    ("Depth (m)", "depth_m", None),
    ("Lat. (°N)", "latitude", None),
    ("Station", "station_label", None),
    ("dPb (pmol/kg)", "value", MT.PbConc),
    ("Pb-210 [dpm/100 kg]", "value", MT.Pb210Conc),
    ("$^{206}$Pb/$^{207}$Pb", "value", MT.R206_207),
    ("²⁰⁸Pb/²⁰⁴Pb", "value", MT.R208_204),
    ("208/206", "value", MT.R208_206),
    ("Chl-a (µg/L)", "ignore", None),
])
def test_rule_mapping(header, field, mtype):
    m = rule_mapping(header)
    assert (m.canonical_field, m.measurement_type) == (field, mtype)


def test_reciprocal_and_uncertainty():
    assert rule_mapping("207Pb/206Pb").confidence_note == RECIPROCAL
    assert rule_mapping("2σ").confidence_note == UNCERTAINTY
    assert rule_mapping("± (pmol/kg)").canonical_field == "ignore"


def test_unit_hint_and_phase():
    key, unit = clean_header("dPb (pmol/kg sw)")
    assert (key, unit) == ("dpb", "pmol/kg sw")
    assert rule_mapping("dPb (pmol/kg sw)").phase_hint is Phase.dissolved
    assert rule_mapping("pPb (pmol/kg)") is None


def test_unresolved_without_backend():
    ms = normalize_headers(["Depth (m)", "Pressure (dbar)"])
    assert ms[1].confidence_note == UNRESOLVED and ms[1].canonical_field == "ignore"


def test_backend_resolves_pending_only(tree):
    seen = []

    def fn(node, payload, n):
        seen.append(payload["headers"])
        return {"mappings": [{"header": "pPb (pmol/kg)", "field": "value", "measurement_type": "PbConc"},
                             {"header": "Pressure (dbar)", "field": "ignore"}]}

    ms = normalize_headers(["Depth (m)", "pPb (pmol/kg)", "Pressure (dbar)"], tree, fn_gateway(fn))
    assert seen == [["pPb (pmol/kg)", "Pressure (dbar)"]]
    assert ms[1].confidence_note == BACKEND and ms[1].measurement_type is MT.PbConc
    assert ms[1].unit_hint == "pmol/kg"
    assert mappings_by_field(ms) == {"depth_m": [0], "value": [1], "ignore": [2]}


def test_backend_failure_degrades_to_unresolved(tree):
    state = PipelineState()
    gw = fn_gateway(lambda node, p, n: {"mappings": [{"header": "nope", "field": "value"}]})
    ms = normalize_headers(["Mystery"], tree, gw, state=state, max_attempts=2)
    assert ms[0].confidence_note == UNRESOLVED
    assert len(state.quarantined) == 1


def test_backend_bad_field_and_type(tree):
    gw = fn_gateway(lambda node, p, n: {"mappings": [{"header": "Mystery", "field": "value",
                                                      "measurement_type": "Gold"}]})
    assert normalize_headers(["Mystery"], tree, gw)[0].confidence_note == UNRESOLVED


def test_empty_headers_rejected():
    with pytest.raises(ValueError):
        normalize_headers([])


@given(st.lists(st.text(max_size=15), min_size=1, max_size=6))
def test_one_mapping_per_header_in_order(headers):
    ms = normalize_headers(headers)
    assert [m.source_header for m in ms] == headers
