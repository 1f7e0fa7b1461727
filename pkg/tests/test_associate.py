from __future__ import annotations

import pytest

from compass.corpus import load_corpus, paper_from_dict
from compass.extract.associate import (
    SURFACE_CONVENTION,
    UNLOCATED,
    associate_metadata,
    build_context,
)
from compass.records import MeasurementType as MT
from compass.records import PbRecord, Provenance

from .conftest import PAPERS


def _paper(tables, sections=()):
    return paper_from_dict({"paper_id": "p", "title": "Pb", "abstract": "", "tables": tables,
                            "sections": [{"heading": "s", "text": t} for t in sections]})


def _draft(table_id, row, paper_id="p", **kw):
    prov = Provenance(paper_id, table_id, row, "Pb", "file://p")
    return PbRecord(f"{paper_id}:{table_id}:r{row}:c1", MT.PbConc, 1.0, "pmol/kg", (prov,), **kw)


def _one(paper, table_id="T1", row=0, **kw):
    draft = _draft(table_id, row, paper.paper_id, **kw)
    return associate_metadata([draft], paper.table(table_id), paper)[0]


def test_row_values_win():
    paper = _paper([{"table_id": "T1", "caption": "Samples at 20 m depth.",
                     "headers": [["Lat", "Lon", "Depth (m)", "Date", "Pb"]],
                     "rows": [["10.5", "-30.25", "100", "2010-05-01", "1"]],
                     "footnotes": ["All at 12°N 40°W."]}])
    rec = _one(paper)
    assert (rec.latitude, rec.longitude, rec.depth_m, rec.sample_date) == (10.5, -30.25, 100.0, "2010-05-01")
    assert {"coord_from_row", "depth_from_row", "date_from_row"} <= rec.flags


def test_footnote_beats_caption_and_body():
    paper = _paper([{"table_id": "T1", "caption": "Profile at 20°N 30°W on 3 May 2011.",
                     "headers": [["Depth (m)", "Pb"]], "rows": [["50", "1"]],
                     "footnotes": ["Station occupied at 21°N, 31°W."]}],
                   sections=["We sampled 22°N 32°W."])
    rec = _one(paper)
    assert (rec.latitude, rec.longitude) == (21.0, -31.0)
    assert "coord_from_footnote" in rec.flags
    assert rec.sample_date == "2011-05-03" and "date_from_caption" in rec.flags


def test_body_is_last_resort():
    paper = _paper([{"table_id": "T1", "caption": "Pb data.", "headers": [["Pb"]], "rows": [["1"]]}],
                   sections=["Samples came from 22°30'N 32°15'W in surface waters."])
    rec = _one(paper)
    assert (rec.latitude, rec.longitude) == (22.5, -32.25)
    assert rec.depth_m == 0.0 and SURFACE_CONVENTION in rec.flags
    assert "coord_from_body" in rec.flags


def test_station_pool_selects_matching_candidate():
    paper = _paper([{"table_id": "T1", "caption": "Pb.", "headers": [["Station", "Pb"]],
                     "rows": [["S1", "1"], ["S2", "2"]],
                     "footnotes": ["Station S1 at 10°N 20°W; station S2 at 15°N 25°W."]}])
    drafts = [_draft("T1", 0), _draft("T1", 1)]
    recs = associate_metadata(drafts, paper.table("T1"), paper)
    assert [(r.latitude, r.longitude, r.station_label) for r in recs] == [(10, -20, "S1"), (15, -25, "S2")]


def test_sibling_table_station_list():
    paper = load_corpus(PAPERS)["pb_conc_profiles"]
    table = paper.table("T2")
    ctx = build_context(table, paper)
    assert any(c.scope == "sibling_table" for c in ctx.coordinates_found)


def test_ambiguous_scope_stops_search():
    paper = _paper([{"table_id": "T1", "caption": "Pb.", "headers": [["Pb"]], "rows": [["1"]],
                     "footnotes": ["Casts at 10°N 20°W and later at 11°N 21°W."]}],
                   sections=["Main site 12°N 22°W."])
    rec = _one(paper)
    assert rec.latitude is None and {"coord_ambiguous", UNLOCATED} <= rec.flags


def test_existing_fields_not_overwritten():
    paper = _paper([{"table_id": "T1", "caption": "At 20°N 30°W.", "headers": [["Pb"]], "rows": [["1"]]}])
    rec = _one(paper, latitude=1.0, longitude=2.0, station_label="X")
    assert (rec.latitude, rec.longitude, rec.station_label) == (1.0, 2.0, "X")


def test_negative_row_depth_not_replaced():
    paper = _paper([{"table_id": "T1", "caption": "At 20 m depth.", "headers": [["Depth (m)", "Pb"]],
                     "rows": [["-5", "1"]]}])
    rec = _one(paper)
    assert rec.depth_m is None and "negative_depth" in rec.flags


def test_surface_token_in_row():
    paper = _paper([{"table_id": "T1", "caption": "", "headers": [["Depth", "Pb"]], "rows": [["surface", "1"]]}])
    rec = _one(paper)
    assert rec.depth_m == 0.0 and SURFACE_CONVENTION in rec.flags


def test_foreign_draft_rejected():
    paper = _paper([{"table_id": "T1", "headers": [["Pb"]], "rows": [["1"]]},
                    {"table_id": "T2", "headers": [["Pb"]], "rows": [["1"]]}])
    with pytest.raises(ValueError):
        associate_metadata([_draft("T2", 0)], paper.table("T1"), paper)


def test_fixture_caption_and_footnote():
    paper = load_corpus(PAPERS)["pb_conc_profiles"]
    rec = _one(paper, "T3", 2)
    assert rec.latitude == 36.5 and rec.longitude == pytest.approx(123.26)
    assert rec.depth_m == 20.0 and rec.sample_date == "2011-05-03" and rec.station_label == "K1"


def test_footnote_coordinates_and_caption_depth():
    paper = _paper([{"table_id": "T1", "caption": "Dissolved Pb at 2000 m depth.", "headers": [["Pb"]],
                     "rows": [["1"], ["2"]], "footnotes": ["Station A: 49°30'N, 127°00'W"]}])
    recs = associate_metadata([_draft("T1", 0), _draft("T1", 1)], paper.table("T1"), paper)
    for rec in recs:
        assert (rec.latitude, rec.longitude, rec.depth_m) == (49.5, -127.0, 2000.0)
        assert {"coord_from_footnote", "depth_from_caption"} <= rec.flags
