from __future__ import annotations

import json
import shutil

import pytest

from compass.cli import EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, main
from compass.errors import UnwritablePath
from compass.records import MeasurementType as MT
from compass.records import PbRecord, Provenance
from compass.store import RecordStore, export, geojson_doc, load_csv, ocean_region, stats_report

from .conftest import FIXTURES, GOLD, PAPERS


def _rec(rid, lat=10.0, lon=-30.0, **kw):
    prov = Provenance("p", "T1", 0, "Pb, dissolved", "file://p", "10.1/x")
    return PbRecord(rid, MT.PbConc, 12.5, "pmol/kg", (prov,), latitude=lat, longitude=lon, **kw)


def test_append_only(tmp_path):
    store = RecordStore(tmp_path / "r.jsonl")
    assert store.append([_rec("a"), _rec("b")]) == 2
    with pytest.raises(ValueError):
        store.append([_rec("a")])
    with pytest.raises(ValueError):
        store.append([_rec("c"), _rec("c")])
    assert len(store) == 2 and store.get("b") == _rec("b")


def test_index_rebuilt_when_stale(tmp_path):
    path = tmp_path / "r.jsonl"
    RecordStore(path).append([_rec("a")])
    with path.open("a") as fh:
        fh.write(json.dumps(_rec("z").to_dict()) + "\n")
    store = RecordStore(path)
    assert "z" in store and store.get("z") == _rec("z")
    store.index_path.unlink()
    assert RecordStore(path).get("a") == _rec("a")


def test_export_round_trips(tmp_path):
    recs = [_rec("a", depth_m=5.0, flags=frozenset({"x", "y"})), _rec("b", lat=None, lon=None,
                                                                       station_label="K,1")]
    assert load_csv(export(recs, "csv", tmp_path / "o.csv")) == recs
    lines = export(recs, "jsonl", tmp_path / "o.jsonl").read_text().splitlines()
    assert [PbRecord.from_dict(json.loads(ln)) for ln in lines] == recs
    doc = json.loads(export(recs, "geojson", tmp_path / "o.geojson").read_text())
    assert doc == geojson_doc(recs)
    assert len(doc["features"]) == 1
    assert doc["features"][0]["geometry"]["coordinates"][:2] == [-30.0, 10.0]


def test_export_errors(tmp_path):
    with pytest.raises(ValueError):
        export([], "xml", tmp_path / "o.xml")
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(UnwritablePath):
        export([_rec("a")], "csv", blocker / "o.csv")


@pytest.mark.parametrize("lat,lon,region", [
    (None, 1.0, "unlocated"), (80.0, 0.0, "Arctic"), (-60.0, 0.0, "Southern"), (31.7, -64.2, "Atlantic"),
    (0.0, -140.0, "Pacific"), (-20.0, 70.0, "Indian"), (38.0, 15.0, "Mediterranean/Europe"),
    (36.5, 123.3, "Pacific")])
def test_ocean_region(lat, lon, region):
    assert ocean_region(lat, lon) == region


def test_stats_counts():
    s = stats_report([_rec("a"), _rec("b", lat=None)])
    assert s["total"] == 2 and s["by_type"]["PbConc"] == 2 and s["by_source"]["extracted"] == 2
    assert s["by_region"] == {"Atlantic": 1, "unlocated": 1}


def test_cli_help(capsys):
    assert main(["--help"]) == EXIT_OK
    out = capsys.readouterr().out
    for cmd in ("run", "eval", "export", "stats"):
        assert cmd in out


def test_cli_run_export_stats(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--corpus", str(PAPERS), "--fixtures", str(FIXTURES), "--out", str(out)]) == EXIT_OK
    assert main(["export", "--store", str(out), "--format", "csv", "--out", str(tmp_path / "x.csv")]) == EXIT_OK
    assert len(load_csv(tmp_path / "x.csv")) == 40
    capsys.readouterr()
    assert main(["stats", "--store", str(out), "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["total"] == 40
    assert main(["eval", "--gold", str(GOLD), "--pred", str(out)]) == EXIT_OK
    assert "extraction" in capsys.readouterr().out


def test_cli_fatal_inputs(tmp_path):
    assert main(["run", "--corpus", str(tmp_path / "missing"), "--fixtures", str(FIXTURES),
                 "--out", str(tmp_path / "o")]) == EXIT_FATAL
    assert main(["run", "--out", str(tmp_path / "o")]) == EXIT_FATAL
    assert main(["eval", "--gold", str(tmp_path / "nope.json"), "--pred", str(tmp_path)]) == EXIT_FATAL
    assert main(["bogus"]) == EXIT_FATAL


def test_cli_partial_run(tmp_path):
    corpus = tmp_path / "papers"
    shutil.copytree(PAPERS, corpus)
    (corpus / "unknown.json").write_text(json.dumps({
        "paper_id": "unknown", "title": "Lead in a fjord", "abstract": "Pb was measured.", "tables": []}))
    code = main(["run", "--corpus", str(corpus), "--fixtures", str(FIXTURES), "--out", str(tmp_path / "o")])
    assert code == EXIT_PARTIAL
    lines = (tmp_path / "o" / "quarantine.jsonl").read_text().splitlines()
    assert any("unknown" in ln for ln in lines)
