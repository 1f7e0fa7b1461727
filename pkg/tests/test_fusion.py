from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compass.harmonize.fusion import FUSED, ExternalDataset, is_duplicate, load_external, merge_sources
from compass.records import MeasurementType as MT
from compass.records import PbRecord, Provenance, SourceKind

from .conftest import SCATTERED_CSV, STRUCTURED_CSV


def _rec(rid, lat=10.0, lon=20.0, depth=100.0, value=5.0, kind=SourceKind.extracted, mtype=MT.PbConc):
    prov = Provenance("p", "T1", 0, "Pb", "file://p", None, kind)
    return PbRecord(rid, mtype, value, "pmol/kg", (prov,), latitude=lat, longitude=lon, depth_m=depth)


def test_load_structured():
    ds = load_external(STRUCTURED_CSV)
    assert ds.kind is SourceKind.structured and len(ds.records) == 10
    assert all(r.unit == "pmol/kg" and r.kind is SourceKind.structured for r in ds.records)
    assert ds.records[0].provenance[0].table_id == "structured_pb.csv"


def test_load_scattered_converts_units():
    ds = load_external(SCATTERED_CSV)
    assert ds.kind is SourceKind.scattered
    assert {r.unit for r in ds.records} == {"mBq/m3"}


def test_missing_column_rejected(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("lat,lon\n1,2\n")
    spec = {"dataset_id": "x", "kind": "structured", "columns": {"lat": "latitude"},
            "values": [{"column": "pb", "measurement_type": "PbConc", "unit": "pmol/kg"}]}
    with pytest.raises(ValueError, match="pb"):
        load_external(path, spec)


def test_blank_values_skipped(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("lat,lon,pb\n1,2,\n1,2,3.5\n")
    spec = {"dataset_id": "x", "kind": "scattered", "columns": {"lat": "latitude", "lon": "longitude"},
            "values": [{"column": "pb", "measurement_type": "PbConc", "unit": "nmol/kg"}]}
    ds = load_external(path, spec)
    assert [(r.record_id, r.value) for r in ds.records] == [("x:r1:c0", 3500.0)]


def test_external_kind_cannot_be_extracted():
    with pytest.raises(ValueError):
        ExternalDataset("x", SourceKind.extracted, ())


def test_is_duplicate_tolerances():
    a = _rec("a")
    assert is_duplicate(a, _rec("b", lat=10.009, depth=100.9))
    assert not is_duplicate(a, _rec("b", lat=10.02))
    assert not is_duplicate(a, _rec("b", depth=102))
    assert not is_duplicate(a, _rec("b", value=5.1))
    assert not is_duplicate(a, _rec("b", mtype=MT.Pb210Conc))
    assert not is_duplicate(a, _rec("b", depth=None))
    assert not is_duplicate(_rec("a", lat=None), _rec("b", lat=None))


def test_priority_survivor_and_provenance():
    ds = ExternalDataset("s", SourceKind.structured, (_rec("s1", kind=SourceKind.structured),))
    sc = ExternalDataset("c", SourceKind.scattered, (_rec("c1", kind=SourceKind.scattered),))
    out = merge_sources([_rec("e1")], [sc, ds])
    assert [r.record_id for r in out.records] == ["s1"]
    survivor = out.records[0]
    assert [p.kind for p in survivor.provenance] == [SourceKind.structured, SourceKind.scattered,
                                                     SourceKind.extracted]
    assert FUSED in survivor.flags and out.counts["dedup_removed"] == 2


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        merge_sources([_rec("a"), _rec("a", value=9)])


def test_unlocated_records_never_merge():
    out = merge_sources([_rec("a", lat=None), _rec("b", lat=None)])
    assert len(out.records) == 2


records = st.lists(
    st.builds(lambda i, la, lo, d, v, k: (la, lo, d, v, k),
              st.integers(), st.sampled_from([0.0, 0.004, 0.008, 0.5]), st.sampled_from([0.0, 0.006, 1.0]),
              st.sampled_from([None, 0.0, 0.5, 50.0]), st.sampled_from([1.0, 1.0000001, 2.0]),
              st.sampled_from(list(SourceKind))),
    max_size=25)


def _build(specs):
    return [_rec(f"r{i}", la, lo, d, v, k) for i, (la, lo, d, v, k) in enumerate(specs)]


@settings(max_examples=150, deadline=None)
@given(records, st.randoms())
def test_merge_is_order_independent(specs, rnd):
    recs = _build(specs)
    shuffled = recs[:]
    rnd.shuffle(shuffled)
    assert merge_sources(recs).records == merge_sources(shuffled).records


@settings(max_examples=150, deadline=None)
@given(records)
def test_merge_idempotent_and_survivors_distinct(specs):
    out = merge_sources(_build(specs))
    again = merge_sources(out.records)
    assert again.records == out.records and again.counts["dedup_removed"] == 0
    assert len(out.records) + out.counts["dedup_removed"] == len(specs)
    for i, a in enumerate(out.records):
        for b in out.records[i + 1:]:
            assert not is_duplicate(a, b)


def test_merge_matches_bruteforce_on_random_batches():
    rnd = random.Random(7)
    for _ in range(100):
        recs = [_rec(f"r{i}", rnd.choice([0, 0.005, 0.011, 0.02]), rnd.choice([0, 0.009]),
                     rnd.choice([None, 10.0, 10.8]), rnd.choice([1.0, 2.0]), rnd.choice(list(SourceKind)))
                for i in range(rnd.randint(0, 15))]
        out = merge_sources(recs)
        # every absorbed record duplicates its survivor
        by_id = {r.record_id: r for r in recs}
        for e in out.merge_log:
            assert is_duplicate(by_id[e["survivor"]], by_id[e["absorbed"]])
