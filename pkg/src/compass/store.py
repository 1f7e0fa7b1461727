"""Append-only JSON-lines record store, exporters and summary counts."""

from __future__ import annotations

import csv
import io
import json
import threading
from collections import Counter
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence
from urllib.parse import unquote, urlparse

from .errors import UnwritablePath
from .records import MeasurementType, PbRecord, Provenance, SourceKind

CSV_FIELDS = ("record_id", "measurement_type", "value", "unit", "latitude", "longitude", "depth_m",
              "phase", "sample_date", "station_label", "source_value", "source_unit", "flags",
              "provenance")
FORMATS = ("csv", "jsonl", "geojson")


def record_line(rec: PbRecord) -> str:
    return json.dumps(rec.to_dict(), sort_keys=True, ensure_ascii=False)


class RecordStore:
    """JSON-lines log of records plus a ``.idx.json`` sidecar mapping id to byte offset.

    Records are only ever appended; an id that is already stored is refused.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.index_path = self.path.with_suffix(".idx.json")
        self._lock = threading.Lock()
        self._index: dict[str, int] = {}
        if self.path.exists():
            self._index = self._load_index()

    def _load_index(self) -> dict[str, int]:
        size = self.path.stat().st_size
        if self.index_path.exists():
            doc = json.loads(self.index_path.read_text(encoding="utf-8"))
            if doc.get("size") == size:
                return dict(doc["offsets"])
        # sidecar missing or stale: rebuild from the log
        offsets = {}
        pos = 0
        with self.path.open("rb") as fh:
            for raw in fh:
                if raw.strip():
                    offsets[json.loads(raw)["record_id"]] = pos
                pos += len(raw)
        return offsets

    def _write_index(self) -> None:
        doc = {"size": self.path.stat().st_size, "offsets": dict(sorted(self._index.items()))}
        self.index_path.write_text(json.dumps(doc, indent=0) + "\n", encoding="utf-8")

    def __len__(self):
        return len(self._index)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._index

    def append(self, records: Iterable[PbRecord]) -> int:
        records = list(records)
        with self._lock:
            ids = [r.record_id for r in records]
            clash = [i for i in ids if i in self._index]
            if clash or len(set(ids)) != len(ids):
                raise ValueError(f"store is append-only; ids already present: {clash[:5] or ids[:5]}")
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("ab") as fh:
                    for rec in records:
                        self._index[rec.record_id] = fh.tell()
                        fh.write((record_line(rec) + "\n").encode("utf-8"))
                self._write_index()
            except OSError as exc:
                raise UnwritablePath(f"{self.path}: {exc}") from exc
        return len(records)

    def get(self, record_id: str) -> PbRecord:
        offset = self._index[record_id]
        with self.path.open("rb") as fh:
            fh.seek(offset)
            return PbRecord.from_dict(json.loads(fh.readline()))

    def __iter__(self) -> Iterator[PbRecord]:
        if not self.path.exists():
            return iter(())
        with self.path.open(encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip()]
        return (PbRecord.from_dict(json.loads(ln)) for ln in lines)

    def records(self) -> list[PbRecord]:
        return list(self)


# -- exporters --------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_text(records: Sequence[PbRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for rec in records:
        d = rec.to_dict()
        d["flags"] = ";".join(d["flags"])
        d["provenance"] = json.dumps(d["provenance"], sort_keys=True, separators=(",", ":"),
                                     ensure_ascii=False)
        writer.writerow([_cell(d[f]) for f in CSV_FIELDS])
    return buf.getvalue()


def load_csv(path: str | Path) -> list[PbRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        d: dict[str, Any] = {k: (v if v != "" else None) for k, v in row.items()}
        d["flags"] = [f for f in (row["flags"] or "").split(";") if f]
        d["provenance"] = json.loads(row["provenance"])
        d["source_value"] = row["source_value"]
        d["source_unit"] = row["source_unit"]
        d["unit"] = row["unit"]
        out.append(PbRecord.from_dict(d))
    return out


def geojson_doc(records: Iterable[PbRecord]) -> dict[str, Any]:
    features = []
    for rec in records:
        if not rec.located:
            continue
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [rec.longitude, rec.latitude]},
            "properties": {"record_id": rec.record_id, "measurement_type": rec.measurement_type.value,
                           "value": rec.value, "unit": rec.unit, "depth_m": rec.depth_m,
                           "paper_id": rec.paper_id, "doi": rec.provenance[0].doi},
        })
    return {"type": "FeatureCollection", "features": features}


def export(records: RecordStore | Iterable[PbRecord], fmt: str, path: str | Path) -> Path:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    records = list(records)
    if fmt == "csv":
        text = csv_text(records)
    elif fmt == "jsonl":
        text = "".join(record_line(r) + "\n" for r in records)
    else:
        text = json.dumps(geojson_doc(records), indent=1, ensure_ascii=False) + "\n"
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UnwritablePath(f"{path}: {exc}") from exc
    return path


# -- summaries --------------------------------------------------------------


def ocean_region(lat: float | None, lon: float | None) -> str:
    """Coarse basin by latitude band and longitude sector (not a coastline-aware split)."""
    if lat is None or lon is None:
        return "unlocated"
    if lat >= 66.0:
        return "Arctic"
    if lat <= -50.0:
        return "Southern"
    if 30.0 <= lat and -6.0 <= lon <= 42.0:
        return "Mediterranean/Europe"
    if 20.0 <= lon < 147.0 and lat < 30.0:
        return "Indian" if lon < 100.0 or lat < -10.0 else "Pacific"
    atlantic_west = -100.0 if lat > 8.0 else -70.0
    if atlantic_west <= lon < 20.0:
        return "Atlantic"
    return "Pacific"


def stats_report(records: RecordStore | Iterable[PbRecord]) -> dict[str, Any]:
    records = list(records)
    by_type = Counter(r.measurement_type.value for r in records)
    by_source = Counter(r.kind.value for r in records)
    by_region = Counter(ocean_region(r.latitude, r.longitude) for r in records)
    return {
        "total": len(records),
        "by_type": {t.value: by_type.get(t.value, 0) for t in MeasurementType},
        "by_source": {k.value: by_source.get(k.value, 0) for k in SourceKind},
        "by_region": dict(sorted(by_region.items())),
    }


def format_stats(stats: dict[str, Any]) -> str:
    lines = [f"total records: {stats['total']}", "", "by measurement type:"]
    lines += [f"  {k:<12}{v:>8}" for k, v in stats["by_type"].items()]
    lines += ["", "by source:"] + [f"  {k:<12}{v:>8}" for k, v in stats["by_source"].items()]
    lines += ["", "by region:"] + [f"  {k:<22}{v:>8}" for k, v in stats["by_region"].items()]
    return "\n".join(lines) + "\n"


def resolve_provenance(prov: Provenance, corpus, externals_dir: Path | None = None) -> bool:
    """True when ``prov`` points at an existing row of a corpus table or external CSV."""
    if prov.kind is SourceKind.extracted:
        if prov.paper_id not in corpus.papers:
            return False
        try:
            table = corpus[prov.paper_id].table(prov.table_id)
        except KeyError:
            return False
        return 0 <= prov.row_index < len(table.data_rows)
    uri = urlparse(prov.source_uri)
    path = Path(unquote(uri.path)) if uri.scheme == "file" else None
    if (path is None or not path.exists()) and externals_dir is not None:
        path = externals_dir / prov.table_id
    if path is None or not path.exists():
        return False
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if prov.column_header not in (reader.fieldnames or []):
            return False
        return 0 <= prov.row_index < sum(1 for _ in reader)
