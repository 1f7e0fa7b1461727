"""External dataset ingestion and deduplicating fusion of all record sources."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

from ..records import SOURCE_PRIORITY, MeasurementType, PbRecord, Phase, Provenance, SourceKind
from .units import UnitRegistry, convert_units, default_registry

COORD_TOL_DEG = 0.01
DEPTH_TOL_M = 1.0
VALUE_REL_TOL = 1e-6
FUSED = "fused"


@dataclass(frozen=True)
class ExternalDataset:
    dataset_id: str
    kind: SourceKind
    records: tuple[PbRecord, ...]
    citation: str = ""

    def __post_init__(self):
        if self.kind is SourceKind.extracted:
            raise ValueError("external datasets are structured or scattered")


def _cell_float(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_external(csv_path: str | Path, column_map: str | Path | dict | None = None,
                  registry: UnitRegistry | None = None) -> ExternalDataset:
    """Read a CSV dataset through its column-map sidecar (``<name>.map.json`` by default).

    Sidecar keys: ``dataset_id``, ``kind``, ``citation``, ``columns`` (CSV
    column to metadata field) and ``values`` (one entry per measurement
    column: ``column``, ``measurement_type``, ``unit``, optional ``phase``).
    Blank value cells are skipped; values are converted to canonical units.
    """
    csv_path = Path(csv_path)
    if column_map is None:
        column_map = csv_path.with_suffix(".map.json")
    spec = column_map if isinstance(column_map, dict) else json.loads(
        Path(column_map).read_text(encoding="utf-8"))
    registry = registry or default_registry()
    kind = SourceKind(spec["kind"])
    dataset_id = spec["dataset_id"]
    meta = spec.get("columns", {})
    uri = csv_path.resolve().as_uri()
    records = []
    with csv_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {c for c in list(meta) + [v["column"] for v in spec["values"]]
                   if c not in (reader.fieldnames or [])}
        if missing:
            raise ValueError(f"{csv_path.name}: columns not in file: {sorted(missing)}")
        for row_index, row in enumerate(reader):
            fields: dict[str, Any] = {}
            for column, target in meta.items():
                cell = row[column].strip()
                if target in ("latitude", "longitude", "depth_m"):
                    fields[target] = _cell_float(cell)
                else:
                    fields[target] = cell or None
            for col_index, vspec in enumerate(spec["values"]):
                raw = row[vspec["column"]]
                value = _cell_float(raw)
                if value is None:
                    continue
                mtype = MeasurementType(vspec["measurement_type"])
                canonical, _ = convert_units(value, vspec.get("unit", ""), mtype, registry=registry)
                prov = Provenance(dataset_id, csv_path.name, row_index, vspec["column"], uri,
                                  spec.get("doi"), kind)
                records.append(PbRecord(
                    record_id=f"{dataset_id}:r{row_index}:c{col_index}",
                    measurement_type=mtype,
                    value=canonical,
                    unit=registry.canonical[mtype],
                    provenance=(prov,),
                    phase=Phase(vspec.get("phase", "unknown")),
                    source_value=raw.strip(),
                    source_unit=vspec.get("unit", ""),
                    **fields,
                ))
    return ExternalDataset(dataset_id, kind, tuple(records), spec.get("citation", ""))


def is_duplicate(a: PbRecord, b: PbRecord, coord_tol: float = COORD_TOL_DEG,
                 depth_tol: float = DEPTH_TOL_M, value_rel_tol: float = VALUE_REL_TOL) -> bool:
    if a.measurement_type is not b.measurement_type or not (a.located and b.located):
        return False
    if abs(a.latitude - b.latitude) > coord_tol or abs(a.longitude - b.longitude) > coord_tol:
        return False
    if (a.depth_m is None) != (b.depth_m is None):
        return False
    if a.depth_m is not None and abs(a.depth_m - b.depth_m) > depth_tol:
        return False
    return abs(a.value - b.value) <= value_rel_tol * max(abs(a.value), abs(b.value))


def _order_key(r: PbRecord):
    return (-SOURCE_PRIORITY[r.kind], r.measurement_type.value,
            r.latitude if r.latitude is not None else math.inf,
            r.longitude if r.longitude is not None else math.inf,
            r.depth_m if r.depth_m is not None else -1.0, r.value, r.record_id)


@dataclass
class UnifiedDataset:
    records: list[PbRecord]
    merge_log: list[dict[str, str]] = field(default_factory=list)
    counts: dict[str, Any] = field(default_factory=dict)

    @property
    def removed_ids(self) -> set[str]:
        return {e["absorbed"] for e in self.merge_log}


def tally(records: Iterable[PbRecord]) -> dict[str, Any]:
    records = list(records)
    by_type = Counter(r.measurement_type.value for r in records)
    by_source = Counter(r.kind.value for r in records)
    return {"total": len(records),
            "by_type": {t.value: by_type.get(t.value, 0) for t in MeasurementType},
            "by_source": {k.value: by_source.get(k.value, 0) for k in SourceKind}}


def merge_sources(extracted: Sequence[PbRecord], externals: Sequence[ExternalDataset] = (),
                  coord_tol: float = COORD_TOL_DEG, depth_tol: float = DEPTH_TOL_M,
                  value_rel_tol: float = VALUE_REL_TOL) -> UnifiedDataset:
    """Concatenate every source and fold duplicates into the highest-priority survivor.

    Records are visited in a canonical order (priority, then content), each
    joining the first earlier survivor it duplicates, so the result does not
    depend on input order and survivors are pairwise distinct.
    """
    pool = list(extracted) + [r for ds in externals for r in ds.records]
    ids = [r.record_id for r in pool]
    if len(set(ids)) != len(ids):
        dupes = sorted(k for k, v in Counter(ids).items() if v > 1)
        raise ValueError(f"record ids are not unique: {dupes[:5]}")
    survivors: list[PbRecord] = []
    buckets: dict[tuple, list[int]] = {}
    merge_log = []

    def cell(r):
        return (r.measurement_type, math.floor(r.latitude / coord_tol), math.floor(r.longitude / coord_tol))

    for rec in sorted(pool, key=_order_key):
        target = None
        if rec.located:
            t, ci, cj = cell(rec)
            candidates = sorted(i for di in (-2, -1, 0, 1, 2) for dj in (-2, -1, 0, 1, 2)
                                for i in buckets.get((t, ci + di, cj + dj), ()))
            target = next((i for i in candidates
                           if is_duplicate(survivors[i], rec, coord_tol, depth_tol, value_rel_tol)), None)
        if target is None:
            survivors.append(rec)
            if rec.located:
                buckets.setdefault(cell(rec), []).append(len(survivors) - 1)
            continue
        keep = survivors[target]
        survivors[target] = replace(keep, provenance=keep.provenance + rec.provenance,
                                    flags=keep.flags | {FUSED})
        merge_log.append({"survivor": keep.record_id, "absorbed": rec.record_id,
                          "absorbed_kind": rec.kind.value})

    survivors.sort(key=lambda r: r.record_id)
    counts = tally(survivors)
    counts["inputs"] = tally(pool)["by_source"]
    counts["dedup_removed"] = len(merge_log)
    return UnifiedDataset(survivors, merge_log, counts)
