"""Measurement record types shared by extraction, harmonization and the store."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any


class MeasurementType(str, enum.Enum):
    PbConc = "PbConc"
    Pb210Conc = "Pb210Conc"
    R206_204 = "R206_204"
    R207_204 = "R207_204"
    R208_204 = "R208_204"
    R206_207 = "R206_207"
    R208_206 = "R208_206"
    R208_207 = "R208_207"

    @property
    def is_ratio(self) -> bool:
        return self.name.startswith("R")


RATIO_TYPES = tuple(t for t in MeasurementType if t.is_ratio)


class Phase(str, enum.Enum):
    dissolved = "dissolved"
    particulate = "particulate"
    total = "total"
    unknown = "unknown"


class SourceKind(str, enum.Enum):
    extracted = "extracted"
    scattered = "scattered"
    structured = "structured"


# Survivor priority during fusion; higher wins.
SOURCE_PRIORITY = {SourceKind.structured: 2, SourceKind.scattered: 1, SourceKind.extracted: 0}


@dataclass(frozen=True)
class Provenance:
    paper_id: str
    table_id: str
    row_index: int
    column_header: str
    source_uri: str
    doi: str | None = None
    kind: SourceKind = SourceKind.extracted

    def to_dict(self) -> dict[str, Any]:
        return {
            "paper_id": self.paper_id,
            "doi": self.doi,
            "table_id": self.table_id,
            "row_index": self.row_index,
            "column_header": self.column_header,
            "source_uri": self.source_uri,
            "kind": self.kind.value,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Provenance:
        return cls(
            paper_id=d["paper_id"],
            table_id=d["table_id"],
            row_index=int(d["row_index"]),
            column_header=d.get("column_header", ""),
            source_uri=d.get("source_uri", ""),
            doi=d.get("doi"),
            kind=SourceKind(d.get("kind", "extracted")),
        )


@dataclass(frozen=True)
class PbRecord:
    """One Pb measurement.

    ``provenance`` is a tuple: drafts carry exactly one entry, fused survivors
    list every source they absorbed (survivor's own source first).
    """

    record_id: str
    measurement_type: MeasurementType
    value: float
    unit: str
    provenance: tuple[Provenance, ...]
    latitude: float | None = None
    longitude: float | None = None
    depth_m: float | None = None
    phase: Phase = Phase.unknown
    sample_date: str | None = None
    station_label: str | None = None
    source_value: str = ""
    source_unit: str = ""
    flags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        # store floats only, so serialized forms are stable (5 and 5.0 print differently)
        for name in ("value", "latitude", "longitude", "depth_m"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, float):
                object.__setattr__(self, name, float(v))
        if not math.isfinite(self.value):
            raise ValueError(f"{self.record_id}: value must be finite, got {self.value!r}")
        if not self.provenance:
            raise ValueError(f"{self.record_id}: provenance is required")

    @property
    def kind(self) -> SourceKind:
        return self.provenance[0].kind

    @property
    def paper_id(self) -> str:
        return self.provenance[0].paper_id

    @property
    def located(self) -> bool:
        return self.latitude is not None and self.longitude is not None

    def with_flags(self, *flags: str) -> PbRecord:
        return replace(self, flags=self.flags | frozenset(flags))

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "measurement_type": self.measurement_type.value,
            "value": self.value,
            "unit": self.unit,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "depth_m": self.depth_m,
            "phase": self.phase.value,
            "sample_date": self.sample_date,
            "station_label": self.station_label,
            "source_value": self.source_value,
            "source_unit": self.source_unit,
            "flags": sorted(self.flags),
            "provenance": [p.to_dict() for p in self.provenance],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PbRecord:
        prov = d["provenance"]
        if isinstance(prov, dict):
            prov = [prov]
        return cls(
            record_id=d["record_id"],
            measurement_type=MeasurementType(d["measurement_type"]),
            value=float(d["value"]),
            unit=d.get("unit", ""),
            latitude=_opt_float(d.get("latitude")),
            longitude=_opt_float(d.get("longitude")),
            depth_m=_opt_float(d.get("depth_m")),
            phase=Phase(d.get("phase") or "unknown"),
            sample_date=d.get("sample_date") or None,
            station_label=d.get("station_label") or None,
            source_value=d.get("source_value", ""),
            source_unit=d.get("source_unit", ""),
            flags=frozenset(d.get("flags", ())),
            provenance=tuple(Provenance.from_dict(p) for p in prov),
        )


def _opt_float(v):
    if v is None or v == "":
        return None
    return float(v)
