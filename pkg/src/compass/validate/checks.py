"""Declarative, machine-run validation checks and the check runner."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from ..errors import MalformedCheckSpec
from ..records import MeasurementType, PbRecord

FATAL = "fatal"
FLAG = "flag"
SEVERITIES = (FATAL, FLAG)


@dataclass(frozen=True)
class CheckSpec:
    check_id: str
    severity: str

    kind = ""

    def applies_to(self, record: PbRecord) -> bool:
        return True

    def evaluate(self, record: PbRecord, mask) -> str | None:
        """Return ``None`` on pass, else a failure message."""
        raise NotImplementedError

    def params(self) -> dict[str, Any]:
        return {}

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "id": self.check_id, "severity": self.severity,
                "params": self.params()}


@dataclass(frozen=True)
class Range(CheckSpec):
    mtype: MeasurementType = MeasurementType.PbConc
    min: float = 0.0
    max: float = 1.0
    unit: str = ""

    kind = "range"

    def applies_to(self, record):
        return record.measurement_type == self.mtype

    def evaluate(self, record, mask):
        if record.unit != self.unit:
            return f"unit {record.unit!r} is not {self.unit!r}; range not evaluable"
        if not (self.min <= record.value <= self.max):
            return f"value {record.value!r} outside [{self.min}, {self.max}] {self.unit}"
        return None

    def params(self):
        return {"mtype": self.mtype.value, "min": self.min, "max": self.max, "unit": self.unit}


@dataclass(frozen=True)
class GeoBounds(CheckSpec):
    mask_ref: str = "ocean_1deg"

    kind = "geo_bounds"

    def evaluate(self, record, mask):
        if mask is None:
            return "no ocean mask supplied"
        if mask.name != self.mask_ref:
            return f"mask {mask.name!r} does not match {self.mask_ref!r}"
        if not record.located:
            return "record has no coordinates"
        if not mask.is_ocean(record.latitude, record.longitude):
            return f"({record.latitude}, {record.longitude}) falls on a land cell"
        return None

    def params(self):
        return {"mask_ref": self.mask_ref}


@dataclass(frozen=True)
class UnitWhitelist(CheckSpec):
    mtype: MeasurementType = MeasurementType.PbConc
    allowed_units: tuple[str, ...] = ()

    kind = "unit_whitelist"

    def applies_to(self, record):
        return record.measurement_type == self.mtype

    def evaluate(self, record, mask):
        if record.unit not in self.allowed_units:
            return f"unit {record.unit!r} not in {list(self.allowed_units)}"
        return None

    def params(self):
        return {"mtype": self.mtype.value, "allowed_units": list(self.allowed_units)}


@dataclass(frozen=True)
class RequiredFields(CheckSpec):
    fields: tuple[str, ...] = ()

    kind = "required_fields"

    def evaluate(self, record, mask):
        missing = [f for f in self.fields if getattr(record, f, None) in (None, "")]
        return f"missing {', '.join(missing)}" if missing else None

    def params(self):
        return {"fields": list(self.fields)}


@dataclass(frozen=True)
class CoordinateSanity(CheckSpec):
    kind = "coordinate_sanity"

    def evaluate(self, record, mask):
        lat, lon = record.latitude, record.longitude
        if lat is None or lon is None:
            return "record has no coordinates"
        if not (math.isfinite(lat) and math.isfinite(lon)):
            return "non-finite coordinate"
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            return f"({lat}, {lon}) outside geographic bounds"
        if lat == 0.0 and lon == 0.0:
            return "(0, 0) placeholder coordinate"
        return None


_VARIANTS = {cls.kind: cls for cls in (Range, GeoBounds, UnitWhitelist, RequiredFields, CoordinateSanity)}
_RECORD_FIELDS = set(PbRecord.__dataclass_fields__)


def parse_check(raw: Any, node_id: str, index: int) -> CheckSpec:
    """Build a CheckSpec from its tree-file form ``{kind, params, id?, severity?}``."""
    if not isinstance(raw, dict) or "kind" not in raw:
        raise MalformedCheckSpec(node_id, f"vc[{index}].check must be an object with 'kind'")
    kind = raw["kind"]
    cls = _VARIANTS.get(kind)
    if cls is None:
        raise MalformedCheckSpec(node_id, f"vc[{index}]: unknown check kind {kind!r}")
    check_id = raw.get("id") or f"{node_id}.vc{index}"
    severity = raw.get("severity", FATAL)
    if severity not in SEVERITIES:
        raise MalformedCheckSpec(node_id, f"vc[{index}]: bad severity {severity!r}")
    p = raw.get("params") or {}
    if not isinstance(p, dict):
        raise MalformedCheckSpec(node_id, f"vc[{index}]: params must be an object")
    try:
        if cls is Range:
            lo, hi = float(p["min"]), float(p["max"])
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError("need finite min < max")
            return Range(check_id, severity, MeasurementType(p["mtype"]), lo, hi, str(p["unit"]))
        if cls is GeoBounds:
            return GeoBounds(check_id, severity, str(p["mask_ref"]))
        if cls is UnitWhitelist:
            allowed = p["allowed_units"]
            if not isinstance(allowed, list) or not allowed:
                raise ValueError("allowed_units must be a non-empty list")
            return UnitWhitelist(check_id, severity, MeasurementType(p["mtype"]),
                                 tuple(str(u) for u in allowed))
        if cls is RequiredFields:
            fields = p["fields"]
            if not isinstance(fields, list) or not fields:
                raise ValueError("fields must be a non-empty list")
            unknown = [f for f in fields if f not in _RECORD_FIELDS]
            if unknown:
                raise ValueError(f"unknown record fields {unknown}")
            return RequiredFields(check_id, severity, tuple(fields))
        if p:
            raise ValueError("coordinate_sanity takes no params")
        return CoordinateSanity(check_id, severity)
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedCheckSpec(node_id, f"vc[{index}] ({kind}): {exc}") from None


@dataclass(frozen=True)
class CheckOutcome:
    record_id: str
    check_id: str
    outcome: str  # "pass" | "fail"
    message: str
    severity: str

    def to_dict(self):
        return {"record_id": self.record_id, "check_id": self.check_id, "outcome": self.outcome,
                "message": self.message, "severity": self.severity}


@dataclass
class ValidationReport:
    rows: list[CheckOutcome] = field(default_factory=list)

    @property
    def summary(self) -> dict[str, dict[str, int]]:
        counts: dict[str, Counter] = {}
        for row in self.rows:
            counts.setdefault(row.check_id, Counter())[row.outcome] += 1
        return {cid: {"pass": c["pass"], "fail": c["fail"]} for cid, c in sorted(counts.items())}

    def invalid_ids(self) -> set[str]:
        """Records with at least one fatal failure."""
        return {r.record_id for r in self.rows if r.outcome == "fail" and r.severity == FATAL}

    def failures_for(self, record_id: str) -> list[CheckOutcome]:
        return [r for r in self.rows if r.record_id == record_id and r.outcome == "fail"]

    def extend(self, other: ValidationReport) -> None:
        self.rows.extend(other.rows)

    def to_dict(self):
        return {"rows": [r.to_dict() for r in self.rows], "summary": self.summary}


def run_checks(records: Iterable[PbRecord], checks: Sequence[CheckSpec], mask=None) -> ValidationReport:
    """Evaluate every applicable check on every record.

    Pure and order-preserving: rows come out record-major in input order.
    Flag-severity failures are reported but do not make a record invalid.
    """
    report = ValidationReport()
    for rec in records:
        for check in checks:
            if not check.applies_to(rec):
                continue
            msg = check.evaluate(rec, mask)
            report.rows.append(CheckOutcome(
                rec.record_id, check.check_id,
                "pass" if msg is None else "fail", msg or "", check.severity,
            ))
    return report
