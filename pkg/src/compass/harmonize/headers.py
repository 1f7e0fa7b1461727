"""Header normalization onto the unified record schema.

A deterministic alias layer resolves the common spellings; what it cannot
place goes to the backend in one batch, and anything still unplaced maps to
``ignore`` with an ``unresolved`` note.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from ..errors import QuarantinedSubject, SchemaMismatch
from ..knowledge_tree import KnowledgeTree, assemble_prompt, resolve_node
from ..llm import HEADER_MAPPINGS, CompletionRequest, Gateway, parse_structured, prompt_digest
from ..records import MeasurementType, Phase
from ..validate.rollback import DEFAULT_MAX_ATTEMPTS, PipelineState, Step, execute_with_rollback

HEADER_NODE = "header_normalization"
FIELDS = ("measurement_type", "value", "unit", "latitude", "longitude", "depth_m", "phase",
          "sample_date", "station_label", "ignore")

ALIAS = "alias"
RATIO = "ratio notation"
RECIPROCAL = "reciprocal ratio"
UNCERTAINTY = "uncertainty column"
BACKEND = "backend"
UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class HeaderMapping:
    source_header: str
    canonical_field: str
    confidence_note: str
    measurement_type: MeasurementType | None = None
    unit_hint: str | None = None
    phase_hint: Phase | None = None

    def __post_init__(self):
        if self.canonical_field not in FIELDS:
            raise ValueError(f"unknown canonical field {self.canonical_field!r}")
        if (self.canonical_field == "value") != (self.measurement_type is not None):
            raise ValueError("value columns, and only value columns, carry a measurement type")

    @property
    def is_value(self) -> bool:
        return self.canonical_field == "value"

    def to_dict(self):
        return {"source_header": self.source_header, "canonical_field": self.canonical_field,
                "confidence_note": self.confidence_note,
                "measurement_type": self.measurement_type.value if self.measurement_type else None,
                "unit_hint": self.unit_hint,
                "phase_hint": self.phase_hint.value if self.phase_hint else None}


def _load_aliases(path: Path | None = None) -> dict[str, frozenset[str]]:
    path = path or Path(__file__).resolve().parent.parent / "data" / "header_aliases.json"
    raw = json.loads(path.read_text(encoding="utf-8"))
    return {k: frozenset(v) for k, v in raw.items()}


_ALIASES = _load_aliases()

_SUPERSCRIPTS = str.maketrans("⁰¹²³⁴⁵⁶⁷⁸⁹", "0123456789")
_UNIT_SUFFIX = re.compile(r"^(?P<base>.*?\S)\s*(?:\((?P<p>[^()]*)\)|\[(?P<b>[^\[\]]*)\])\s*$")
_UNCERTAINTY = re.compile(r"±|\+/-|\b2\s*[σs]\b|σ|\b[12]?\s*s\.?[de]\.?\b|\berr(?:or)?\b|uncert|\bstd\b")
_RATIO = re.compile(r"^(?:pb)?(\d{3})(?:pb)?/(?:pb)?(\d{3})(?:pb)?(?:ratio)?$")
_PB210 = re.compile(r"^(?:pb-?210|210-?pb)")


def clean_header(header: str) -> tuple[str, str | None]:
    """Lowercased lookup key and the unit hint from a trailing ``(...)`` or ``[...]``."""
    s = header.translate(_SUPERSCRIPTS)
    s = re.sub(r"\\(?:mathrm|text|textsuperscript|rm)\s*", "", s)
    s = re.sub(r"[${}^\\]", "", s)
    s = re.sub(r"\s+", " ", s).strip()
    unit = None
    m = _UNIT_SUFFIX.match(s)
    if m:
        unit = (m.group("p") if m.group("p") is not None else m.group("b")).strip() or None
        s = m.group("base")
    key = s.lower().rstrip(":").strip()
    key = re.sub(r"\bpb[- ]?210\b|\b210[- ]pb\b", "210pb", key)
    return key, unit


def phase_hint(key: str) -> Phase | None:
    if re.search(r"particulate|\bpart\b|\bpart\.|^ppb$|^pbp$|210pbp$", key):
        return Phase.particulate
    if re.search(r"dissolved|\bdiss\b|\bdiss\.|^dpb$|^pbd$|210pbd$", key):
        return Phase.dissolved
    if re.search(r"\btotal\b|210pbtot$|^tdpb$", key):
        return Phase.total
    return None


def rule_mapping(header: str) -> HeaderMapping | None:
    """Resolve ``header`` from the bundled alias table and ratio notation, or None."""
    key, unit = clean_header(header)
    if _UNCERTAINTY.search(key):
        return HeaderMapping(header, "ignore", UNCERTAINTY, unit_hint=unit)
    m = _RATIO.match(re.sub(r"[\s_\-]", "", key))
    if m:
        a, b = m.groups()
        name = f"R{a}_{b}"
        if name in MeasurementType.__members__:
            return HeaderMapping(header, "value", RATIO, MeasurementType[name], unit, None)
        note = RECIPROCAL if f"R{b}_{a}" in MeasurementType.__members__ else UNRESOLVED
        return HeaderMapping(header, "ignore", note, unit_hint=unit)
    for candidate in (key, key.rstrip(".")):
        if candidate in _ALIASES["ignore"]:
            return HeaderMapping(header, "ignore", ALIAS, unit_hint=unit)
        if candidate in _ALIASES["pb210"]:
            return HeaderMapping(header, "value", ALIAS, MeasurementType.Pb210Conc, unit,
                                 phase_hint(candidate))
        if candidate in _ALIASES["pb_conc"]:
            return HeaderMapping(header, "value", ALIAS, MeasurementType.PbConc, unit,
                                 phase_hint(candidate))
        for field in ("latitude", "longitude", "depth_m", "sample_date", "station_label",
                      "phase", "unit"):
            if candidate in _ALIASES[field]:
                return HeaderMapping(header, field, ALIAS, unit_hint=unit)
    return None


def _backend_step(headers: list[str], subject: str, tree, gateway):
    bundle = assemble_prompt(resolve_node(tree, HEADER_NODE), {"headers": headers})

    def run(attempt: int):
        completion = gateway.complete(CompletionRequest(bundle, request_tag=f"headers:{subject}#{attempt}"))
        parsed = parse_structured(completion, HEADER_MAPPINGS)
        out: dict[str, HeaderMapping] = {}
        for item in parsed["mappings"]:
            if not isinstance(item, dict) or item.get("header") not in headers:
                raise SchemaMismatch([], f"mapping for an unknown header: {item!r}")
            field = item.get("field")
            if field not in FIELDS:
                raise SchemaMismatch([], f"unknown field {field!r}")
            mtype = None
            if field == "value":
                try:
                    mtype = MeasurementType(item.get("measurement_type"))
                except ValueError:
                    raise SchemaMismatch([], f"bad measurement_type {item.get('measurement_type')!r}") from None
            elif field == "measurement_type":
                # a column naming the type of each row is not something drafts can use
                field = "ignore"
            key, unit = clean_header(item["header"])
            mapping = HeaderMapping(item["header"], field, BACKEND, mtype, unit,
                                    phase_hint(key) if mtype is not None else None)
            if out.setdefault(item["header"], mapping) != mapping:
                raise SchemaMismatch([], f"conflicting mappings for {item['header']!r}")
        return out

    return Step(f"normalize_headers:{subject}", subject, {"digest": prompt_digest(bundle)}, run)


def normalize_headers(headers: Sequence[str], tree: KnowledgeTree | None = None,
                      gateway: Gateway | None = None, *, subject_id: str = "headers",
                      state: PipelineState | None = None,
                      max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> list[HeaderMapping]:
    """One mapping per header, in order; never raises for an unplaceable header."""
    if not headers:
        raise ValueError("headers must be non-empty")
    resolved: dict[str, HeaderMapping] = {}
    pending = []
    for h in headers:
        m = rule_mapping(h)
        if m is not None:
            resolved[h] = m
        elif h not in pending and h.strip():
            pending.append(h)
    if pending and tree is not None and gateway is not None:
        step = _backend_step(pending, subject_id, tree, gateway)
        try:
            resolved.update(execute_with_rollback(step, state if state is not None else PipelineState(),
                                                  max_attempts))
        except QuarantinedSubject:
            pass
    return [resolved.get(h) or HeaderMapping(h, "ignore", UNRESOLVED, unit_hint=clean_header(h)[1])
            for h in headers]


def mappings_by_field(mappings: Sequence[HeaderMapping]) -> Mapping[str, list[int]]:
    """Column indices per canonical field."""
    out: dict[str, list[int]] = {}
    for i, m in enumerate(mappings):
        out.setdefault(m.canonical_field, []).append(i)
    return out
