"""Draft records from target tables: a backend column plan, then a deterministic fan-out."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from ..classify import TableCategory, parse_label
from ..corpus import ParsedPaper, TableBlock
from ..errors import InvalidPlan
from ..harmonize.headers import UNRESOLVED, HeaderMapping, normalize_headers
from ..harmonize.units import UnitRegistry, default_registry
from ..knowledge_tree import KnowledgeTree, assemble_prompt, resolve_node
from ..llm import EXTRACTION_PLAN, CompletionRequest, Gateway, parse_structured, prompt_digest
from ..records import RATIO_TYPES, MeasurementType, PbRecord, Phase, Provenance
from ..validate.rollback import DEFAULT_MAX_ATTEMPTS, PipelineState, Step, execute_with_rollback

BDL_SKIPPED = "bdl_skipped"
NON_NUMERIC = "non_numeric_cell"
EMPTY_CELL = "empty_cell"
SKIP_FLAGS = frozenset({BDL_SKIPPED, NON_NUMERIC, EMPTY_CELL})
PREVIEW_ROWS = 20

NODE_FOR_CATEGORY = {
    TableCategory.TargetPbConc: "pb_conc_extraction",
    TableCategory.Target210Pb: "pb210_extraction",
    TableCategory.TargetIsotopeRatios: "isotope_ratio_extraction",
}
FAMILY = {
    TableCategory.TargetPbConc: frozenset({MeasurementType.PbConc}),
    TableCategory.Target210Pb: frozenset({MeasurementType.Pb210Conc}),
    TableCategory.TargetIsotopeRatios: frozenset(RATIO_TYPES),
}
_METADATA_FIELDS = frozenset({"latitude", "longitude", "depth_m", "sample_date", "station_label",
                              "phase", "unit"})


@dataclass(frozen=True)
class PlanColumn:
    column: int
    header: str
    measurement_type: MeasurementType
    unit: str


@dataclass(frozen=True)
class ExtractionPlan:
    columns: tuple[PlanColumn, ...]
    phase: Phase = Phase.unknown

    def to_dict(self):
        return {"columns": [{"column": c.column, "header": c.header,
                             "measurement_type": c.measurement_type.value, "unit": c.unit}
                            for c in self.columns],
                "phase": self.phase.value}


@dataclass(frozen=True)
class SkippedCell:
    paper_id: str
    table_id: str
    row_index: int
    column: int
    cell: str
    flag: str

    def to_dict(self):
        return {"paper_id": self.paper_id, "table_id": self.table_id, "row_index": self.row_index,
                "column": self.column, "cell": self.cell, "flag": self.flag}


@dataclass
class ExtractionResult:
    drafts: list[PbRecord]
    skipped: list[SkippedCell]
    plan: ExtractionPlan
    mappings: list[HeaderMapping] = field(default_factory=list)


# -- cell parsing -----------------------------------------------------------

_BDL = re.compile(r"^(?:[<≤]|&lt;|b\.?d\.?(?:l\.?)?$|n\.?d\.?$|not detected|below\s+(?:detection|d\.?l|lod))", re.I)
_MISSING = frozenset({"", "-", "—", "–", "n.a.", "na", "n/a", "nm", "n.m.", "…", "...", "nan"})
_NUMBER = re.compile(
    r"^(?P<sign>[-+−]?)\s*(?P<num>\d[\d,]*(?:\.\d*)?|\.\d+)"
    r"(?:[eE](?P<exp>[-+]?\d+)|\s*[×x]\s*10\^?(?P<exp2>[-+−]?\d+))?"
)
_TRAILING_UNCERTAINTY = re.compile(r"^(?:\(\s*\d+(?:\.\d+)?\s*\)|(?:±|\+/-)\s*\d[\d.,]*(?:[eE][-+]?\d+)?)\s*")
_MARKER = re.compile(r"^(?:[*†‡§¶#]+|[a-h])$")


class CellSkip(Exception):
    def __init__(self, flag: str):
        self.flag = flag
        super().__init__(flag)


def _number(text: str, exp: str | None) -> float:
    if re.fullmatch(r"\d{1,3}(?:,\d{3})+(?:\.\d+)?", text):
        text = text.replace(",", "")
    elif re.fullmatch(r"\d+,\d+", text):
        text = text.replace(",", ".")
    elif "," in text:
        raise CellSkip(NON_NUMERIC)
    return float(f"{text}e{exp.replace('−', '-')}" if exp else text)


def parse_value_cell(cell: str, registry: UnitRegistry | None = None) -> tuple[float, str | None]:
    """Numeric value and any unit printed in the cell; raises CellSkip for skipped cells.

    Uncertainties (``1.2 ± 0.1``, ``1.23(4)``) and footnote markers are dropped.
    """
    s = cell.strip().translate(str.maketrans("⁰¹²³⁴⁵⁶⁷⁸⁹⁻⁺", "0123456789-+"))
    if s.lower() in _MISSING:
        raise CellSkip(EMPTY_CELL)
    if _BDL.match(s):
        raise CellSkip(BDL_SKIPPED)
    m = _NUMBER.match(s)
    if not m:
        raise CellSkip(NON_NUMERIC)
    value = _number(m.group("num"), m.group("exp") or m.group("exp2"))
    if m.group("sign") in ("-", "−"):
        value = -value
    rest = _TRAILING_UNCERTAINTY.sub("", s[m.end():].strip()).strip()
    if not rest or _MARKER.match(rest):
        return value, None
    registry = registry or default_registry()
    if registry.knows(rest):
        return value, rest
    raise CellSkip(NON_NUMERIC)


# -- plan -------------------------------------------------------------------


def _validate_plan(raw: dict, table: TableBlock, category: TableCategory,
                   mappings: Sequence[HeaderMapping]) -> ExtractionPlan:
    headers = table.column_headers
    try:
        phase = Phase(raw.get("phase") or "unknown")
    except ValueError:
        raise InvalidPlan(f"unknown phase {raw.get('phase')!r}") from None
    columns = []
    seen = set()
    for item in raw["columns"]:
        if not isinstance(item, dict):
            raise InvalidPlan(f"plan column is not an object: {item!r}")
        idx = item.get("column")
        if not isinstance(idx, int) or isinstance(idx, bool) or not 0 <= idx < len(headers):
            raise InvalidPlan(f"column index {idx!r} is outside the table")
        if idx in seen:
            raise InvalidPlan(f"column {idx} planned twice")
        seen.add(idx)
        if str(item.get("header", "")).strip().casefold() != headers[idx].strip().casefold():
            raise InvalidPlan(f"column {idx} is {headers[idx]!r}, plan says {item.get('header')!r}")
        try:
            mtype = MeasurementType(item.get("measurement_type"))
        except ValueError:
            raise InvalidPlan(f"unknown measurement_type {item.get('measurement_type')!r}") from None
        rule = mappings[idx]
        if rule.is_value and rule.measurement_type is not mtype:
            raise InvalidPlan(f"{headers[idx]!r} reads as {rule.measurement_type.value}, plan says {mtype.value}")
        if rule.canonical_field in _METADATA_FIELDS or (
                rule.canonical_field == "ignore" and rule.confidence_note != UNRESOLVED):
            raise InvalidPlan(f"{headers[idx]!r} is not a Pb measurement column ({rule.confidence_note})")
        unit = item.get("unit")
        unit = "" if unit is None else str(unit).strip()
        if not unit and rule.unit_hint:
            unit = rule.unit_hint
        columns.append(PlanColumn(idx, headers[idx], mtype, unit))
    family = FAMILY[category]
    if not any(c.measurement_type in family for c in columns):
        raise InvalidPlan(f"plan has no {category.value} column")
    for i, rule in enumerate(mappings):
        if rule.is_value and rule.measurement_type in family and i not in seen:
            raise InvalidPlan(f"plan omits Pb column {headers[i]!r}")
    unit_cols = [i for i, m in enumerate(mappings) if m.canonical_field == "unit"]
    for c in columns:
        if not c.unit and not c.measurement_type.is_ratio and not unit_cols:
            raise InvalidPlan(f"no unit for column {c.header!r}")
    return ExtractionPlan(tuple(sorted(columns, key=lambda c: c.column)), phase)


def plan_context(table: TableBlock, category: TableCategory, paper_id: str) -> dict:
    return {
        "paper_id": paper_id,
        "table_id": table.table_id,
        "category": category.value,
        "caption": table.caption,
        "headers": [{"column": i, "header": h} for i, h in enumerate(table.column_headers)],
        "rows": [list(r) for r in table.data_rows[:PREVIEW_ROWS]],
        "row_count": len(table.data_rows),
        "footnotes": list(table.footnotes),
    }


def plan_extraction(table: TableBlock, category: TableCategory, tree: KnowledgeTree,
                    gateway: Gateway, mappings: Sequence[HeaderMapping], *, paper_id: str,
                    state: PipelineState | None = None,
                    max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> ExtractionPlan:
    bundle = assemble_prompt(resolve_node(tree, NODE_FOR_CATEGORY[category]),
                             plan_context(table, category, paper_id))
    subject = f"{paper_id}/{table.table_id}"

    def run(attempt: int) -> ExtractionPlan:
        completion = gateway.complete(CompletionRequest(bundle, request_tag=f"extract:{subject}#{attempt}"))
        return _validate_plan(parse_structured(completion, EXTRACTION_PLAN), table, category, mappings)

    step = Step(f"extract_table:{subject}", subject, {"digest": prompt_digest(bundle)}, run)
    return execute_with_rollback(step, state if state is not None else PipelineState(), max_attempts)


# -- fan-out ----------------------------------------------------------------


def fan_out(plan: ExtractionPlan, table: TableBlock, paper: ParsedPaper,
            mappings: Sequence[HeaderMapping],
            registry: UnitRegistry | None = None) -> tuple[list[PbRecord], list[SkippedCell]]:
    """One draft per (data row, planned column); skipped cells are reported, never imputed."""
    unit_cols = [i for i, m in enumerate(mappings) if m.canonical_field == "unit"]
    drafts, skipped = [], []
    for row_index, row in enumerate(table.data_rows):
        row_unit = next((row[i].strip() for i in unit_cols if row[i].strip()), "")
        for col in plan.columns:
            cell = row[col.column]
            try:
                value, cell_unit = parse_value_cell(cell, registry)
            except CellSkip as skip:
                skipped.append(SkippedCell(paper.paper_id, table.table_id, row_index, col.column,
                                           cell, skip.flag))
                continue
            unit = cell_unit or row_unit or col.unit
            hint = mappings[col.column].phase_hint
            drafts.append(PbRecord(
                record_id=f"{paper.paper_id}:{table.table_id}:r{row_index}:c{col.column}",
                measurement_type=col.measurement_type,
                value=value,
                unit=unit,
                provenance=(Provenance(paper.paper_id, table.table_id, row_index, col.header,
                                       paper.source_uri, paper.doi),),
                phase=hint or plan.phase,
                source_value=cell.strip(),
                source_unit=unit,
            ))
    return drafts, skipped


def extract_table_records(table: TableBlock, category: TableCategory | str, tree: KnowledgeTree,
                          gateway: Gateway, *, paper: ParsedPaper,
                          mappings: Sequence[HeaderMapping] | None = None,
                          state: PipelineState | None = None,
                          max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                          registry: UnitRegistry | None = None) -> ExtractionResult:
    """Draft records for one target table; raises QuarantinedSubject if no valid plan emerges."""
    category = parse_label(category, TableCategory)
    if category not in NODE_FOR_CATEGORY:
        raise ValueError(f"table category {category.value!r} is not a target category")
    if mappings is None:
        mappings = normalize_headers(table.column_headers, tree, gateway,
                                     subject_id=f"{paper.paper_id}/{table.table_id}", state=state)
    plan = plan_extraction(table, category, tree, gateway, mappings, paper_id=paper.paper_id,
                           state=state, max_attempts=max_attempts)
    drafts, skipped = fan_out(plan, table, paper, mappings, registry)
    return ExtractionResult(drafts, skipped, plan, list(mappings))

