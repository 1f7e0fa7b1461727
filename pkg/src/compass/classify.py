"""Paper classification (collection phase) and table classification (extraction phase)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .corpus import ParsedPaper, TableBlock
from .errors import QuarantinedSubject, SchemaMismatch
from .knowledge_tree import KnowledgeTree, assemble_prompt, resolve_node
from .llm import LABEL, CompletionRequest, Gateway, parse_structured, prompt_digest
from .validate.rollback import DEFAULT_MAX_ATTEMPTS, PipelineState, Step, execute_with_rollback

PAPER_NODE = "paper_classification"
TABLE_NODE = "table_classification"
CLASSIFY_MAX_TOKENS = 64
TABLE_PREVIEW_ROWS = 20


class PaperCategory(str, enum.Enum):
    MarinePbConc = "Marine Pb conc."
    Marine210Pb = "Marine 210Pb"
    MarinePbIsotopeRatios = "Marine Pb isotopes ratios"
    MarinePbNonTarget = "Marine Pb (non-target)"
    AtmosphericPb = "Atmospheric Pb"
    TerrestrialPb = "Terrestrial Pb"
    AnalyticalPb = "Analytical Pb"
    IrrelevantPb = 'Irrelevant "Pb"'
    OtherMarineElements = "Other marine elements"
    UnrelatedTopics = "Unrelated topics"
    Unclassified = "Unclassified"


class TableCategory(str, enum.Enum):
    TargetPbConc = "TargetPbConc"
    Target210Pb = "Target210Pb"
    TargetIsotopeRatios = "TargetIsotopeRatios"
    NonTarget = "NonTarget"
    Unclassified = "Unclassified"


TARGET_PAPER_LABELS = frozenset({PaperCategory.MarinePbConc, PaperCategory.Marine210Pb,
                                 PaperCategory.MarinePbIsotopeRatios})
TARGET_TABLE_LABELS = frozenset({TableCategory.TargetPbConc, TableCategory.Target210Pb,
                                 TableCategory.TargetIsotopeRatios})

_COMPARTMENTS = {
    PaperCategory.MarinePbConc: "Marine Pb",
    PaperCategory.Marine210Pb: "Marine Pb",
    PaperCategory.MarinePbIsotopeRatios: "Marine Pb",
    PaperCategory.MarinePbNonTarget: "Marine Pb",
    PaperCategory.AtmosphericPb: "Atmospheric Pb",
    PaperCategory.TerrestrialPb: "Terrestrial Pb",
}


def compartment(label: PaperCategory) -> str:
    """Collapse the 10-way label onto the three-compartment task (plus Other)."""
    return _COMPARTMENTS.get(label, "Other")


def parse_label(text, enum_cls):
    """Accept either the serialized label or the enum member name."""
    if isinstance(text, enum_cls):
        return text
    key = str(text).strip()
    for member in enum_cls:
        if key == member.value or key == member.name:
            return member
    low = key.lower()
    for member in enum_cls:
        if low == member.value.lower() or low == member.name.lower():
            return member
    raise ValueError(f"{text!r} is not a {enum_cls.__name__}")


@dataclass(frozen=True)
class ClassificationResult:
    subject_id: str
    label: PaperCategory | TableCategory
    rationale: str
    bundle_digest: str

    def to_dict(self):
        return {"subject_id": self.subject_id, "label": self.label.value,
                "rationale": self.rationale, "bundle_digest": self.bundle_digest}


def _label_step(step_id, subject_id, bundle, gateway, enum_cls, allowed):
    def run(attempt: int):
        completion = gateway.complete(CompletionRequest(
            bundle, max_output_tokens=CLASSIFY_MAX_TOKENS, request_tag=f"{step_id}#{attempt}"))
        parsed = parse_structured(completion, LABEL)
        try:
            label = parse_label(parsed["label"], enum_cls)
        except ValueError:
            label = None
        if label is None or label not in allowed:
            raise SchemaMismatch([], f"label {parsed['label']!r} is not an allowed {enum_cls.__name__}")
        return label, str(parsed.get("rationale") or "")

    return Step(step_id, subject_id, {"digest": prompt_digest(bundle)}, run)


def classify_paper(paper: ParsedPaper, tree: KnowledgeTree, gateway: Gateway, *,
                   state: PipelineState | None = None, max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                   full_text: bool = False, node_id: str = PAPER_NODE) -> ClassificationResult:
    """Label a paper; persistent malformed output yields ``Unclassified``, never a guess."""
    if not (paper.title.strip() or paper.abstract.strip()):
        raise ValueError(f"{paper.paper_id}: title and abstract are empty")
    context = {"paper_id": paper.paper_id, "title": paper.title, "abstract": paper.abstract}
    if full_text:
        context["body"] = paper.body_text
    bundle = assemble_prompt(resolve_node(tree, node_id), context)
    allowed = set(PaperCategory) - {PaperCategory.Unclassified}
    step = _label_step(f"classify_paper:{paper.paper_id}", paper.paper_id, bundle, gateway,
                       PaperCategory, allowed)
    try:
        label, why = execute_with_rollback(step, state if state is not None else PipelineState(),
                                           max_attempts)
    except QuarantinedSubject as q:
        label, why = PaperCategory.Unclassified, f"quarantined: {q.reason}"
    return ClassificationResult(paper.paper_id, label, why, prompt_digest(bundle))


def classify_table(table: TableBlock, host_category: PaperCategory, tree: KnowledgeTree,
                   gateway: Gateway, *, paper_id: str = "", state: PipelineState | None = None,
                   max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                   node_id: str = TABLE_NODE) -> ClassificationResult:
    host_category = parse_label(host_category, PaperCategory)
    if host_category not in TARGET_PAPER_LABELS:
        raise ValueError(f"host paper category {host_category.value!r} is not a target category")
    subject = f"{paper_id}/{table.table_id}"
    if not table.data_rows:
        return ClassificationResult(subject, TableCategory.NonTarget, "table has no data rows", "")
    context = {
        "paper_id": paper_id,
        "table_id": table.table_id,
        "host_category": host_category.value,
        "caption": table.caption,
        "footnotes": list(table.footnotes),
        "context": list(table.context_snippets),
        "headers": table.column_headers,
        "rows": [list(r) for r in table.data_rows[:TABLE_PREVIEW_ROWS]],
        "row_count": len(table.data_rows),
    }
    bundle = assemble_prompt(resolve_node(tree, node_id), context)
    allowed = set(TableCategory) - {TableCategory.Unclassified}
    step = _label_step(f"classify_table:{subject}", subject, bundle, gateway, TableCategory, allowed)
    try:
        label, why = execute_with_rollback(step, state if state is not None else PipelineState(),
                                           max_attempts)
    except QuarantinedSubject as q:
        label, why = TableCategory.Unclassified, f"quarantined: {q.reason}"
    return ClassificationResult(subject, label, why, prompt_digest(bundle))
