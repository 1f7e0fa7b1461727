"""Bring draft records onto canonical units, asking the backend only for unknown units."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

from ..errors import CompassError, QuarantinedSubject
from ..knowledge_tree import KnowledgeTree, assemble_prompt, resolve_node
from ..llm import CONVERSION, CompletionRequest, Gateway, parse_structured, prompt_digest
from ..records import MeasurementType, PbRecord
from ..validate.rollback import DEFAULT_MAX_ATTEMPTS, PipelineState, Step, execute_with_rollback
from .units import ProposalCache, UnitConversion, UnitRegistry, convert_units, default_registry, vet_proposal

UNIT_NODE = "unit_standardization"


def backend_proposer(tree: KnowledgeTree, gateway: Gateway, state: PipelineState,
                     registry: UnitRegistry | None = None, cache: ProposalCache | None = None,
                     max_attempts: int = DEFAULT_MAX_ATTEMPTS):
    """A proposer that runs each (unit, type) conversion as one rollback-guarded step.

    Vetting happens inside the step, so a dimensionally wrong or numerically
    unstable proposal counts as a failed attempt.
    """
    registry = registry or default_registry()
    cache = cache if cache is not None else ProposalCache()

    def propose(from_unit: str, mtype: MeasurementType) -> UnitConversion:
        context = {"from_unit": from_unit, "measurement_type": mtype.value,
                   "canonical_unit": registry.canonical[mtype]}
        bundle = assemble_prompt(resolve_node(tree, UNIT_NODE), context)
        subject = f"{mtype.value}:{from_unit}"

        def run(attempt: int) -> UnitConversion:
            completion = gateway.complete(CompletionRequest(
                bundle, max_output_tokens=128, request_tag=f"units:{subject}#{attempt}"))
            return vet_proposal(parse_structured(completion, CONVERSION), from_unit, mtype, registry)

        step = Step(f"convert_units:{subject}", subject, {"digest": prompt_digest(bundle)}, run)
        return cache.get_or_make((from_unit, mtype),
                                 lambda: execute_with_rollback(step, state, max_attempts))

    return propose


@dataclass
class StandardizeResult:
    records: list[PbRecord] = field(default_factory=list)
    rejected: list[tuple[PbRecord, str]] = field(default_factory=list)
    conversions: dict[str, dict] = field(default_factory=dict)


def standardize(records: Sequence[PbRecord], registry: UnitRegistry | None = None,
                proposer=None) -> StandardizeResult:
    """Convert every record to its canonical unit; failures are returned, not raised."""
    registry = registry or default_registry()
    out = StandardizeResult()
    for rec in records:
        try:
            value, conv = convert_units(rec.value, rec.unit, rec.measurement_type,
                                        registry=registry, proposer=proposer)
        except QuarantinedSubject as q:
            out.rejected.append((rec, f"unit conversion quarantined: {q.reason}"))
            continue
        except CompassError as exc:
            out.rejected.append((rec, f"{type(exc).__name__}: {exc}"))
            continue
        out.conversions.setdefault(f"{rec.measurement_type.value}:{rec.unit}", conv.to_dict())
        out.records.append(replace(rec, value=value, unit=conv.to_unit))
    return out
