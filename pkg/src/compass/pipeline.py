"""End-to-end driver: collection, extraction and aggregation over a local corpus."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from ._digest import canonical_json, stable_digest
from .classify import (
    TARGET_PAPER_LABELS,
    TARGET_TABLE_LABELS,
    ClassificationResult,
    PaperCategory,
    TableCategory,
    classify_paper,
    classify_table,
)
from .corpus import ParsedPaper, keyword_search, load_corpus
from .errors import BackendError, ContextTooLarge, QuarantinedSubject
from .extract.associate import UNLOCATED, associate_metadata
from .extract.tables import extract_table_records
from .harmonize.fusion import load_external, merge_sources, tally
from .harmonize.headers import normalize_headers
from .harmonize.standardize import backend_proposer, standardize
from .harmonize.units import ProposalCache, load_registry
from .knowledge_tree import KnowledgeTree, bundled_tree_path, collect_checks, load_tree
from .llm import FaultInjectingBackend, Gateway, HttpBackend, MockBackend, MockFixtureTable
from .records import MeasurementType, PbRecord
from .store import RecordStore
from .validate.checks import FATAL, ValidationReport, run_checks
from .validate.ocean import load_mask
from .validate.rollback import PipelineState

log = logging.getLogger(__name__)

DEFAULT_KEYWORDS = ("Pb", "lead", "210Pb", "lead isotope")
BUNDLED_DIR = Path(__file__).parent / "data"

CHECK_NODE = {
    MeasurementType.PbConc: "pb_conc_extraction",
    MeasurementType.Pb210Conc: "pb210_extraction",
    MeasurementType.R206_204: "pb_isotope_206_204",
    MeasurementType.R207_204: "pb_isotope_207_204",
    MeasurementType.R208_204: "pb_isotope_208_204",
    MeasurementType.R206_207: "pb_isotope_206_207",
    MeasurementType.R208_206: "pb_isotope_208_206",
    MeasurementType.R208_207: "pb_isotope_208_207",
}

OUTPUT_FILES = ("records.jsonl", "records.idx.json", "quarantine.jsonl", "manifest.json",
                "validation_report.json", "state_log.json", "predictions.json", "merge_log.json")


@dataclass
class PipelineConfig:
    corpus_path: str
    output_dir: str
    tree_path: str | None = None
    backend: str = "mock"
    fixtures_path: str | None = None
    endpoint: str | None = None
    model: str | None = None
    keywords: list[str] = field(default_factory=lambda: list(DEFAULT_KEYWORDS))
    max_parallel: int = 4
    max_attempts: int = 2
    gateway_attempts: int = 3
    tolerances: dict[str, float] = field(default_factory=lambda: {
        "coord_tol_deg": 0.01, "depth_tol_m": 1.0, "value_rel_tol": 1e-6})
    canonical_units: dict[str, str] = field(default_factory=dict)
    externals: list[str] = field(default_factory=list)
    fault_injection: str | None = None
    full_text: bool = False
    seed_note: str = "mock runs are seedless-deterministic"

    def __post_init__(self):
        if self.backend not in ("mock", "http"):
            raise ValueError(f"backend must be mock or http, not {self.backend!r}")
        if self.max_attempts < 1 or self.max_parallel < 1:
            raise ValueError("max_attempts and max_parallel must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PipelineConfig:
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> PipelineConfig:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @property
    def digest(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        return stable_digest(d)

    def check_paths(self) -> None:
        """Raise FileNotFoundError for any input path that does not resolve."""
        needed = [("corpus", self.corpus_path), ("tree", self.tree_path)]
        if self.backend == "mock":
            needed.append(("fixtures", self.fixtures_path))
        needed += [("external dataset", p) for p in self.externals]
        for what, p in needed:
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(f"{what} path does not exist: {p}")
        if self.backend == "mock" and self.fixtures_path is None:
            raise FileNotFoundError("the mock backend needs a fixtures file")
        if self.backend == "http" and not (self.endpoint and self.model):
            raise ValueError("the http backend needs an endpoint and a model")


@dataclass
class RunManifest:
    run_id: str
    config_digest: str
    counts: dict[str, int]
    rollback_events: int
    max_attempt_seen: int
    store_digest: str
    by_type: dict[str, int]
    by_source: dict[str, int]
    load_warnings: list[str]
    wall_time_s: float = 0.0

    def to_dict(self):
        return asdict(self)

    @property
    def partial(self) -> bool:
        return self.counts["records_quarantined"] > 0 or self.counts["subjects_quarantined"] > 0


@dataclass
class PaperOutcome:
    paper_id: str
    classification: ClassificationResult | None
    tables: dict[str, ClassificationResult] = field(default_factory=dict)
    records: list[PbRecord] = field(default_factory=list)
    quarantine: list[dict[str, Any]] = field(default_factory=list)
    skipped: list[dict[str, Any]] = field(default_factory=list)
    state: PipelineState = field(default_factory=PipelineState)


def make_gateway(config: PipelineConfig) -> Gateway:
    if config.backend == "mock":
        backend = MockBackend(MockFixtureTable.load(config.fixtures_path))
    else:
        backend = HttpBackend(config.endpoint, config.model)
    if config.fault_injection:
        backend = FaultInjectingBackend(backend, config.fault_injection)
    return Gateway(backend, max_attempts=config.gateway_attempts, max_parallel=config.max_parallel)


def _subject_entry(subject_id: str, stage: str, reason: str) -> dict[str, Any]:
    return {"subject_id": subject_id, "stage": stage, "reason": reason}


def _record_entry(rec: PbRecord, stage: str, reason: str) -> dict[str, Any]:
    return {"record_id": rec.record_id, "stage": stage, "reason": reason, "record": rec.to_dict()}


def process_paper(paper: ParsedPaper, tree: KnowledgeTree, gateway: Gateway, registry,
                  config: PipelineConfig) -> PaperOutcome:
    """Classify one keyword-hit paper and, if it is a target, extract and standardize its tables."""
    out = PaperOutcome(paper.paper_id, None)
    state = out.state
    try:
        out.classification = classify_paper(paper, tree, gateway, state=state,
                                            max_attempts=config.max_attempts, full_text=config.full_text)
    except (ValueError, ContextTooLarge, BackendError) as exc:
        out.quarantine.append(_subject_entry(paper.paper_id, "classify_paper", str(exc)))
        return out
    if out.classification.label is PaperCategory.Unclassified:
        out.quarantine.append(_subject_entry(paper.paper_id, "classify_paper", out.classification.rationale))
    if out.classification.label not in TARGET_PAPER_LABELS:
        return out

    mappings = {}
    for table in paper.tables:
        subject = f"{paper.paper_id}/{table.table_id}"
        try:
            mappings[table.table_id] = normalize_headers(table.column_headers, tree, gateway,
                                                         subject_id=subject, state=state,
                                                         max_attempts=config.max_attempts)
        except (ValueError, ContextTooLarge, BackendError) as exc:
            out.quarantine.append(_subject_entry(subject, "normalize_headers", str(exc)))

    drafts = []
    for table in paper.tables:
        subject = f"{paper.paper_id}/{table.table_id}"
        try:
            result = classify_table(table, out.classification.label, tree, gateway, paper_id=paper.paper_id,
                                    state=state, max_attempts=config.max_attempts)
        except (ContextTooLarge, BackendError) as exc:
            out.quarantine.append(_subject_entry(subject, "classify_table", str(exc)))
            continue
        out.tables[table.table_id] = result
        if result.label is TableCategory.Unclassified:
            out.quarantine.append(_subject_entry(subject, "classify_table", result.rationale))
        if result.label not in TARGET_TABLE_LABELS or table.table_id not in mappings:
            continue
        try:
            extraction = extract_table_records(table, result.label, tree, gateway, paper=paper,
                                               mappings=mappings[table.table_id], state=state,
                                               max_attempts=config.max_attempts, registry=registry)
        except QuarantinedSubject as q:
            out.quarantine.append(_subject_entry(subject, "extract_table", q.reason))
            continue
        except (ContextTooLarge, BackendError) as exc:
            out.quarantine.append(_subject_entry(subject, "extract_table", str(exc)))
            continue
        out.skipped += [s.to_dict() for s in extraction.skipped]
        drafts += associate_metadata(extraction.drafts, table, paper, mappings=mappings[table.table_id],
                                     table_mappings=mappings)

    located = []
    for rec in drafts:
        if UNLOCATED in rec.flags:
            out.quarantine.append(_record_entry(rec, "associate", UNLOCATED))
        else:
            located.append(rec)
    proposer = backend_proposer(tree, gateway, state, registry, ProposalCache(), config.max_attempts)
    std = standardize(located, registry, proposer)
    out.quarantine += [_record_entry(rec, "convert_units", why) for rec, why in std.rejected]
    out.records = std.records
    return out


def validate_records(records: list[PbRecord], tree: KnowledgeTree, mask) -> tuple[list[PbRecord], list[tuple[PbRecord, str]], ValidationReport]:
    """Run each record's inherited checks; fatal failures are split off, flag failures annotated."""
    report = ValidationReport()
    for mtype in MeasurementType:
        group = [r for r in records if r.measurement_type is mtype]
        if group:
            report.extend(run_checks(group, collect_checks(tree, CHECK_NODE[mtype]), mask))
    invalid = report.invalid_ids()
    passed, failed = [], []
    for rec in records:
        fails = report.failures_for(rec.record_id)
        if rec.record_id in invalid:
            failed.append((rec, "; ".join(f"{o.check_id}: {o.message}" for o in fails if o.severity == FATAL)))
            continue
        flags = [f"check_flag:{o.check_id}" for o in fails]
        passed.append(rec.with_flags(*flags) if flags else rec)
    return passed, failed, report


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _write_jsonl(path: Path, rows) -> None:
    path.write_text("".join(canonical_json(r) + "\n" for r in rows), encoding="utf-8")


def run_pipeline(config: PipelineConfig, gateway: Gateway | None = None) -> RunManifest:
    """C -> E -> A over the configured corpus; writes every run artifact into ``output_dir``.

    ``gateway`` replaces the one the config describes (tests and fixture builds).
    """
    t0 = time.perf_counter()
    if gateway is None:
        config.check_paths()
    tree = load_tree(config.tree_path or bundled_tree_path())
    corpus = load_corpus(config.corpus_path)
    registry = load_registry(canonical_overrides=config.canonical_units or None)
    externals = [load_external(p, registry=registry) for p in config.externals]
    mask = load_mask()
    gateway = gateway or make_gateway(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in OUTPUT_FILES:
        (out_dir / name).unlink(missing_ok=True)

    hits = set(keyword_search(corpus, config.keywords)) if len(corpus) else set()
    targets = [p for p in corpus if p.paper_id in hits]
    with ThreadPoolExecutor(max_workers=config.max_parallel) as pool:
        outcomes = list(pool.map(lambda p: process_paper(p, tree, gateway, registry, config), targets))

    state = PipelineState()
    quarantine: list[dict[str, Any]] = []
    skipped: list[dict[str, Any]] = []
    extracted: list[PbRecord] = []
    paper_labels = {p.paper_id: PaperCategory.Unclassified.value for p in corpus}
    table_labels = {}
    for o in sorted(outcomes, key=lambda o: o.paper_id):
        state.absorb(o.state)
        quarantine += o.quarantine
        skipped += o.skipped
        extracted += o.records
        if o.classification is not None:
            paper_labels[o.paper_id] = o.classification.label.value
        for tid, res in o.tables.items():
            table_labels[f"{o.paper_id}/{tid}"] = res.label.value

    validated, failed, report = validate_records(extracted, tree, mask)
    quarantine += [_record_entry(rec, "validate", why) for rec, why in failed]
    ext_ok = []
    for ds in externals:
        ok, bad, ext_report = validate_records(list(ds.records), tree, mask)
        report.extend(ext_report)
        quarantine += [_record_entry(rec, "validate_external", why) for rec, why in bad]
        ext_ok.append(replace(ds, records=tuple(ok)))

    tol = config.tolerances
    unified = merge_sources(validated, ext_ok, tol["coord_tol_deg"], tol["depth_tol_m"], tol["value_rel_tol"])
    store = RecordStore(out_dir / "records.jsonl")
    store.append(unified.records)

    extracted_ids = {r.record_id for r in extracted} | {e["record_id"] for e in quarantine if "record_id" in e
                                                        and e["stage"] in ("associate", "convert_units")}
    q_records = [e for e in quarantine if "record_id" in e and e["stage"] != "validate_external"]
    survivors_extracted = sum(1 for r in unified.records if r.kind.value == "extracted")
    dedup_removed_extracted = sum(1 for e in unified.merge_log if e["absorbed_kind"] == "extracted")
    counts = {
        "papers_seen": len(corpus),
        "papers_keyword_hits": len(hits),
        "papers_target": sum(1 for o in outcomes if o.classification is not None
                             and o.classification.label in TARGET_PAPER_LABELS),
        "tables_seen": sum(len(o.tables) for o in outcomes),
        "tables_target": sum(1 for o in outcomes for r in o.tables.values() if r.label in TARGET_TABLE_LABELS),
        "records_extracted": len(extracted_ids),
        "records_validated": survivors_extracted,
        "records_quarantined": len(q_records),
        "dedup_removed": dedup_removed_extracted,
        "records_fused": len(unified.records),
        "external_records": sum(len(ds.records) for ds in externals),
        "external_quarantined": sum(1 for e in quarantine if e["stage"] == "validate_external"),
        "cells_skipped": len(skipped),
        "subjects_quarantined": sum(1 for e in quarantine if "record_id" not in e),
    }
    store_bytes = (out_dir / "records.jsonl").read_bytes() if (out_dir / "records.jsonl").exists() else b""
    fused = tally(unified.records)
    digest = stable_digest({"config": config.digest, "papers": sorted(corpus.papers)})
    manifest = RunManifest(
        run_id=f"run-{digest[:12]}",
        config_digest=config.digest,
        counts=counts,
        rollback_events=len(state.rollback_events),
        max_attempt_seen=max((e.attempt for e in state.entries), default=0),
        store_digest=stable_digest(store_bytes.decode("utf-8")),
        by_type=fused["by_type"],
        by_source=fused["by_source"],
        load_warnings=list(corpus.load_warnings),
        wall_time_s=round(time.perf_counter() - t0, 3),
    )
    if not store_bytes:
        (out_dir / "records.jsonl").write_text("", encoding="utf-8")
    _write_jsonl(out_dir / "quarantine.jsonl", quarantine)
    _write_json(out_dir / "validation_report.json", report.to_dict())
    _write_json(out_dir / "state_log.json", state.to_dict())
    _write_json(out_dir / "merge_log.json", {"merge_log": unified.merge_log, "counts": unified.counts,
                                            "skipped_cells": skipped})
    _write_json(out_dir / "predictions.json", {
        "paper_labels": dict(sorted(paper_labels.items())),
        "table_labels": dict(sorted(table_labels.items())),
        "records": [r.to_dict() for r in sorted(validated, key=lambda r: r.record_id)],
    })
    _write_json(out_dir / "manifest.json", manifest.to_dict())
    return manifest
