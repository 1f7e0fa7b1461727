"""Benchmark scoring for paper classification, table classification and extraction."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Hashable, Iterable, Mapping, Sequence

from .classify import TARGET_PAPER_LABELS, TARGET_TABLE_LABELS, PaperCategory, TableCategory, parse_label
from .errors import KeyMismatch
from .records import MeasurementType, PbRecord

TASKS = ("paper_classification", "table_classification", "extraction")


@dataclass(frozen=True)
class MatchCriteria:
    value_rel_tol: float = 1e-6
    coord_tol_deg: float = 0.01
    depth_tol_m: float = 1.0
    require_type_equal: bool = True

    def __post_init__(self):
        if min(self.value_rel_tol, self.coord_tol_deg, self.depth_tol_m) < 0:
            raise ValueError("tolerances must be >= 0")
        if not self.require_type_equal:
            raise ValueError("records of different measurement types never match")


@dataclass(frozen=True)
class Metrics:
    accuracy: float | None
    precision: float
    recall: float
    f1: float
    counts: Mapping[str, int] = field(default_factory=dict)
    confusion: Mapping[str, Mapping[str, int]] | None = None

    def to_dict(self):
        out = {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
               "f1": self.f1, "counts": dict(self.counts)}
        if self.confusion is not None:
            out["confusion"] = {g: dict(p) for g, p in self.confusion.items()}
        return out


def f1_score(precision: float, recall: float) -> float:
    return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _key(label) -> str:
    return label.value if hasattr(label, "value") else str(label)


def score_classification(predictions: Mapping[Hashable, Any], gold: Mapping[Hashable, Any],
                         positive_set: Iterable) -> Metrics:
    """Accuracy over all items; micro precision/recall/F1 over the positive labels.

    An item is a true positive when prediction equals gold and both are in the
    positive set, so ``Unclassified`` (never positive) only ever costs recall.
    """
    if set(predictions) != set(gold):
        missing = sorted(map(str, set(gold) - set(predictions)))[:5]
        extra = sorted(map(str, set(predictions) - set(gold)))[:5]
        raise KeyMismatch(f"prediction/gold keys differ (missing {missing}, extra {extra})")
    positives = {_key(p) for p in positive_set}
    tp = correct = pred_pos = gold_pos = 0
    confusion: dict[str, Counter] = defaultdict(Counter)
    for k, g in gold.items():
        g, p = _key(g), _key(predictions[k])
        confusion[g][p] += 1
        correct += p == g
        pred_pos += p in positives
        gold_pos += g in positives
        tp += p == g and p in positives
    precision, recall = _ratio(tp, pred_pos), _ratio(tp, gold_pos)
    return Metrics(
        accuracy=correct / len(gold) if gold else None,
        precision=precision, recall=recall, f1=f1_score(precision, recall),
        counts={"items": len(gold), "correct": correct, "true_positive": tp,
                "predicted_positive": pred_pos, "gold_positive": gold_pos},
        confusion={g: dict(sorted(c.items())) for g, c in sorted(confusion.items())},
    )


def compatible(a: PbRecord, b: PbRecord, criteria: MatchCriteria) -> bool:
    """Symmetric match test: same paper and type, value, position and depth within tolerance."""
    if a.paper_id != b.paper_id or a.measurement_type is not b.measurement_type:
        return False
    if abs(a.value - b.value) > criteria.value_rel_tol * max(abs(a.value), abs(b.value)):
        return False
    if a.located != b.located:
        return False
    if a.located and (abs(a.latitude - b.latitude) > criteria.coord_tol_deg
                      or abs(a.longitude - b.longitude) > criteria.coord_tol_deg):
        return False
    if (a.depth_m is None) != (b.depth_m is None):
        return False
    return a.depth_m is None or abs(a.depth_m - b.depth_m) <= criteria.depth_tol_m


def maximum_matching(adjacency: Sequence[Sequence[int]], n_right: int) -> list[int | None]:
    """Maximum bipartite matching by augmenting paths; returns left-to-right assignment."""
    match_right: list[int | None] = [None] * n_right
    match_left: list[int | None] = [None] * len(adjacency)
    for start in range(len(adjacency)):
        # iterative DFS for an augmenting path from ``start``
        parent_of_right: dict[int, int] = {}
        stack = [(start, iter(adjacency[start]))]
        visited = set()
        found = None
        while stack and found is None:
            u, it = stack[-1]
            for v in it:
                if v in visited:
                    continue
                visited.add(v)
                parent_of_right[v] = u
                if match_right[v] is None:
                    found = v
                    break
                stack.append((match_right[v], iter(adjacency[match_right[v]])))
                break
            else:
                stack.pop()
        if found is None:
            continue
        v = found
        while v is not None:
            u = parent_of_right[v]
            prev = match_left[u]
            match_left[u], match_right[v] = v, u
            v = prev
    return match_left


@dataclass(frozen=True)
class ExtractionScore:
    metrics: Metrics
    per_paper_recall: float | None
    per_paper: Mapping[str, float]
    pairs: tuple[tuple[str, str], ...]


def score_extraction(predicted: Sequence[PbRecord], gold: Sequence[PbRecord],
                     criteria: MatchCriteria = MatchCriteria()) -> ExtractionScore:
    """One-to-one maximum matching of predicted to gold records under ``criteria``.

    Per-paper recall is the mean over papers holding at least one gold record.
    Extraction has no negative class, so accuracy is reported as None.
    """
    by_group: dict[tuple, list[int]] = defaultdict(list)
    for j, g in enumerate(gold):
        by_group[(g.paper_id, g.measurement_type)].append(j)
    adjacency = [[j for j in by_group.get((p.paper_id, p.measurement_type), ())
                  if compatible(p, gold[j], criteria)] for p in predicted]
    assignment = maximum_matching(adjacency, len(gold))
    pairs = tuple(sorted((predicted[i].record_id, gold[j].record_id)
                         for i, j in enumerate(assignment) if j is not None))
    tp = len(pairs)
    precision, recall = _ratio(tp, len(predicted)), _ratio(tp, len(gold))
    gold_per_paper = Counter(g.paper_id for g in gold)
    hit_per_paper = Counter(gold[j].paper_id for j in assignment if j is not None)
    per_paper = {pid: hit_per_paper[pid] / n for pid, n in sorted(gold_per_paper.items())}
    mean = sum(per_paper.values()) / len(per_paper) if per_paper else None
    metrics = Metrics(None, precision, recall, f1_score(precision, recall),
                      {"predicted": len(predicted), "gold": len(gold), "true_positive": tp})
    return ExtractionScore(metrics, mean, per_paper, pairs)


# -- gold / prediction files ------------------------------------------------


@dataclass
class GoldSet:
    paper_labels: dict[str, PaperCategory] = field(default_factory=dict)
    table_labels: dict[tuple[str, str], TableCategory] = field(default_factory=dict)
    gold_records: list[PbRecord] = field(default_factory=list)

    def check(self) -> None:
        for r in self.gold_records:
            key = (r.paper_id, r.provenance[0].table_id)
            if self.table_labels.get(key) not in TARGET_TABLE_LABELS:
                raise ValueError(f"gold record {r.record_id} sits in {key}, which is not a labelled target table")

    def to_dict(self):
        return {"paper_labels": {k: v.value for k, v in sorted(self.paper_labels.items())},
                "table_labels": [{"paper_id": p, "table_id": t, "label": v.value}
                                 for (p, t), v in sorted(self.table_labels.items())],
                "records": [r.to_dict() for r in self.gold_records]}


def labelled_set_from_dict(doc: Mapping, *, strict: bool = True) -> GoldSet:
    """Parse the shared gold/prediction document; ``strict`` enforces the gold invariant."""
    tables = doc.get("table_labels") or []
    if isinstance(tables, Mapping):
        tables = [dict(zip(("paper_id", "table_id"), k.split("/", 1)), label=v) for k, v in tables.items()]
    out = GoldSet(
        paper_labels={k: parse_label(v, PaperCategory) for k, v in (doc.get("paper_labels") or {}).items()},
        table_labels={(t["paper_id"], t["table_id"]): parse_label(t["label"], TableCategory) for t in tables},
        gold_records=[PbRecord.from_dict(r) for r in doc.get("records") or []],
    )
    if strict:
        out.check()
    return out


def load_labelled_set(path: str | Path, *, strict: bool = True) -> GoldSet:
    return labelled_set_from_dict(json.loads(Path(path).read_text(encoding="utf-8")), strict=strict)


def _align(pred: Mapping, gold: Mapping, fill, task: str, notes: list[str]) -> dict:
    missing = [k for k in gold if k not in pred]
    extra = [k for k in pred if k not in gold]
    if missing:
        notes.append(f"{task}: {len(missing)} gold item(s) without a prediction scored as {_key(fill)}")
    if extra:
        notes.append(f"{task}: {len(extra)} prediction(s) outside the gold set ignored")
    return {k: pred.get(k, fill) for k in gold}


@dataclass
class MetricsReport:
    tasks: dict[str, Metrics | None]
    per_paper_recall: float | None
    per_paper: dict[str, float]
    per_type_counts: dict[str, dict[str, int]]
    notes: list[str] = field(default_factory=list)

    def to_dict(self):
        return {"tasks": {k: (v.to_dict() if v else None) for k, v in self.tasks.items()},
                "per_paper_recall": self.per_paper_recall, "per_paper": self.per_paper,
                "per_type_counts": self.per_type_counts, "notes": list(self.notes)}


def _type_counts(records: Iterable[PbRecord]) -> dict[str, int]:
    c = Counter(r.measurement_type.value for r in records)
    return {t.value: c.get(t.value, 0) for t in MeasurementType}


def evaluate(pred: GoldSet, gold: GoldSet, criteria: MatchCriteria = MatchCriteria()) -> MetricsReport:
    """Score a prediction document against gold for all three tasks."""
    notes: list[str] = []
    tasks: dict[str, Metrics | None] = {}
    if gold.paper_labels:
        aligned = _align(pred.paper_labels, gold.paper_labels, PaperCategory.Unclassified, TASKS[0], notes)
        tasks[TASKS[0]] = score_classification(aligned, gold.paper_labels, TARGET_PAPER_LABELS)
    else:
        tasks[TASKS[0]] = None
        notes.append("no gold paper labels")
    if gold.table_labels:
        aligned = _align(pred.table_labels, gold.table_labels, TableCategory.Unclassified, TASKS[1], notes)
        tasks[TASKS[1]] = score_classification(aligned, gold.table_labels, TARGET_TABLE_LABELS)
    else:
        tasks[TASKS[1]] = None
        notes.append("no gold table labels")
    per_paper_recall, per_paper = None, {}
    if gold.gold_records:
        score = score_extraction(pred.gold_records, gold.gold_records, criteria)
        tasks[TASKS[2]] = score.metrics
        per_paper_recall, per_paper = score.per_paper_recall, dict(score.per_paper)
    else:
        tasks[TASKS[2]] = None
        notes.append("no gold records")
    counts = {"predicted": _type_counts(pred.gold_records), "gold": _type_counts(gold.gold_records)}
    return MetricsReport(tasks, per_paper_recall, per_paper, counts, notes)


def _fmt(x: float | None) -> str:
    return "-" if x is None else f"{x:.3f}"


def report(metrics: MetricsReport, run_manifest: Mapping | None = None) -> tuple[str, dict[str, Any]]:
    """Deterministic text table plus the matching JSON document."""
    lines = [f"{'task':<24}{'acc':>8}{'prec':>8}{'rec':>8}{'f1':>8}"]
    for name in TASKS:
        m = metrics.tasks.get(name)
        if m is None:
            lines.append(f"{name:<24}{'(omitted)':>32}")
        else:
            lines.append(f"{name:<24}{_fmt(m.accuracy):>8}{_fmt(m.precision):>8}"
                         f"{_fmt(m.recall):>8}{_fmt(m.f1):>8}")
    if metrics.per_paper_recall is not None:
        lines.append(f"per-paper recall (extraction): {metrics.per_paper_recall:.3f} "
                     f"over {len(metrics.per_paper)} paper(s)")
    lines.append("")
    lines.append(f"{'records by type':<24}{'predicted':>10}{'gold':>8}")
    for t in MeasurementType:
        lines.append(f"{t.value:<24}{metrics.per_type_counts['predicted'][t.value]:>10}"
                     f"{metrics.per_type_counts['gold'][t.value]:>8}")
    for note in metrics.notes:
        lines.append(f"note: {note}")
    doc = metrics.to_dict()
    if run_manifest is not None:
        doc["run"] = {k: run_manifest[k] for k in ("run_id", "config_digest", "counts") if k in run_manifest}
        lines.append(f"run: {doc['run'].get('run_id', '?')}")
    return "\n".join(lines) + "\n", doc
