"""Expert knowledge tree: loading, lookup, prompt assembly and check collection.

A tree file is UTF-8 JSON::

    {"version": "...", "domain": "...", "root": "<id>",
     "nodes": [{"id", "label", "task", "parent", "children",
                "bk": [...], "lc": [...], "og": [...], "vc": [...],
                "categories": [...]?}]}

``og`` items are strings or ``{"step", "format"}``; ``vc`` items are strings
or ``{"text", "check"?}`` where ``check`` is ``{"kind", "params", "id"?,
"severity"?}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from ._digest import stable_digest
from .errors import (
    ContextTooLarge,
    CycleDetected,
    DanglingParent,
    DuplicateId,
    InconsistentLink,
    MultipleRoots,
    TreeError,
    UnknownNode,
)
from .validate.checks import CheckSpec, parse_check

DEFAULT_TOKEN_BUDGET = 6000

SYSTEM_TEXT = (
    "You are a careful data curator for marine lead (Pb) geochemistry. "
    "Apply the knowledge sections below and reply only in the requested output format."
)

SECTION_HEADINGS = (
    "### Background Knowledge (BK)",
    "### Logical Constraints (LC)",
    "### Operational Guidelines (OG)",
    "### Validation Criteria (VC)",
)
TASK_INPUT_HEADING = "### Task Input"


@dataclass(frozen=True)
class GuidelineStep:
    text: str
    output_format: str | None = None


@dataclass(frozen=True)
class Criterion:
    text: str
    check: CheckSpec | None = None


@dataclass(frozen=True)
class KnowledgeDimensions:
    background_knowledge: tuple[str, ...] = ()
    logical_constraints: tuple[str, ...] = ()
    operational_guidelines: tuple[GuidelineStep, ...] = ()
    validation_criteria: tuple[Criterion, ...] = ()


@dataclass(frozen=True)
class KnowledgeNode:
    id: str
    label: str
    task_description: str
    parent_id: str | None
    child_ids: tuple[str, ...]
    dimensions: KnowledgeDimensions
    category_labels: tuple[str, ...] | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.child_ids


@dataclass(frozen=True)
class KnowledgeTree:
    """Immutable after load; ``nodes`` keeps file order."""

    root_id: str
    nodes: Mapping[str, KnowledgeNode]
    version: str
    domain: str

    def __len__(self):
        return len(self.nodes)

    @property
    def root(self) -> KnowledgeNode:
        return self.nodes[self.root_id]

    def leaves(self) -> list[KnowledgeNode]:
        return [n for n in self.nodes.values() if n.is_leaf]

    def path_to(self, node_id: str) -> list[KnowledgeNode]:
        node = resolve_node(self, node_id)
        path = [node]
        while node.parent_id is not None:
            node = self.nodes[node.parent_id]
            path.append(node)
        return path[::-1]


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    output_schema_hint: str
    source_node_id: str
    context_digest: str


# -- loading ----------------------------------------------------------------


def _str_list(raw: dict, key: str, node_id: str) -> tuple[str, ...]:
    if key not in raw:
        raise TreeError(node_id, f"dimension {key!r} is missing")
    val = raw[key]
    if not isinstance(val, list) or not all(isinstance(v, str) for v in val):
        raise TreeError(node_id, f"{key!r} must be a list of strings")
    return tuple(val)


def _parse_node(raw: Any, index: int) -> KnowledgeNode:
    if not isinstance(raw, dict) or not isinstance(raw.get("id"), str) or not raw["id"]:
        raise TreeError(None, f"nodes[{index}] needs a non-empty string 'id'")
    nid = raw["id"]
    bk = _str_list(raw, "bk", nid)
    lc = _str_list(raw, "lc", nid)
    if "og" not in raw or not isinstance(raw["og"], list):
        raise TreeError(nid, "dimension 'og' is missing")
    og = []
    for item in raw["og"]:
        if isinstance(item, str):
            og.append(GuidelineStep(item))
        elif isinstance(item, dict) and isinstance(item.get("step"), str):
            og.append(GuidelineStep(item["step"], item.get("format")))
        else:
            raise TreeError(nid, "og entries must be strings or {step, format}")
    if "vc" not in raw or not isinstance(raw["vc"], list):
        raise TreeError(nid, "dimension 'vc' is missing")
    vc = []
    for i, item in enumerate(raw["vc"]):
        if isinstance(item, str):
            vc.append(Criterion(item))
        elif isinstance(item, dict) and isinstance(item.get("text"), str):
            check = parse_check(item["check"], nid, i) if item.get("check") is not None else None
            vc.append(Criterion(item["text"], check))
        else:
            raise TreeError(nid, "vc entries must be strings or {text, check?}")
    children = raw.get("children", [])
    if not isinstance(children, list) or not all(isinstance(c, str) for c in children):
        raise TreeError(nid, "'children' must be a list of ids")
    parent = raw.get("parent")
    if parent is not None and not isinstance(parent, str):
        raise TreeError(nid, "'parent' must be an id or null")
    cats = raw.get("categories")
    return KnowledgeNode(
        id=nid,
        label=str(raw.get("label", nid)),
        task_description=str(raw.get("task", "")),
        parent_id=parent,
        child_ids=tuple(children),
        dimensions=KnowledgeDimensions(bk, lc, tuple(og), tuple(vc)),
        category_labels=tuple(cats) if cats is not None else None,
    )


def _find_cycle_member(nodes: Mapping[str, KnowledgeNode], start: str) -> str:
    seen = set()
    cur = start
    while cur not in seen:
        seen.add(cur)
        cur = nodes[cur].parent_id
    return cur


def load_tree(source: str | Path | Mapping) -> KnowledgeTree:
    """Load and validate a knowledge tree from a path, JSON text or parsed mapping."""
    if isinstance(source, Mapping):
        doc = source
    elif isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        doc = json.loads(source)
    if not isinstance(doc, Mapping) or not isinstance(doc.get("nodes"), list):
        raise TreeError(None, "tree document needs a 'nodes' list")

    nodes: dict[str, KnowledgeNode] = {}
    for i, raw in enumerate(doc["nodes"]):
        node = _parse_node(raw, i)
        if node.id in nodes:
            raise DuplicateId(node.id, "duplicate node id")
        nodes[node.id] = node
    if not nodes:
        raise TreeError(None, "tree has no nodes")

    for node in nodes.values():
        if node.parent_id is not None and node.parent_id not in nodes:
            raise DanglingParent(node.id, f"parent {node.parent_id!r} does not exist")
        for cid in node.child_ids:
            if cid not in nodes:
                raise DanglingParent(cid, f"listed as child of {node.id!r} but does not exist")
        if len(set(node.child_ids)) != len(node.child_ids):
            raise DuplicateId(node.id, "child listed twice")

    for node in nodes.values():
        for cid in node.child_ids:
            if nodes[cid].parent_id != node.id:
                raise InconsistentLink(cid, f"listed under {node.id!r} but parent is {nodes[cid].parent_id!r}")
        if node.parent_id is not None and node.id not in nodes[node.parent_id].child_ids:
            raise InconsistentLink(node.id, f"parent {node.parent_id!r} does not list it as a child")

    roots = [n.id for n in nodes.values() if n.parent_id is None]
    if not roots:
        first = next(iter(nodes))
        raise CycleDetected(_find_cycle_member(nodes, first), "no root: parent links form a cycle")
    root_id = doc.get("root", roots[0])
    if len(roots) > 1:
        extra = next(r for r in roots if r != root_id)
        raise MultipleRoots(extra, f"more than one parentless node: {roots}")
    if root_id != roots[0]:
        raise MultipleRoots(root_id, f"declared root differs from parentless node {roots[0]!r}")

    reached = set()
    stack = [root_id]
    while stack:
        nid = stack.pop()
        reached.add(nid)
        stack.extend(nodes[nid].child_ids)
    if len(reached) != len(nodes):
        stray = next(n for n in nodes if n not in reached)
        raise CycleDetected(_find_cycle_member(nodes, stray), "node unreachable from root (cycle)")

    return KnowledgeTree(root_id=root_id, nodes=nodes, version=str(doc.get("version", "")),
                         domain=str(doc.get("domain", "")))


def dump_tree(tree: KnowledgeTree) -> dict[str, Any]:
    out_nodes = []
    for n in tree.nodes.values():
        d = n.dimensions
        raw: dict[str, Any] = {
            "id": n.id, "label": n.label, "task": n.task_description,
            "parent": n.parent_id, "children": list(n.child_ids),
            "bk": list(d.background_knowledge), "lc": list(d.logical_constraints),
            "og": [{"step": g.text, "format": g.output_format} if g.output_format else g.text
                   for g in d.operational_guidelines],
            "vc": [{"text": c.text, "check": c.check.to_dict()} if c.check else {"text": c.text}
                   for c in d.validation_criteria],
        }
        if n.category_labels is not None:
            raw["categories"] = list(n.category_labels)
        out_nodes.append(raw)
    return {"version": tree.version, "domain": tree.domain, "root": tree.root_id, "nodes": out_nodes}


def resolve_node(tree: KnowledgeTree, node_id: str) -> KnowledgeNode:
    try:
        return tree.nodes[node_id]
    except KeyError:
        raise UnknownNode(node_id) from None


def bundled_tree_path() -> Path:
    return Path(__file__).parent / "data" / "trees" / "marine_pb.json"


# -- prompts ----------------------------------------------------------------


def estimate_tokens(text: str) -> int:
    # ~4 characters per token for English prose
    return math.ceil(len(text) / 4)


def _bullets(items) -> list[str]:
    return [f"- {it}" for it in items] or ["- none"]


def assemble_prompt(node: KnowledgeNode, task_context: str | Mapping,
                    token_budget: int | None = DEFAULT_TOKEN_BUDGET) -> PromptBundle:
    """Render a node's four knowledge dimensions plus the task payload.

    Pure: the same node and context always give a byte-identical bundle.
    Mapping contexts are rendered as sorted, indented JSON.
    """
    payload = task_context if isinstance(task_context, str) else json.dumps(
        task_context, sort_keys=True, ensure_ascii=False, indent=1)
    if not payload.strip():
        raise ValueError("task_context must be non-empty")
    dims = node.dimensions

    lines = [f"TASK {node.id}: {node.label}", node.task_description]
    if node.category_labels:
        lines.append("Allowed labels: " + " | ".join(node.category_labels))
    lines += ["", SECTION_HEADINGS[0], *_bullets(dims.background_knowledge)]
    lines += ["", SECTION_HEADINGS[1], *_bullets(dims.logical_constraints)]
    lines += ["", SECTION_HEADINGS[2]]
    if not dims.operational_guidelines:
        lines.append("- none")
    for i, step in enumerate(dims.operational_guidelines, 1):
        lines.append(f"{i}. {step.text}")
        if step.output_format:
            lines.append(f"   Output format: {step.output_format}")
    lines += ["", SECTION_HEADINGS[3], *_bullets(c.text for c in dims.validation_criteria)]
    lines += ["", TASK_INPUT_HEADING, payload]
    user_text = "\n".join(lines) + "\n"

    hint = "\n".join(s.output_format for s in dims.operational_guidelines if s.output_format)
    if token_budget is not None:
        tokens = estimate_tokens(SYSTEM_TEXT) + estimate_tokens(user_text)
        if tokens > token_budget:
            raise ContextTooLarge(node.id, tokens, token_budget)
    return PromptBundle(SYSTEM_TEXT, user_text, hint, node.id, stable_digest(payload))


def collect_checks(tree: KnowledgeTree, node_id: str) -> list[CheckSpec]:
    """Executable checks on the root-to-node path, root first."""
    return [c.check for n in tree.path_to(node_id)
            for c in n.dimensions.validation_criteria if c.check is not None]
