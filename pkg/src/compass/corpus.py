"""Pre-parsed paper ingestion, keyword recall and the remote repository client."""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Sequence

import httpx

from .errors import MalformedResponse, NetworkError, QuotaExceeded, UnreadableRoot

log = logging.getLogger(__name__)

REPO_KEY_ENV = "COMPASS_REPO_KEY"


@dataclass(frozen=True)
class Section:
    heading: str
    body_text: str


@dataclass(frozen=True)
class TableBlock:
    table_id: str
    caption: str
    header_rows: tuple[tuple[str, ...], ...]
    data_rows: tuple[tuple[str, ...], ...]
    footnotes: tuple[str, ...] = ()
    context_snippets: tuple[str, ...] = ()
    anomalies: tuple[str, ...] = ()

    @property
    def width(self) -> int:
        return len(self.header_rows[0]) if self.header_rows else 0

    @property
    def column_headers(self) -> list[str]:
        """One header string per column, stacked header rows joined by spaces."""
        out = []
        for col in range(self.width):
            parts = []
            for row in self.header_rows:
                cell = row[col].strip()
                if cell and cell not in parts:
                    parts.append(cell)
            out.append(" ".join(parts))
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"table_id": self.table_id, "caption": self.caption,
                "headers": [list(r) for r in self.header_rows],
                "rows": [list(r) for r in self.data_rows],
                "footnotes": list(self.footnotes), "context": list(self.context_snippets)}


def make_table(raw: dict[str, Any]) -> TableBlock:
    """Build a rectangular TableBlock, padding ragged rows and recording each pad."""
    headers = [[str(c) for c in r] for r in raw.get("headers") or []]
    rows = [[str(c) for c in r] for r in raw.get("rows") or []]
    if not headers:
        raise ValueError(f"table {raw.get('table_id')!r} has no header row")
    width = max(len(r) for r in headers + rows)
    anomalies = []
    for kind, block in (("header", headers), ("row", rows)):
        for i, r in enumerate(block):
            if len(r) < width:
                anomalies.append(f"ParseAnomaly: {kind} {i} padded from {len(r)} to {width} cells")
                r.extend([""] * (width - len(r)))
    return TableBlock(
        table_id=str(raw["table_id"]),
        caption=str(raw.get("caption", "")),
        header_rows=tuple(tuple(r) for r in headers),
        data_rows=tuple(tuple(r) for r in rows),
        footnotes=tuple(raw.get("footnotes") or ()),
        context_snippets=tuple(raw.get("context") or ()),
        anomalies=tuple(anomalies),
    )


@dataclass(frozen=True)
class ParsedPaper:
    paper_id: str
    title: str
    abstract: str
    sections: tuple[Section, ...] = ()
    tables: tuple[TableBlock, ...] = ()
    source_uri: str = ""
    doi: str | None = None

    def table(self, table_id: str) -> TableBlock:
        for t in self.tables:
            if t.table_id == table_id:
                return t
        raise KeyError(table_id)

    @property
    def body_text(self) -> str:
        return "\n".join(f"{s.heading}\n{s.body_text}" for s in self.sections)

    def to_dict(self) -> dict[str, Any]:
        return {"paper_id": self.paper_id, "doi": self.doi, "title": self.title,
                "abstract": self.abstract,
                "sections": [{"heading": s.heading, "text": s.body_text} for s in self.sections],
                "tables": [t.to_dict() for t in self.tables], "source_uri": self.source_uri}


def paper_from_dict(raw: dict[str, Any], source_uri: str = "") -> ParsedPaper:
    if not isinstance(raw, dict):
        raise ValueError("paper document must be an object")
    for key in ("paper_id", "title", "abstract"):
        if not isinstance(raw.get(key), str):
            raise ValueError(f"missing or non-string {key!r}")
    tables = tuple(make_table(t) for t in raw.get("tables") or ())
    ids = [t.table_id for t in tables]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate table ids in {raw['paper_id']!r}")
    sections = tuple(Section(str(s.get("heading", "")), str(s.get("text", "")))
                     for s in raw.get("sections") or ())
    return ParsedPaper(
        paper_id=raw["paper_id"], title=raw["title"], abstract=raw["abstract"],
        sections=sections, tables=tables,
        source_uri=raw.get("source_uri") or source_uri, doi=raw.get("doi"),
    )


@dataclass
class Corpus:
    papers: dict[str, ParsedPaper] = field(default_factory=dict)
    load_warnings: list[str] = field(default_factory=list)
    root: Path | None = None

    def __post_init__(self):
        self.papers = dict(sorted(self.papers.items()))

    def __iter__(self) -> Iterator[ParsedPaper]:
        return iter(self.papers.values())

    def __len__(self):
        return len(self.papers)

    def __getitem__(self, paper_id: str) -> ParsedPaper:
        return self.papers[paper_id]

    @property
    def manifest(self) -> dict[str, Any]:
        return {"count": len(self.papers), "load_warnings": list(self.load_warnings)}


def load_corpus(root_path: str | Path) -> Corpus:
    """Load every ``*.json`` paper under ``root_path``; bad files become warnings."""
    root = Path(root_path)
    if not root.is_dir():
        raise UnreadableRoot(f"corpus root {root} is not a readable directory")
    try:
        files = sorted(root.glob("*.json"))
    except OSError as exc:
        raise UnreadableRoot(str(exc)) from exc
    papers: dict[str, ParsedPaper] = {}
    warnings = []
    for path in files:
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
            paper = paper_from_dict(raw, source_uri=path.resolve().as_uri())
        except (OSError, UnicodeDecodeError, json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
            warnings.append(f"{path.name}: skipped ({exc})")
            continue
        if paper.paper_id in papers:
            warnings.append(f"{path.name}: skipped (duplicate paper_id {paper.paper_id!r})")
            continue
        papers[paper.paper_id] = paper
    for w in warnings:
        log.warning("corpus: %s", w)
    return Corpus(papers, warnings, root)


_TOKEN = re.compile(r"[0-9A-Za-z]+")


def _tokens(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _contains(tokens: list[str], phrase: list[str]) -> bool:
    n = len(phrase)
    if n == 1:
        return phrase[0] in tokens
    return any(tokens[i:i + n] == phrase for i in range(len(tokens) - n + 1))


def keyword_search(corpus: Corpus, keywords: Sequence[str]) -> list[str]:
    """Ids of papers whose title, abstract or body contains any keyword.

    Matching is case-insensitive on whole alphanumeric tokens, so ``Pb`` does
    not hit ``PbX2compound``; multi-word keywords must match consecutive tokens.
    """
    phrases = [_tokens(k) for k in keywords]
    phrases = [p for p in phrases if p]
    if not phrases:
        raise ValueError("keywords must be non-empty")
    hits = []
    for paper in corpus:
        tokens = _tokens(f"{paper.title}\n{paper.abstract}\n{paper.body_text}")
        if any(_contains(tokens, p) for p in phrases):
            hits.append(paper.paper_id)
    return hits


def fetch_remote(query: Sequence[str], repository_endpoint: str, limit: int, *,
                 api_key: str | None = None, client: httpx.Client | None = None,
                 max_attempts: int = 3, backoff_s: float = 0.5, sleep=time.sleep) -> list[ParsedPaper]:
    """Metadata-only paper stubs from a scholarly search endpoint.

    Expects a JSON body ``{"data": [{"paperId", "title", "abstract",
    "externalIds": {"DOI"}}]}``.  429 and 5xx responses are retried with
    exponential backoff.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    if not query:
        raise ValueError("query must be non-empty")
    api_key = api_key if api_key is not None else os.environ.get(REPO_KEY_ENV)
    headers = {"x-api-key": api_key} if api_key else {}
    params = {"query": " | ".join(query), "limit": limit, "fields": "title,abstract,externalIds"}
    own_client = client is None
    client = client or httpx.Client(timeout=30.0)
    try:
        resp = None
        for attempt in range(1, max_attempts + 1):
            try:
                resp = client.get(repository_endpoint, params=params, headers=headers)
            except httpx.TransportError as exc:
                if attempt == max_attempts:
                    raise NetworkError(f"{repository_endpoint}: {exc}") from exc
                log.warning("fetch_remote retry %d after transport error: %s", attempt, exc)
                sleep(backoff_s * 2 ** (attempt - 1))
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                if attempt == max_attempts:
                    if resp.status_code == 429:
                        raise QuotaExceeded(f"{repository_endpoint}: HTTP 429 after {attempt} attempts")
                    raise NetworkError(f"{repository_endpoint}: HTTP {resp.status_code}")
                log.warning("fetch_remote retry %d after HTTP %d", attempt, resp.status_code)
                sleep(backoff_s * 2 ** (attempt - 1))
                continue
            break
        if resp.status_code != 200:
            raise MalformedResponse(f"{repository_endpoint}: unexpected HTTP {resp.status_code}")
        try:
            items = resp.json()["data"]
            stubs = []
            for item in items[:limit]:
                pid = str(item["paperId"])
                doi = (item.get("externalIds") or {}).get("DOI")
                stubs.append(ParsedPaper(paper_id=pid, title=item.get("title") or "",
                                         abstract=item.get("abstract") or "", doi=doi,
                                         source_uri=f"{repository_endpoint}#{pid}"))
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"{repository_endpoint}: {exc!r}") from exc
        return stubs
    finally:
        if own_client:
            client.close()
