"""Bind draft values to coordinates, depths and dates found around their table.

Scopes are tried nearest first: the record's own row, the table footnotes,
the caption, sibling tables of the same paper, then body text.  Within a
scope only candidates for the record's station are considered (or unlabeled
ones when none match); a scope offering two different values is ambiguous and
ends the search for that field.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

from ..corpus import ParsedPaper, TableBlock
from ..errors import NegativeDepth, OutOfRange
from ..harmonize.headers import HeaderMapping, normalize_headers
from ..records import PbRecord
from .geo import find_coordinates, find_dates, find_depths, find_station, normalize_station, parse_coordinate, parse_depth

ROW, FOOTNOTE, CAPTION, SIBLING, BODY = "row", "footnote", "caption", "sibling_table", "body"
SCOPES = (ROW, FOOTNOTE, CAPTION, SIBLING, BODY)
UNLOCATED = "unlocated"
SURFACE_CONVENTION = "depth_surface_convention"


@dataclass(frozen=True)
class Candidate:
    value: Any
    scope: str
    label: str | None
    verbatim: str

    def to_dict(self):
        value = list(self.value) if isinstance(self.value, tuple) else self.value
        return {"value": value, "scope": self.scope, "label": self.label, "verbatim": self.verbatim}


@dataclass
class AssociationContext:
    coordinates_found: list[Candidate] = field(default_factory=list)
    depths_found: list[Candidate] = field(default_factory=list)
    dates_found: list[Candidate] = field(default_factory=list)
    table_station: str | None = None

    def to_dict(self):
        return {"coordinates_found": [c.to_dict() for c in self.coordinates_found],
                "depths_found": [c.to_dict() for c in self.depths_found],
                "dates_found": [c.to_dict() for c in self.dates_found],
                "table_station": self.table_station}


@dataclass
class RowValues:
    coord: tuple[float, float] | None = None
    depth: float | None = None
    date: str | None = None
    station: str | None = None
    flags: set[str] = field(default_factory=set)
    verbatim: dict[str, str] = field(default_factory=dict)


def _columns(mappings: Sequence[HeaderMapping], name: str) -> list[int]:
    return [i for i, m in enumerate(mappings) if m.canonical_field == name]


def row_values(row: Sequence[str], mappings: Sequence[HeaderMapping]) -> RowValues:
    """Metadata printed in one table row, read through the header mappings."""
    out = RowValues()
    lat = lon = None
    try:
        for i in _columns(mappings, "latitude"):
            lat = lat if lat is not None else parse_coordinate(row[i], axis="lat")[0]
        for i in _columns(mappings, "longitude"):
            lon = lon if lon is not None else parse_coordinate(row[i], axis="lon")[1]
    except OutOfRange:
        out.flags.add("coord_out_of_range")
        lat = lon = None
    if lat is not None and lon is not None:
        out.coord = (lat, lon)
        out.verbatim["coord"] = " ".join(row[i] for i in _columns(mappings, "latitude") + _columns(mappings, "longitude"))
    for i in _columns(mappings, "depth_m"):
        unit = "km" if (mappings[i].unit_hint or "").strip().lower() == "km" else "m"
        try:
            depth = parse_depth(row[i], default_unit=unit)
        except NegativeDepth:
            out.flags.add("negative_depth")
            continue
        if depth is not None:
            out.depth = depth
            out.verbatim["depth"] = row[i]
            break
    for i in _columns(mappings, "sample_date"):
        dates = find_dates(row[i])
        if dates:
            out.date = dates[0][0]
            break
    for i in _columns(mappings, "station_label"):
        label = normalize_station(row[i])
        if label:
            out.station = label
            break
    return out


def _scan_text(text: str, scope: str, ctx: AssociationContext) -> None:
    for hit in find_coordinates(text):
        ctx.coordinates_found.append(Candidate((hit.latitude, hit.longitude), scope,
                                               hit.label or find_station(text), hit.verbatim))
    label = find_station(text)
    for depth, verbatim in find_depths(text):
        ctx.depths_found.append(Candidate(depth, scope, label, verbatim))
    for iso, verbatim in find_dates(text):
        ctx.dates_found.append(Candidate(iso, scope, label, verbatim))


def build_context(table: TableBlock, paper: ParsedPaper,
                  table_mappings: Mapping[str, Sequence[HeaderMapping]] | None = None) -> AssociationContext:
    """Every coordinate, depth and date candidate outside the rows of ``table``."""
    table_mappings = table_mappings or {}
    ctx = AssociationContext(table_station=find_station(table.caption))
    for note in table.footnotes:
        _scan_text(note, FOOTNOTE, ctx)
    _scan_text(table.caption, CAPTION, ctx)
    for sib in paper.tables:
        if sib.table_id == table.table_id or not sib.header_rows:
            continue
        maps = table_mappings.get(sib.table_id) or normalize_headers(sib.column_headers)
        sib_station = find_station(sib.caption)
        for row in sib.data_rows:
            rv = row_values(row, maps)
            label = rv.station or sib_station
            if rv.coord is not None:
                ctx.coordinates_found.append(Candidate(rv.coord, SIBLING, label,
                                                       f"{sib.table_id}: {rv.verbatim['coord']}"))
            if rv.depth is not None:
                ctx.depths_found.append(Candidate(rv.depth, SIBLING, label,
                                                  f"{sib.table_id}: {rv.verbatim['depth']}"))
            if rv.date is not None:
                ctx.dates_found.append(Candidate(rv.date, SIBLING, label, f"{sib.table_id}: {rv.date}"))
    for section in paper.sections:
        _scan_text(section.body_text, BODY, ctx)
    for snippet in table.context_snippets:
        _scan_text(snippet, BODY, ctx)
    return ctx


def _pool(candidates: list[Candidate], station: str | None) -> list[Candidate]:
    if station is None:
        return candidates
    matching = [c for c in candidates if c.label == station]
    return matching or [c for c in candidates if c.label is None]


def _key(value):
    if isinstance(value, tuple):
        return tuple(round(v, 9) for v in value)
    if isinstance(value, float):
        return round(value, 9)
    return value


def resolve(candidates: Sequence[Candidate], station: str | None, scopes=SCOPES[1:]):
    """``(candidate, None)`` for a unique value, ``(None, scope)`` when ambiguous, ``(None, None)`` if absent."""
    for scope in scopes:
        pool = _pool([c for c in candidates if c.scope == scope], station)
        distinct = {}
        for c in pool:
            distinct.setdefault(_key(c.value), c)
        if len(distinct) == 1:
            return next(iter(distinct.values())), None
        if len(distinct) > 1:
            return None, scope
    return None, None


def associate_metadata(drafts: Sequence[PbRecord], table: TableBlock, paper: ParsedPaper,
                       tree=None, gateway=None, *,
                       mappings: Sequence[HeaderMapping] | None = None,
                       table_mappings: Mapping[str, Sequence[HeaderMapping]] | None = None,
                       context: AssociationContext | None = None) -> list[PbRecord]:
    """Fill missing location, depth and date on drafts from ``table``; never overwrites a set field.

    Drafts that end up without both coordinates carry the ``unlocated`` flag.
    """
    for d in drafts:
        if d.paper_id != paper.paper_id or d.provenance[0].table_id != table.table_id:
            raise ValueError(f"{d.record_id} does not come from {paper.paper_id}/{table.table_id}")
    if mappings is None:
        mappings = normalize_headers(table.column_headers, tree, gateway,
                                     subject_id=f"{paper.paper_id}/{table.table_id}")
    ctx = context or build_context(table, paper, table_mappings)
    out = []
    for d in drafts:
        rv = row_values(table.data_rows[d.provenance[0].row_index], mappings)
        station = d.station_label or rv.station or ctx.table_station
        flags = set(rv.flags)
        fields: dict[str, Any] = {"station_label": station}

        if not d.located:
            if rv.coord is not None:
                fields["latitude"], fields["longitude"] = rv.coord
                flags.add("coord_from_row")
            elif "coord_out_of_range" not in flags:
                hit, ambiguous = resolve(ctx.coordinates_found, station)
                if hit is not None:
                    fields["latitude"], fields["longitude"] = hit.value
                    flags.add(f"coord_from_{hit.scope}")
                    if station is None and hit.label is not None:
                        fields["station_label"] = hit.label
                elif ambiguous:
                    flags.add("coord_ambiguous")

        if d.depth_m is None:
            if rv.depth is not None:
                fields["depth_m"] = rv.depth
                flags.add("depth_from_row")
                if "surf" in rv.verbatim.get("depth", "").lower():
                    flags.add(SURFACE_CONVENTION)
            elif "negative_depth" not in flags:
                hit, ambiguous = resolve(ctx.depths_found, station)
                if hit is not None:
                    fields["depth_m"] = hit.value
                    flags.add(f"depth_from_{hit.scope}")
                    if "surf" in hit.verbatim.lower():
                        flags.add(SURFACE_CONVENTION)
                elif ambiguous:
                    flags.add("depth_ambiguous")

        if d.sample_date is None:
            if rv.date is not None:
                fields["sample_date"] = rv.date
                flags.add("date_from_row")
            else:
                hit, ambiguous = resolve(ctx.dates_found, station)
                if hit is not None:
                    fields["sample_date"] = hit.value
                    flags.add(f"date_from_{hit.scope}")
                elif ambiguous:
                    flags.add("date_ambiguous")

        if d.station_label is not None:
            fields.pop("station_label")
        rec = replace(d, **fields, flags=d.flags | flags)
        if not rec.located:
            rec = rec.with_flags(UNLOCATED)
        out.append(rec)
    return out
