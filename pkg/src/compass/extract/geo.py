"""Parsers for coordinates, depths, dates and station labels found in tables and prose."""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime

from ..errors import NegativeDepth, OutOfRange

_MINUS = "−–"  # unicode minus, en dash

_COORD = re.compile(
    r"""
    (?<![\w.])(?P<sign>[-+−])?
    (?P<deg>\d{1,3}(?:\.\d+)?)\s*(?:[°º˚]|\s*deg(?:rees)?\b)?\s*
    (?:
        (?P<min>\d{1,2}(?:\.\d+)?)\s*(?:['′’]|\s*min\b)\s*
        (?:(?P<sec>\d{1,2}(?:\.\d+)?)\s*(?:["″”]|''|\s*sec\b)\s*)?
    )?
    (?P<hem>[NSEW])(?![A-Za-z])
    """,
    re.X,
)
_SIGNED_DMS = re.compile(
    r"""^\s*(?P<sign>[-+−])?\s*(?P<deg>\d{1,3}(?:\.\d+)?)\s*(?:[°º˚])?\s*
    (?:(?P<min>\d{1,2}(?:\.\d+)?)\s*['′’]\s*(?:(?P<sec>\d{1,2}(?:\.\d+)?)\s*(?:["″”]|'')\s*)?)?\s*$""",
    re.X,
)
_STATION = re.compile(
    r"\b(?:station|stn\.?|sta\.|st\.|site)\s*(?P<label>[A-Za-z]{0,4}[-]?\d+[A-Za-z0-9]*|(?-i:[A-Z][A-Za-z0-9]*)(?:-\d+)?)",
    re.I,
)


def _dms_value(m) -> float:
    deg = float(m.group("deg"))
    minutes = float(m.group("min")) if m.group("min") else 0.0
    seconds = float(m.group("sec")) if m.group("sec") else 0.0
    if minutes >= 60 or seconds >= 60:
        raise OutOfRange(f"minutes/seconds out of range in {m.group(0).strip()!r}")
    if m.group("min") and "." in m.group("deg"):
        raise OutOfRange(f"decimal degrees with minutes in {m.group(0).strip()!r}")
    return deg + minutes / 60.0 + seconds / 3600.0


def _axis_value(magnitude: float, hem: str, sign: str | None, text: str) -> tuple[str, float]:
    axis = "lat" if hem in "NS" else "lon"
    limit = 90.0 if axis == "lat" else 180.0
    if magnitude > limit:
        raise OutOfRange(f"{text.strip()!r}: {magnitude} exceeds {limit}")
    negative = hem in "SW" or (sign is not None and sign in "-" + _MINUS)
    return axis, -magnitude if negative else magnitude


def parse_coordinate(text: str, axis: str | None = None) -> tuple[float | None, float | None]:
    """Parse the first latitude and first longitude in ``text``.

    Hemisphere letters decide the axis (S and W negative).  A bare signed
    number or DMS string without a letter is read as ``axis`` when one is
    given (``"lat"``/``"lon"``), otherwise left unset.  Raises OutOfRange for
    magnitudes beyond 90/180 or minutes/seconds of 60 or more.
    """
    lat = lon = None
    for m in _COORD.finditer(text):
        which, value = _axis_value(_dms_value(m), m.group("hem"), m.group("sign"), m.group(0))
        if which == "lat" and lat is None:
            lat = value
        elif which == "lon" and lon is None:
            lon = value
    if lat is None and lon is None and axis in ("lat", "lon"):
        m = _SIGNED_DMS.match(text)
        if m:
            hem = "N" if axis == "lat" else "E"
            _, value = _axis_value(_dms_value(m), hem, m.group("sign"), text)
            return (value, None) if axis == "lat" else (None, value)
    return lat, lon


def format_dms(value: float, axis: str, decimals: int = 9) -> str:
    """Render decimal degrees as ``DD°MM'SS.sss"H`` (exact to ``decimals`` of an arcsecond)."""
    hem = ("N" if value >= 0 else "S") if axis == "lat" else ("E" if value >= 0 else "W")
    scale = 10 ** decimals
    total = round(abs(value) * 3600 * scale)
    deg, rem = divmod(total, 3600 * scale)
    minutes, sec_scaled = divmod(rem, 60 * scale)
    sec_int, frac = divmod(sec_scaled, scale)
    return f"{deg}°{minutes:02d}'{sec_int:02d}.{frac:0{decimals}d}\"{hem}"


@dataclass(frozen=True)
class CoordinateHit:
    latitude: float
    longitude: float
    label: str | None
    verbatim: str


def normalize_station(label: str | None) -> str | None:
    if label is None:
        return None
    s = re.sub(r"^\s*(?:station|stn\.?|sta\.?|st\.|site)\s*", "", label.strip(), flags=re.I)
    s = re.sub(r"[^0-9A-Za-z]", "", s).upper()
    return s or None


def find_station(text: str) -> str | None:
    """The station label in ``text`` if exactly one distinct label is mentioned."""
    labels = {normalize_station(m.group("label")) for m in _STATION.finditer(text)}
    labels.discard(None)
    return labels.pop() if len(labels) == 1 else None


def find_coordinates(text: str) -> list[CoordinateHit]:
    """Latitude/longitude pairs in free text, each with the nearest preceding station label."""
    matches = []
    for m in _COORD.finditer(text):
        try:
            axis, value = _axis_value(_dms_value(m), m.group("hem"), m.group("sign"), m.group(0))
        except OutOfRange:
            continue
        matches.append((m.start(), m.end(), axis, value))
    hits = []
    prev_end = 0
    i = 0
    while i < len(matches) - 1:
        a, b = matches[i], matches[i + 1]
        gap = text[a[1]:b[0]]
        if a[2] != b[2] and len(gap) <= 6 and "\n" not in gap and ";" not in gap:
            lat = a[3] if a[2] == "lat" else b[3]
            lon = b[3] if b[2] == "lon" else a[3]
            segment = text[prev_end:a[0]]
            labels = list(_STATION.finditer(segment))
            label = normalize_station(labels[-1].group("label")) if labels else None
            hits.append(CoordinateHit(lat, lon, label, text[a[0]:b[1]].strip()))
            prev_end = b[1]
            i += 2
        else:
            i += 1
    return hits


SURFACE_TOKENS = {"surface", "surf.", "surf", "sfc"}
_DEPTH_CELL = re.compile(r"^\s*(?P<sign>[-−])?\s*(?P<num>\d+(?:[.,]\d+)?)\s*(?P<unit>km|m|meters?|metres?)?\s*$", re.I)
_DEPTH_TEXT = (
    re.compile(r"\b(?:at|depths? of|from)\s+(?P<sign>[-−])?(?P<num>\d[\d,]*(?:\.\d+)?)\s*(?P<unit>km|m)\b", re.I),
    re.compile(r"(?P<sign>[-−])?\b(?P<num>\d[\d,]*(?:\.\d+)?)\s*(?P<unit>km|m)\s+(?:water\s+)?depth\b", re.I),
)
_SURFACE_TEXT = re.compile(r"\bsurface\s+(?:sea)?waters?\b|\bsurface\s+samples?\b", re.I)


def _to_meters(num: str, unit: str | None, negative: bool) -> float:
    value = float(num)
    if unit and unit.lower() == "km":
        value *= 1000.0
    if negative and value != 0:
        raise NegativeDepth(f"negative depth {'-' + num} {unit or ''}".strip())
    return value


def parse_depth(text: str, default_unit: str | None = None) -> float | None:
    """Depth in meters from a cell such as ``"2000 m"``, ``"2 km"`` or ``"surface"``.

    ``default_unit`` applies to bare numbers (e.g. under a ``Depth (m)`` header).
    Surface tokens map to 0 m by convention.  Ranges and free prose give None.
    """
    s = text.strip()
    if s.lower() in SURFACE_TOKENS:
        return 0.0
    m = _DEPTH_CELL.match(s)
    if not m:
        return None
    unit = m.group("unit") or default_unit
    if unit is None:
        return None
    unit = "km" if unit.lower() == "km" else "m"
    num = m.group("num").replace(",", ".")
    return _to_meters(num, unit, bool(m.group("sign")))


def is_surface_token(text: str) -> bool:
    return text.strip().lower() in SURFACE_TOKENS


def find_depths(text: str) -> list[tuple[float, str]]:
    """Depth mentions in prose as ``(meters, verbatim)``; 'surface water(s)' counts as 0 m."""
    out = []
    for pattern in _DEPTH_TEXT:
        for m in pattern.finditer(text):
            try:
                out.append((_to_meters(m.group("num").replace(",", ""), m.group("unit"),
                                       bool(m.group("sign"))), m.group(0).strip()))
            except NegativeDepth:
                continue
    for m in _SURFACE_TEXT.finditer(text):
        out.append((0.0, m.group(0)))
    return out


_ISO = re.compile(r"\b(\d{4})-(\d{2})-(\d{2})\b")
_DMY = re.compile(r"\b(\d{1,2})\s+([A-Z][a-z]+)\.?\s+(\d{4})\b")
_MDY = re.compile(r"\b([A-Z][a-z]+)\.?\s+(\d{1,2}),\s*(\d{4})\b")


def _month(name: str) -> int | None:
    for fmt in ("%B", "%b"):
        try:
            return datetime.strptime(name[:3] if fmt == "%b" else name, fmt).month
        except ValueError:
            continue
    return None


def find_dates(text: str) -> list[tuple[str, str]]:
    """Full calendar dates in text as ``(ISO date, verbatim)``; partial dates are ignored."""
    out = []
    for m in _ISO.finditer(text):
        try:
            out.append((date(int(m.group(1)), int(m.group(2)), int(m.group(3))).isoformat(), m.group(0)))
        except ValueError:
            pass
    for m in _DMY.finditer(text):
        mon = _month(m.group(2))
        if mon:
            try:
                out.append((date(int(m.group(3)), mon, int(m.group(1))).isoformat(), m.group(0)))
            except ValueError:
                pass
    for m in _MDY.finditer(text):
        mon = _month(m.group(1))
        if mon:
            try:
                out.append((date(int(m.group(3)), mon, int(m.group(2))).isoformat(), m.group(0)))
            except ValueError:
                pass
    return out
