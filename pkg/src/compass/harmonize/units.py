"""Unit registry and canonical-unit conversion with exact rational factors.

Every recognized unit is a concentration ``numerator / denominator`` (or a
dimensionless ratio token).  Numerators are an amount (mol), a mass (g) or an
activity (Bq, dpm); denominators are a mass (kg) or a volume (m3).  Two named
bridges connect dimensions: the Pb molar mass for mass to amount, and the
reference seawater density for volume to mass.
"""

from __future__ import annotations

import json
import math
import re
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping

from ..errors import ConversionRejected, DimensionalMismatch, UnknownUnit
from ..records import MeasurementType

LINEAR, AFFINE, MASS_TO_MOLAR = "linear_factor", "affine", "mass_to_molar"
DIMENSIONLESS = "dimensionless"
ROUND_TRIP_TOL = 1e-12
_PROBES = (1.0, 0.37, 1234.5678, 2.5e-4, 98765.4321)

# allowed source dimensions per measurement family
_PB_DIMS = frozenset({"amount_per_mass", "mass_per_mass", "amount_per_volume", "mass_per_volume"})
_PB210_DIMS = frozenset({"activity_per_mass", "activity_per_volume"})


def allowed_dimensions(mtype: MeasurementType) -> frozenset[str]:
    if mtype.is_ratio:
        return frozenset({DIMENSIONLESS})
    return _PB_DIMS if mtype is MeasurementType.PbConc else _PB210_DIMS


@dataclass(frozen=True)
class ParsedUnit:
    text: str
    numerator: str | None  # amount | mass | activity; None for dimensionless
    denominator: str | None  # mass | volume
    scale: Fraction  # size of one unit in mol|g|Bq per kg|m3

    @property
    def dimension(self) -> str:
        if self.numerator is None:
            return DIMENSIONLESS
        return f"{self.numerator}_per_{self.denominator}"


@dataclass(frozen=True)
class UnitConversion:
    from_unit: str
    to_unit: str
    kind: str
    factor: Fraction
    offset: Fraction = Fraction(0)
    constants_used: tuple[tuple[str, Fraction], ...] = ()

    def __post_init__(self):
        if self.factor <= 0:
            raise ConversionRejected(f"{self.from_unit} -> {self.to_unit}: factor must be > 0")

    def apply(self, value: float) -> float:
        return float(Fraction(value) * self.factor + self.offset)

    def inverse(self, value: float) -> float:
        return float((Fraction(value) - self.offset) / self.factor)

    def to_dict(self):
        return {
            "from_unit": self.from_unit, "to_unit": self.to_unit, "kind": self.kind,
            "factor": float(self.factor), "factor_exact": str(self.factor),
            "offset": float(self.offset),
            "constants_used": {k: str(v) for k, v in self.constants_used},
        }


def _normalize_text(unit: str) -> str:
    s = unit.strip()
    for a, b in (("−", "-"), ("–", "-"), ("⁻¹", "-1"), ("⁻³", "-3"), ("³", "3"), ("^", ""),
                 ("·", " "), ("*", " "), ("μ", "µ"), ("per ", "/ ")):
        s = s.replace(a, b)
    s = re.sub(r"\s*/\s*", "/", s)
    return re.sub(r"\s+", " ", s)


_SLASH = re.compile(r"^(?P<num>[A-Za-zµ]+)/(?:(?P<mult>\d+(?:\.\d+)?) ?)?(?P<den>[A-Za-z]+3?)$")
_POWER = re.compile(r"^(?P<num>[A-Za-zµ]+) (?:(?P<mult>\d+(?:\.\d+)?) ?)?(?P<den>[A-Za-z]+)-(?P<exp>[13])$")


class UnitRegistry:
    """Immutable after load; safe to share between threads."""

    def __init__(self, doc: Mapping):
        consts = doc["constants"]
        self.constants = {k: Fraction(v) for k, v in consts.items()}
        self.molar_mass = self.constants["pb_molar_mass_g_per_mol"]
        self.density = self.constants["seawater_density_kg_per_m3"]
        self.canonical = {MeasurementType(k): v for k, v in doc["canonical"].items()}
        missing = set(MeasurementType) - set(self.canonical)
        if missing:
            raise ValueError(f"canonical units missing for {sorted(m.value for m in missing)}")
        self.prefixes = {k: Fraction(v) for k, v in doc["prefixes"].items()}
        self.numerators = {}
        for name, spec in doc["numerators"].items():
            scale = spec["scale"]
            scale = self.constants[scale] if scale in self.constants else Fraction(scale)
            self.numerators[name] = (spec["dimension"], scale, bool(spec.get("prefixable", True)))
        self.denominators = {k: (v["dimension"], Fraction(v["scale"]))
                             for k, v in doc["denominators"].items()}
        self.aliases = dict(doc.get("aliases", {}))
        self.dimensionless = frozenset(t.lower() for t in doc["dimensionless"])
        self._doc = doc

    def with_canonical(self, overrides: Mapping[str, str]) -> UnitRegistry:
        doc = dict(self._doc)
        doc["canonical"] = {**doc["canonical"], **dict(overrides)}
        reg = UnitRegistry(doc)
        for mtype, unit in reg.canonical.items():
            if reg.parse(unit).dimension not in allowed_dimensions(mtype):
                raise DimensionalMismatch(f"canonical unit {unit!r} does not fit {mtype.value}")
        return reg

    # -- parsing --------------------------------------------------------

    def _numerator(self, token: str):
        for name in sorted(self.numerators, key=len, reverse=True):
            if not token.endswith(name):
                continue
            prefix = token[: -len(name)]
            dim, scale, prefixable = self.numerators[name]
            if prefix == "":
                return dim, scale
            if prefixable and prefix in self.prefixes:
                return dim, scale * self.prefixes[prefix]
        return None

    def parse(self, unit: str) -> ParsedUnit:
        raw = unit
        s = _normalize_text(unit)
        if s.lower() in self.dimensionless:
            return ParsedUnit(raw, None, None, Fraction(1))
        s = self.aliases.get(s, s)
        for pattern in (_SLASH, _POWER):
            m = pattern.match(s)
            if not m:
                continue
            num = self._numerator(m.group("num"))
            den_name = m.group("den")
            if pattern is _POWER and m.group("exp") == "3":
                den_name += "3"
            den = self.denominators.get(den_name)
            if num is None or den is None:
                continue
            mult = Fraction(m.group("mult")) if m.group("mult") else Fraction(1)
            if mult <= 0:
                continue
            return ParsedUnit(raw, num[0], den[0], num[1] / (den[1] * mult))
        raise UnknownUnit(f"unrecognized unit {unit!r}")

    def knows(self, unit: str) -> bool:
        try:
            self.parse(unit)
            return True
        except UnknownUnit:
            return False

    # -- conversion -----------------------------------------------------

    def conversion(self, from_unit: str, mtype: MeasurementType,
                   to_unit: str | None = None) -> UnitConversion:
        """Exact conversion ``from_unit`` to ``to_unit`` (default: canonical) for ``mtype``."""
        to_unit = to_unit if to_unit is not None else self.canonical[mtype]
        src, dst = self.parse(from_unit), self.parse(to_unit)
        allowed = allowed_dimensions(mtype)
        for p in (src, dst):
            if p.dimension not in allowed:
                raise DimensionalMismatch(
                    f"{p.text!r} ({p.dimension}) is not a valid unit for {mtype.value}")
        if src.numerator is None:
            return UnitConversion(from_unit, to_unit, LINEAR, Fraction(1))
        factor = src.scale / dst.scale
        kind = LINEAR
        used = []
        if src.numerator != dst.numerator:
            if (src.numerator, dst.numerator) == ("mass", "amount"):
                factor /= self.molar_mass
                kind = MASS_TO_MOLAR
            elif (src.numerator, dst.numerator) == ("amount", "mass"):
                factor *= self.molar_mass
            else:
                raise DimensionalMismatch(f"cannot bridge {src.numerator} to {dst.numerator}")
            used.append(("molar_mass_g_per_mol", self.molar_mass))
        if src.denominator != dst.denominator:
            # per m3 -> per kg divides by density; per kg -> per m3 multiplies
            factor = factor * self.density if src.denominator == "mass" else factor / self.density
            used.append(("seawater_density_kg_per_m3", self.density))
        return UnitConversion(from_unit, to_unit, kind, factor, Fraction(0), tuple(used))


def load_registry(path: str | Path | None = None,
                  canonical_overrides: Mapping[str, str] | None = None) -> UnitRegistry:
    path = Path(path) if path else Path(__file__).resolve().parent.parent / "data" / "units.json"
    reg = UnitRegistry(json.loads(path.read_text(encoding="utf-8")))
    return reg.with_canonical(canonical_overrides) if canonical_overrides else reg


_default: UnitRegistry | None = None
_default_lock = threading.Lock()


def default_registry() -> UnitRegistry:
    global _default
    with _default_lock:
        if _default is None:
            _default = load_registry()
        return _default


_DIM_HINTS = (("mol", "amount"), ("bq", "activity"), ("dpm", "activity"), ("g", "mass"))


def infer_dimension(unit: str, registry: UnitRegistry | None = None) -> str | None:
    """Dimension of ``unit``; a best guess from its tokens when the registry lacks it."""
    registry = registry or default_registry()
    try:
        return registry.parse(unit).dimension
    except UnknownUnit:
        pass
    s = _normalize_text(unit).lower()
    if s in registry.dimensionless:
        return DIMENSIONLESS
    head, sep, tail = s.partition("/")
    if not sep:
        parts = s.split(" ", 1)
        head, tail = parts[0], parts[1] if len(parts) > 1 else ""
    num = next((d for tok, d in _DIM_HINTS if tok in head), None)
    if re.search(r"kg|\bg\b|\d\s*g\b", tail):
        den = "mass"
    elif re.search(r"\bl\b|m3|m-3|ml|dm3|cm3|liter|litre", tail):
        den = "volume"
    else:
        den = None
    if num and den:
        return f"{num}_per_{den}"
    return None


def vet_proposal(proposal: Mapping, from_unit: str, mtype: MeasurementType,
                 registry: UnitRegistry | None = None) -> UnitConversion:
    """Accept a backend-proposed conversion only if it is dimensionally and numerically sound."""
    registry = registry or default_registry()
    canonical = registry.canonical[mtype]
    to_unit = str(proposal.get("to_unit", ""))
    if _normalize_text(to_unit) != _normalize_text(canonical):
        raise ConversionRejected(f"proposal targets {to_unit!r}, canonical is {canonical!r}")
    declared = str(proposal.get("from_dimension", ""))
    if declared not in allowed_dimensions(mtype):
        raise DimensionalMismatch(f"{declared!r} is not a valid source dimension for {mtype.value}")
    inferred = infer_dimension(from_unit, registry)
    if inferred is not None and inferred != declared:
        raise DimensionalMismatch(f"{from_unit!r} looks like {inferred}, proposal says {declared}")
    if proposal.get("from_unit") not in (None, from_unit):
        raise ConversionRejected(f"proposal is for {proposal['from_unit']!r}, not {from_unit!r}")
    try:
        factor = float(proposal["factor"])
        offset = float(proposal.get("offset") or 0.0)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConversionRejected(f"bad factor/offset: {exc}") from None
    if not (math.isfinite(factor) and factor > 0):
        raise ConversionRejected(f"factor {factor!r} must be finite and > 0")
    if offset != 0:
        raise ConversionRejected("concentration and ratio scales admit no offset")
    if declared == DIMENSIONLESS and factor != 1:
        raise ConversionRejected("a ratio converts only by identity")
    # the round trip runs in floats: exact Fractions would pass anything
    for x in _PROBES:
        y = x * factor
        back = y / factor
        if not math.isfinite(y) or abs(x - back) > ROUND_TRIP_TOL * abs(x):
            raise ConversionRejected(f"round trip of {x} drifted to {back}")
    kind = MASS_TO_MOLAR if declared.startswith("mass") and canonical.split("/")[0].endswith("mol") else LINEAR
    used = (("molar_mass_g_per_mol", registry.molar_mass),) if kind == MASS_TO_MOLAR else ()
    return UnitConversion(from_unit, canonical, kind, Fraction(factor), Fraction(0), used)


Proposer = Callable[[str, MeasurementType], UnitConversion]


def convert_units(value: float, from_unit: str, mtype: MeasurementType, *,
                  registry: UnitRegistry | None = None,
                  proposer: Proposer | None = None) -> tuple[float, UnitConversion]:
    """Convert ``value`` in ``from_unit`` to the canonical unit of ``mtype``.

    Units the registry does not know are handed to ``proposer`` (normally a
    backend step that returns an already-vetted conversion).
    """
    registry = registry or default_registry()
    try:
        conv = registry.conversion(from_unit, mtype)
    except UnknownUnit:
        if proposer is None:
            raise
        conv = proposer(from_unit, mtype)
    return conv.apply(value), conv


@dataclass
class ProposalCache:
    """Per-run memo of vetted backend conversions, keyed by (unit, type)."""

    entries: dict[tuple[str, MeasurementType], UnitConversion] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def get_or_make(self, key, make):
        with self._lock:
            if key in self.entries:
                return self.entries[key]
        conv = make()
        with self._lock:
            return self.entries.setdefault(key, conv)
