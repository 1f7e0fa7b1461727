"""1-degree ocean/land grid used by the geographic bounds check.

File format (see docs/ocean_mask.md): one header line starting with
``# compass-ocean-mask v1`` carrying ``key=value`` pairs, then 180 lines of
360 characters each, ``1`` = ocean and ``0`` = land.  Row 0 is the band
[89, 90) N, column 0 is [-180, -179) E.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

ROWS, COLS = 180, 360
MAGIC = "# compass-ocean-mask v1"


@dataclass(frozen=True)
class OceanMask:
    cells: tuple[str, ...]
    name: str = "ocean_1deg"
    resolution_note: str = "1 degree"
    source_note: str = ""

    def __post_init__(self):
        if len(self.cells) != ROWS or any(len(r) != COLS for r in self.cells):
            raise ValueError(f"ocean mask must be {ROWS}x{COLS}")

    @staticmethod
    def cell_index(lat: float, lon: float) -> tuple[int, int]:
        row = min(max(89 - math.floor(lat), 0), ROWS - 1)
        col = (math.floor(lon) + 180) % COLS
        return row, col

    def is_ocean(self, lat: float, lon: float) -> bool:
        row, col = self.cell_index(lat, lon)
        return self.cells[row][col] == "1"

    def dumps(self) -> str:
        header = (f"{MAGIC} name={self.name} rows={ROWS} cols={COLS} cell_deg=1 "
                  f"row0=89N..90N col0=180W..179W source={self.source_note.replace(' ', '_')}")
        return header + "\n" + "\n".join(self.cells) + "\n"


def parse_mask(text: str) -> OceanMask:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(MAGIC):
        raise ValueError("not an ocean mask file (bad header)")
    meta = dict(tok.split("=", 1) for tok in lines[0][len(MAGIC):].split() if "=" in tok)
    rows = [ln.strip() for ln in lines[1:] if ln.strip()]
    if any(set(r) - {"0", "1"} for r in rows):
        raise ValueError("ocean mask cells must be 0 or 1")
    return OceanMask(tuple(rows), name=meta.get("name", "ocean_1deg"),
                     source_note=meta.get("source", "").replace("_", " "))


def load_mask(path: str | Path | None = None) -> OceanMask:
    """Load a mask file; with no path, the bundled 1-degree mask."""
    if path is None:
        text = resources.files("compass").joinpath("data/ocean_mask_1deg.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return parse_mask(text)
