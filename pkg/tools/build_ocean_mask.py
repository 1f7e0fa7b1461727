"""Regenerate src/compass/data/ocean_mask_1deg.txt.

Needs the optional ``global-land-mask`` package (``pip install .[tools]``).
A cell is ocean when any of a 10x10 lattice of interior sample points is ocean,
so coastal cells stay usable for near-shore stations.
"""

from pathlib import Path

import numpy as np
from global_land_mask import globe

from compass.validate.ocean import COLS, ROWS, OceanMask

OUT = Path(__file__).resolve().parents[1] / "src/compass/data/ocean_mask_1deg.txt"
SUB = 10


def main():
    offsets = (np.arange(SUB) + 0.5) / SUB
    rows = []
    for r in range(ROWS):
        lat0 = 89 - r
        lats = lat0 + offsets
        line = []
        for c in range(COLS):
            lon0 = c - 180
            lon_grid, lat_grid = np.meshgrid(lon0 + offsets, lats)
            ocean = globe.is_ocean(lat_grid, lon_grid)
            line.append("1" if ocean.any() else "0")
        rows.append("".join(line))
    mask = OceanMask(tuple(rows), source_note="global-land-mask 1.0 (GLOBE 1km) any-ocean 10x10")
    OUT.write_text(mask.dumps(), encoding="utf-8")
    print(f"wrote {OUT} ({sum(r.count('1') for r in rows)} ocean cells)")


if __name__ == "__main__":
    main()
