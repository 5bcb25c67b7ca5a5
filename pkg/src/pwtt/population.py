"""Population exposure inside the damage mask.

The population raster (nominally 90 m) and the damage raster (10 m) live on
different grids. Each population pixel is attributed to the damage mask by
area majority: the mask {composite T > threshold} is integrated over the
population pixel's rectangle, and the pixel's people count is included when
the masked area exceeds half the pixel. Majority resampling keeps counts as
counts; interpolating a count measure would invent people.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import GeoGrid
from .ttest import TMap


@dataclass(frozen=True, eq=False)
class PopulationRaster:
    grid: GeoGrid
    values: np.ndarray  # people per pixel

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("population values must be finite")
        if (values < 0).any():
            raise ValueError("population values must be non-negative")
        object.__setattr__(self, "values", values)

    @property
    def total(self) -> float:
        return float(self.values.sum())


def _overlap_lengths(starts_a, size_a, starts_b, size_b) -> np.ndarray:
    """Pairwise 1-D interval overlap: rows = intervals a, cols = intervals b."""
    a0 = starts_a[:, None]
    a1 = a0 + size_a
    b0 = starts_b[None, :]
    b1 = b0 + size_b
    return np.clip(np.minimum(a1, b1) - np.maximum(a0, b0), 0.0, None)


def damage_mask(tmap: TMap, threshold: float) -> np.ndarray:
    """{composite T > threshold}; nodata pixels are outside the mask."""
    with np.errstate(invalid="ignore"):
        return np.isfinite(tmap.composite) & (tmap.composite > threshold)


def exposure(pop: PopulationRaster, tmap: TMap, threshold: float) -> float:
    """People inside the damage mask under the majority-overlap rule."""
    pg, tg = pop.grid, tmap.grid
    px0, py0, px1, py1 = pg.bounds
    tx0, ty0, tx1, ty1 = tg.bounds
    if px1 <= tx0 or tx1 <= px0 or py1 <= ty0 or ty1 <= py0:
        raise ValueError("population raster and T map extents are disjoint")

    mask = damage_mask(tmap, threshold).astype(np.float64)

    pop_col_x = pg.origin_x + np.arange(pg.width) * pg.pixel_size
    t_col_x = tg.origin_x + np.arange(tg.width) * tg.pixel_size
    # rows run north to south; use the south edge of each row as interval start
    pop_row_y = pg.origin_y - (np.arange(pg.height) + 1) * pg.pixel_size
    t_row_y = tg.origin_y - (np.arange(tg.height) + 1) * tg.pixel_size

    wx = _overlap_lengths(pop_col_x, pg.pixel_size, t_col_x, tg.pixel_size)  # (P_cols, T_cols)
    wy = _overlap_lengths(pop_row_y, pg.pixel_size, t_row_y, tg.pixel_size)  # (P_rows, T_rows)

    masked_area = wy @ mask @ wx.T  # (P_rows, P_cols)
    majority = masked_area > 0.5 * pg.pixel_size * pg.pixel_size
    return float(pop.values[majority].sum())
