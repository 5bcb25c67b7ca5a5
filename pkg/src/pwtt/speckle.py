"""Lee MMSE speckle filter.

Multiplicative speckle is smoothed per scene before any temporal statistic.
The filter works on linear power internally (dB in, dB out): with window
mean m and window variance v of the power values,

    k = (v - v_noise) / v,  clamped to [0, 1],  v_noise = m^2 / looks
    out = m + k * (x - m)

so each output pixel is a convex combination of the window mean and the
center pixel. Windows are cropped at raster borders and masked pixels never
contribute to a neighbor's statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .grids import Scene


@dataclass(frozen=True)
class LeeParams:
    """window side = 2 * window_radius + 1; looks = equivalent number of looks."""

    window_radius: int = 3
    looks: float = 4.4

    def __post_init__(self):
        if self.window_radius < 1:
            raise ValueError(f"window_radius must be >= 1, got {self.window_radius}")
        if not self.looks > 0:
            raise ValueError(f"looks must be > 0, got {self.looks}")


def _window_sum(arr: np.ndarray, radius: int) -> np.ndarray:
    size = 2 * radius + 1
    return uniform_filter(arr, size=size, mode="constant", cval=0.0) * (size * size)


def lee_filter(scene: Scene, params: LeeParams = LeeParams()) -> Scene:
    """Return a despeckled copy of the scene on the same grid and mask."""
    valid = ~scene.nodata_mask
    power = np.where(valid, 10.0 ** (scene.values.astype(np.float64) / 10.0), 0.0)

    weights = valid.astype(np.float64)
    n = _window_sum(weights, params.window_radius)
    s1 = _window_sum(power, params.window_radius)
    s2 = _window_sum(power * power, params.window_radius)

    with np.errstate(invalid="ignore", divide="ignore"):
        m = s1 / n
        var = np.maximum(s2 / n - m * m, 0.0)
        var_noise = m * m / params.looks
        k = np.where(var > 0.0, np.clip(1.0 - var_noise / np.where(var > 0.0, var, 1.0), 0.0, 1.0), 0.0)
        out_power = m + k * (power - m)
        out_db = 10.0 * np.log10(out_power)

    out = np.where(valid, out_db, 0.0).astype(np.float32)
    return Scene(
        grid=scene.grid,
        acquired_at=scene.acquired_at,
        orbit_pass=scene.orbit_pass,
        polarization=scene.polarization,
        values=out,
        nodata_mask=scene.nodata_mask,
    )
