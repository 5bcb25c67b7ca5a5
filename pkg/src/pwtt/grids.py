"""Georeferenced pixel grids, SAR scenes, and time-ordered scene stacks.

All rasters in a processing run share one :class:`GeoGrid`; co-registration
is a precondition, not something this package performs. Scenes and stacks
are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np


class OrbitPass(str, enum.Enum):
    ASCENDING = "ascending"
    DESCENDING = "descending"


class Polarization(str, enum.Enum):
    VV = "VV"
    VH = "VH"


class GridCompatibilityError(ValueError):
    """Rasters do not share the same georeferenced grid."""


@dataclass(frozen=True)
class GeoGrid:
    """Axis-aligned, north-up pixel grid in a projected CRS.

    ``origin_x``/``origin_y`` locate the *top-left corner* of pixel (0, 0)
    in CRS units (meters). Rows increase southward. Pixels are square.
    Two grids are compatible iff every field compares equal.
    """

    width: int
    height: int
    origin_x: float
    origin_y: float
    pixel_size: float
    crs_id: str = "EPSG:32636"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"grid dimensions must be positive, got {self.width}x{self.height}")
        if self.pixel_size <= 0:
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """Extent as (xmin, ymin, xmax, ymax)."""
        return (
            self.origin_x,
            self.origin_y - self.height * self.pixel_size,
            self.origin_x + self.width * self.pixel_size,
            self.origin_y,
        )

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Center coordinates: (xs indexed by column, ys indexed by row)."""
        xs = self.origin_x + (np.arange(self.width) + 0.5) * self.pixel_size
        ys = self.origin_y - (np.arange(self.height) + 0.5) * self.pixel_size
        return xs, ys

    def index_of(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) of the pixel containing a point; may lie outside the grid."""
        col = int(np.floor((x - self.origin_x) / self.pixel_size))
        row = int(np.floor((self.origin_y - y) / self.pixel_size))
        return row, col

    def contains_index(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = arr.copy()
    out.flags.writeable = False
    return out


def to_utc_naive(ts: datetime) -> datetime:
    """Normalize a timestamp to naive UTC so mixed inputs stay comparable."""
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts


@dataclass(frozen=True, eq=False)
class Scene:
    """One co-registered backscatter raster in dB with acquisition metadata.

    ``values`` is float32; ``nodata_mask`` is True where the pixel carries
    no observation. Values must be finite wherever unmasked.
    """

    grid: GeoGrid
    acquired_at: datetime
    orbit_pass: OrbitPass
    polarization: Polarization
    values: np.ndarray
    nodata_mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if self.nodata_mask is None:
            mask = np.zeros(values.shape, dtype=bool)
        else:
            mask = np.asarray(self.nodata_mask, dtype=bool)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if mask.shape != values.shape:
            raise ValueError("nodata_mask shape does not match values")
        if not np.all(np.isfinite(values[~mask])):
            raise ValueError("non-finite values outside the nodata mask")
        object.__setattr__(self, "acquired_at", to_utc_naive(self.acquired_at))
        object.__setattr__(self, "orbit_pass", OrbitPass(self.orbit_pass))
        object.__setattr__(self, "polarization", Polarization(self.polarization))
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "nodata_mask", _freeze(mask))


@dataclass(frozen=True, eq=False)
class SceneStack:
    """Scenes sorted by acquisition time on pairwise-compatible grids.

    May be empty (a stratum selection can come up dry); creation through
    :func:`stack_scenes` additionally rejects empty input.
    """

    scenes: tuple[Scene, ...]

    def __post_init__(self):
        scenes = tuple(self.scenes)
        for a, b in zip(scenes, scenes[1:]):
            if a.acquired_at > b.acquired_at:
                raise ValueError("scenes not sorted by acquisition time")
        grids = {s.grid for s in scenes}
        if len(grids) > 1:
            raise GridCompatibilityError(f"incompatible grids: {len(grids)} distinct grids in stack")
        object.__setattr__(self, "scenes", scenes)

    def __len__(self) -> int:
        return len(self.scenes)

    def __iter__(self):
        return iter(self.scenes)

    def __getitem__(self, i) -> Scene:
        return self.scenes[i]

    @property
    def grid(self) -> GeoGrid:
        if not self.scenes:
            raise ValueError("empty stack has no grid")
        return self.scenes[0].grid


def stack_scenes(scenes) -> SceneStack:
    """Assemble a stack: sort by acquisition time, verify grid compatibility."""
    scenes = list(scenes)
    if not scenes:
        raise ValueError("cannot stack zero scenes")
    scenes.sort(key=lambda s: s.acquired_at)
    return SceneStack(tuple(scenes))


def select_stratum(
    stack: SceneStack,
    orbit: OrbitPass | None = None,
    pol: Polarization | None = None,
    interval: tuple[datetime, datetime] | None = None,
) -> SceneStack:
    """Sub-stack matching orbit pass, polarization, and a [start, end) interval.

    ``None`` selectors match everything. The result may be empty; consumers
    decide whether that is an error.
    """
    selected = []
    if interval is not None:
        start, end = to_utc_naive(interval[0]), to_utc_naive(interval[1])
    for s in stack:
        if orbit is not None and s.orbit_pass != OrbitPass(orbit):
            continue
        if pol is not None and s.polarization != Polarization(pol):
            continue
        if interval is not None and not (start <= s.acquired_at < end):
            continue
        selected.append(s)
    return SceneStack(tuple(selected))


@dataclass(frozen=True)
class AnalysisWindow:
    """Reference and inference [start, end) intervals for the two-sample test."""

    reference: tuple[datetime, datetime]
    inference: tuple[datetime, datetime]

    def __post_init__(self):
        ref = tuple(to_utc_naive(t) for t in self.reference)
        inf = tuple(to_utc_naive(t) for t in self.inference)
        if not ref[0] < ref[1]:
            raise ValueError("reference interval is empty")
        if not inf[0] < inf[1]:
            raise ValueError("inference interval is empty")
        if ref[1] > inf[0]:
            raise ValueError("reference must end on or before the inference start")
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "inference", inf)
