"""Deterministic synthetic SAR stacks with known ground truth.

Scenes are built per acquisition as

    dB = base(class, orbit, pol) + static texture + seasonal sinusoid
         + event delta (after the event date, inside the event polygon)

then multiplied by gamma-distributed speckle in linear power and converted
back to dB. Every scene draws from its own RNG stream keyed on
(seed, scene index), so generation order or parallelism can never change
the output. Identical spec + seed means bit-identical scenes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

import numpy as np
import shapely

from .footprints import DamageAnnotation, Footprint, footprint_from_polygon
from .grids import AnalysisWindow, GeoGrid, OrbitPass, Polarization, Scene, SceneStack, stack_scenes

_SEASONAL_EPOCH = datetime(2020, 1, 1)


class SurfaceClass(enum.IntEnum):
    URBAN_DOUBLE_BOUNCE = 0
    FLAT_ROOF = 1
    VEGETATION = 2
    BARE = 3


# Building classes get static per-pixel texture; natural surfaces do not.
_TEXTURED = (SurfaceClass.URBAN_DOUBLE_BOUNCE, SurfaceClass.FLAT_ROOF)


def default_base_backscatter() -> dict:
    """dB level per surface class per (orbit, polarization).

    Cross-pol sits ~6 dB below co-pol; the two passes differ slightly from
    viewing geometry.
    """
    co = {
        SurfaceClass.URBAN_DOUBLE_BOUNCE: -3.0,
        SurfaceClass.FLAT_ROOF: -8.0,
        SurfaceClass.VEGETATION: -12.0,
        SurfaceClass.BARE: -16.0,
    }
    table = {}
    for cls, level in co.items():
        for orbit in OrbitPass:
            for pol in Polarization:
                value = level
                if pol == Polarization.VH:
                    value -= 6.0
                if orbit == OrbitPass.DESCENDING:
                    value -= 0.5
                table[(cls, orbit, pol)] = value
    return table


@dataclass(frozen=True)
class DamageEvent:
    footprint_id: str
    event_date: datetime
    delta_db: float
    polygon: shapely.Polygon


@dataclass(frozen=True)
class SimSpec:
    grid: GeoGrid
    class_map: np.ndarray
    base_backscatter: dict
    footprints: tuple[Footprint, ...] = ()
    events: tuple[DamageEvent, ...] = ()
    seasonal_amplitude: float = 0.4  # dB
    seasonal_period: float = 365.25  # days
    texture_std: float = 1.5  # dB, building classes only
    speckle_looks: float = 4.4  # math.inf disables noise
    revisit_days: dict = field(default_factory=lambda: {
        (orbit, pol): 12.0 for orbit in OrbitPass for pol in Polarization
    })
    seed: int = 0

    def __post_init__(self):
        class_map = np.asarray(self.class_map, dtype=np.uint8)
        if class_map.shape != self.grid.shape:
            raise ValueError("class_map shape does not match grid")
        if not self.speckle_looks > 0:
            raise ValueError("speckle_looks must be > 0 (use math.inf to disable noise)")
        for key, days in self.revisit_days.items():
            if not days > 0:
                raise ValueError(f"revisit_days must be positive, got {days} for {key}")
        gx0, gy0, gx1, gy1 = self.grid.bounds
        grid_box = shapely.box(gx0, gy0, gx1, gy1)
        for e in self.events:
            if not grid_box.contains(e.polygon):
                raise ValueError(f"event polygon for {e.footprint_id} falls outside the grid")
        object.__setattr__(self, "class_map", class_map)
        object.__setattr__(self, "footprints", tuple(self.footprints))
        object.__setattr__(self, "events", tuple(self.events))


@dataclass(frozen=True)
class SimOutput:
    stack: SceneStack
    footprints: tuple[Footprint, ...]
    annotations: tuple[DamageAnnotation, ...]
    truth: dict[str, bool]


def _class_lookup(class_map: np.ndarray, table: dict) -> np.ndarray:
    values = np.empty(class_map.shape, dtype=np.float64)
    for cls in SurfaceClass:
        values[class_map == cls] = table[cls]
    return values


def _seasonal(class_map: np.ndarray, amplitude: float, period: float, when: datetime) -> np.ndarray:
    t_days = (when - _SEASONAL_EPOCH).total_seconds() / 86400.0
    angle = 2.0 * math.pi * t_days / period
    out = np.empty(class_map.shape, dtype=np.float64)
    for cls in SurfaceClass:
        phase = float(cls) * math.pi / 2.0
        out[class_map == cls] = amplitude * math.sin(angle + phase)
    return out


def _rasterize_center(polygon: shapely.Polygon, grid: GeoGrid) -> np.ndarray:
    """Boolean map of pixels whose centers fall inside the polygon."""
    xs, ys = grid.pixel_centers()
    minx, miny, maxx, maxy = polygon.bounds
    cols = np.nonzero((xs >= minx - grid.pixel_size) & (xs <= maxx + grid.pixel_size))[0]
    rows = np.nonzero((ys >= miny - grid.pixel_size) & (ys <= maxy + grid.pixel_size))[0]
    mask = np.zeros(grid.shape, dtype=bool)
    if cols.size and rows.size:
        cx, cy = np.meshgrid(xs[cols], ys[rows])
        inside = shapely.contains_xy(polygon, cx.ravel(), cy.ravel()).reshape(cy.shape)
        mask[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1] = inside
    return mask


def simulate(spec: SimSpec, date_range: tuple[datetime, datetime]) -> SimOutput:
    """Generate the scene stack, footprints, annotations, and truth map."""
    start, end = date_range
    if not start < end:
        raise ValueError("empty date range")
    grid = spec.grid

    base = {
        (orbit, pol): _class_lookup(
            spec.class_map,
            {cls: spec.base_backscatter[(cls, orbit, pol)] for cls in SurfaceClass},
        )
        for orbit in OrbitPass
        for pol in Polarization
    }

    textured = np.isin(spec.class_map, [int(c) for c in _TEXTURED])
    texture = np.where(
        textured,
        np.random.default_rng((spec.seed, 0)).normal(0.0, spec.texture_std, grid.shape),
        0.0,
    )

    event_masks = [(_rasterize_center(e.polygon, grid), e) for e in spec.events]

    # Fixed acquisition plan: strata in enum order, staggered start, fixed cadence.
    plan: list[tuple[OrbitPass, Polarization, datetime]] = []
    for idx, (orbit, pol) in enumerate((o, p) for o in OrbitPass for p in Polarization):
        revisit = spec.revisit_days[(orbit, pol)]
        when = start + timedelta(days=3.0 * idx)
        while when < end:
            plan.append((orbit, pol, when))
            when = when + timedelta(days=revisit)

    scenes = []
    for scene_index, (orbit, pol, when) in enumerate(plan):
        clean = base[(orbit, pol)] + texture
        clean = clean + _seasonal(spec.class_map, spec.seasonal_amplitude, spec.seasonal_period, when)
        for mask, event in event_masks:
            if when >= event.event_date:
                clean = clean + np.where(mask, event.delta_db, 0.0)
        if math.isinf(spec.speckle_looks):
            values = clean
        else:
            rng = np.random.default_rng((spec.seed, 1 + scene_index))
            g = rng.gamma(shape=spec.speckle_looks, scale=1.0 / spec.speckle_looks, size=grid.shape)
            values = 10.0 * np.log10(10.0 ** (clean / 10.0) * g)
        scenes.append(
            Scene(
                grid=grid,
                acquired_at=when,
                orbit_pass=orbit,
                polarization=pol,
                values=values.astype(np.float32),
                nodata_mask=None,
            )
        )

    annotations = tuple(
        DamageAnnotation(
            point=e.polygon.centroid,
            annotation_date=e.event_date.date(),
            source="simulated",
        )
        for e in spec.events
    )
    event_ids = {e.footprint_id for e in spec.events}
    truth = {f.id: f.id in event_ids for f in spec.footprints}
    return SimOutput(
        stack=stack_scenes(scenes),
        footprints=spec.footprints,
        annotations=annotations,
        truth=truth,
    )


# ---------------------------------------------------------------------------
# Default city


@dataclass(frozen=True)
class CityScenario:
    spec: SimSpec
    window: AnalysisWindow
    date_range: tuple[datetime, datetime]
    war_start: datetime


def synthetic_city(
    size: int = 256,
    pixel_size: float = 10.0,
    seed: int = 0,
    damaged_fraction: float = 0.3,
    event_delta_db: float = 4.0,
    speckle_looks: float = 4.4,
    with_events: bool = True,
    city: str = "simville",
    country: str = "simland",
    origin: tuple[float, float] = (500000.0, 4650000.0),
    war_start: datetime = datetime(2023, 3, 1),
    clutter_count: int = 8,
) -> CityScenario:
    """A city-scale scenario: block-structured buildings, vegetation patches,
    a damage cluster with signed backscatter shifts, and the conventional
    one-year reference / two-month inference windows (~30 and ~5 scenes per
    stratum at the default 12-day cadence).
    """
    rng = np.random.default_rng((seed, 777))
    grid = GeoGrid(width=size, height=size, origin_x=origin[0], origin_y=origin[1],
                   pixel_size=pixel_size, crs_id="EPSG:32636")
    class_map = np.full((size, size), int(SurfaceClass.BARE), dtype=np.uint8)

    # vegetation patches around the fringe
    for _ in range(6):
        h = int(rng.integers(size // 8, size // 3))
        w = int(rng.integers(size // 8, size // 3))
        r = int(rng.integers(0, size - h))
        c = int(rng.integers(0, size - w))
        if rng.random() < 0.5:
            r = 0 if rng.random() < 0.5 else size - h
        else:
            c = 0 if rng.random() < 0.5 else size - w
        class_map[r : r + h, c : c + w] = int(SurfaceClass.VEGETATION)

    # building blocks on a jittered lattice inside the urban core
    margin = size // 10
    pitch = 10
    footprints: list[Footprint] = []
    centers = []
    count = 0
    for br in range(margin, size - margin - pitch, pitch):
        for bc in range(margin, size - margin - pitch, pitch):
            if rng.random() < 0.15:
                continue  # vacant lot
            h = int(rng.integers(2, 5))
            w = int(rng.integers(2, 5))
            r0 = br + int(rng.integers(1, pitch - h - 1))
            c0 = bc + int(rng.integers(1, pitch - w - 1))
            block = class_map[r0 : r0 + h, c0 : c0 + w]
            if (block != int(SurfaceClass.BARE)).any():
                continue
            cls = SurfaceClass.URBAN_DOUBLE_BOUNCE if rng.random() < 0.7 else SurfaceClass.FLAT_ROOF
            block[:] = int(cls)
            x0 = grid.origin_x + c0 * pixel_size
            y1 = grid.origin_y - r0 * pixel_size
            poly = shapely.box(x0, y1 - h * pixel_size, x0 + w * pixel_size, y1)
            footprints.append(footprint_from_polygon(f"b{count:04d}", poly, city, country))
            centers.append((r0 + h / 2.0, c0 + w / 2.0))
            count += 1

    # a handful of sub-pixel sheds (above the clutter cutoff, below one pixel)
    n_sheds = max(len(footprints) // 12, 1)
    for _ in range(n_sheds):
        r = int(rng.integers(margin, size - margin))
        c = int(rng.integers(margin, size - margin))
        if class_map[r, c] != int(SurfaceClass.BARE):
            continue
        cls = SurfaceClass.URBAN_DOUBLE_BOUNCE
        class_map[r, c] = int(cls)
        cx = grid.origin_x + (c + 0.5) * pixel_size
        cy = grid.origin_y - (r + 0.5) * pixel_size
        poly = shapely.box(cx - 4.0, cy - 4.0, cx + 4.0, cy + 4.0)  # 8 m x 8 m
        footprints.append(footprint_from_polygon(f"b{count:04d}", poly, city, country))
        centers.append((r + 0.5, c + 0.5))
        count += 1

    # clutter below the footprint area cutoff (cars, sheds, errant geometry)
    for _ in range(clutter_count):
        r = float(rng.uniform(margin, size - margin))
        c = float(rng.uniform(margin, size - margin))
        cx = grid.origin_x + c * pixel_size
        cy = grid.origin_y - r * pixel_size
        poly = shapely.box(cx - 3.0, cy - 2.5, cx + 3.0, cy + 2.5)  # 30 m^2
        footprints.append(footprint_from_polygon(f"b{count:04d}", poly, city, country))
        centers.append((r, c))
        count += 1

    events: list[DamageEvent] = []
    if with_events:
        evaluable = [
            (f, rc) for f, rc in zip(footprints, centers) if f.area >= 50.0
        ]
        cluster = np.asarray([size * 0.45, size * 0.55])
        sigma = size * 0.22
        target = int(round(damaged_fraction * len(evaluable)))
        scores = []
        for f, (r, c) in evaluable:
            d2 = (r - cluster[0]) ** 2 + (c - cluster[1]) ** 2
            scores.append(math.exp(-d2 / (2 * sigma**2)) + 0.12 * rng.random())
        order = np.argsort(scores)[::-1]
        for rank in order[:target]:
            f, _ = evaluable[rank]
            cls = SurfaceClass(class_map[
                grid.index_of(f.polygon.centroid.x, f.polygon.centroid.y)
            ])
            delta = -event_delta_db if cls == SurfaceClass.URBAN_DOUBLE_BOUNCE else event_delta_db
            events.append(
                DamageEvent(
                    footprint_id=f.id,
                    event_date=war_start + timedelta(days=int(rng.integers(0, 10))),
                    delta_db=delta,
                    polygon=f.polygon,
                )
            )

    spec = SimSpec(
        grid=grid,
        class_map=class_map,
        base_backscatter=default_base_backscatter(),
        footprints=tuple(footprints),
        events=tuple(events),
        speckle_looks=speckle_looks,
        seed=seed,
    )
    reference = (war_start - timedelta(days=365), war_start - timedelta(days=2))
    assessment = war_start + timedelta(days=14)
    inference = (assessment, assessment + timedelta(days=60))
    window = AnalysisWindow(reference=reference, inference=inference)
    date_range = (reference[0], inference[1] + timedelta(days=1))
    return CityScenario(spec=spec, window=window, date_range=date_range, war_start=war_start)


def synthetic_population(grid: GeoGrid, class_map: np.ndarray, seed: int = 0,
                         pixel_size: float = 90.0) -> "np.ndarray | tuple":
    """Coarse population raster over the same extent: people cluster where
    buildings are. Returns (values, pop_grid)."""
    from .grids import GeoGrid as _GeoGrid

    xmin, ymin, xmax, ymax = grid.bounds
    width = int(math.ceil((xmax - xmin) / pixel_size))
    height = int(math.ceil((ymax - ymin) / pixel_size))
    pop_grid = _GeoGrid(width=width, height=height, origin_x=xmin, origin_y=ymax,
                        pixel_size=pixel_size, crs_id=grid.crs_id)
    built = np.isin(class_map, [int(c) for c in _TEXTURED]).astype(np.float64)
    ratio = pixel_size / grid.pixel_size
    rng = np.random.default_rng((seed, 90))
    values = np.zeros((height, width))
    for r in range(height):
        for c in range(width):
            r0, r1 = int(r * ratio), min(int((r + 1) * ratio), grid.height)
            c0, c1 = int(c * ratio), min(int((c + 1) * ratio), grid.width)
            frac = built[r0:r1, c0:c1].mean() if r1 > r0 and c1 > c0 else 0.0
            values[r, c] = np.round(frac * 160.0 + rng.uniform(0.0, 2.0), 1)
    return values, pop_grid
