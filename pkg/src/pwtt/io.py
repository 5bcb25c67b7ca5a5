"""GeoTIFF and manifest I/O.

Rasters travel as single-band float32 GeoTIFFs with a north-up affine
geotransform (ModelPixelScale + ModelTiepoint tags) and the GDAL nodata
convention. Scene metadata (acquisition time, orbit pass, polarization)
comes from a JSON manifest, never from filename parsing.
"""

from __future__ import annotations

import json
import re
from datetime import datetime
from pathlib import Path

import numpy as np
import tifffile

from .grids import GeoGrid, OrbitPass, Polarization, Scene

# GeoTIFF / GDAL tag codes
_MODEL_PIXEL_SCALE = 33550
_MODEL_TIEPOINT = 33922
_MODEL_TRANSFORMATION = 34264
_GEO_KEY_DIRECTORY = 34735
_GEO_ASCII_PARAMS = 34737
_GDAL_NODATA = 42113

_NODATA_SENTINEL = "nan"


class RasterFormatError(ValueError):
    """File is not a single-band float GeoTIFF with a usable geotransform."""


def _geokeys_for(crs_id: str) -> tuple[tuple, ...]:
    """Minimal GeoKey directory: model type + CRS code or citation."""
    keys = [(1024, 0, 1, 1)]  # GTModelTypeGeoKey = projected
    ascii_params = crs_id + "|"
    m = re.fullmatch(r"EPSG:(\d+)", crs_id, flags=re.IGNORECASE)
    if m:
        keys.append((3072, 0, 1, int(m.group(1))))  # ProjectedCSTypeGeoKey
    keys.append((1026, _GEO_ASCII_PARAMS, len(ascii_params), 0))  # GTCitationGeoKey
    header = (1, 1, 0, len(keys))
    directory = header + tuple(v for key in keys for v in key)
    return directory, ascii_params


def write_raster(values: np.ndarray, grid: GeoGrid, path, nodata_mask: np.ndarray | None = None) -> None:
    """Write a grid-aligned 2-D array as a float32 GeoTIFF.

    Masked cells are stored as NaN and flagged through the GDAL nodata tag,
    so a round-trip read recovers both values and mask bit-exactly.
    """
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ValueError(f"array shape {values.shape} does not match grid {grid.shape}")
    out = values.astype(np.float32, copy=True)
    if nodata_mask is not None:
        mask = np.asarray(nodata_mask, dtype=bool)
        if mask.shape != out.shape:
            raise ValueError("nodata_mask shape does not match values")
        out[mask] = np.nan
    directory, ascii_params = _geokeys_for(grid.crs_id)
    extratags = [
        (_MODEL_PIXEL_SCALE, "d", 3, (grid.pixel_size, grid.pixel_size, 0.0)),
        (_MODEL_TIEPOINT, "d", 6, (0.0, 0.0, 0.0, grid.origin_x, grid.origin_y, 0.0)),
        (_GEO_KEY_DIRECTORY, "H", len(directory), directory),
        (_GEO_ASCII_PARAMS, "s", 0, ascii_params),
        (_GDAL_NODATA, "s", 0, _NODATA_SENTINEL),
    ]
    tifffile.imwrite(path, out, extratags=extratags, software=None)


def read_raster(path) -> tuple[np.ndarray, np.ndarray, GeoGrid]:
    """Read a single-band float GeoTIFF.

    Returns ``(values, nodata_mask, grid)`` where masked cells hold NaN in
    ``values``. Rejects rotated/skewed geotransforms and non-float bands.
    """
    try:
        tf = tifffile.TiffFile(path)
    except (OSError, tifffile.TiffFileError) as exc:
        raise RasterFormatError(f"unreadable raster {path}: {exc}") from exc
    with tf:
        page = tf.pages[0]
        if page.samplesperpixel != 1:
            raise RasterFormatError(f"{path}: expected a single band, got {page.samplesperpixel}")
        values = page.asarray()
        if values.ndim != 2:
            raise RasterFormatError(f"{path}: expected a 2-D band")
        if not np.issubdtype(values.dtype, np.floating):
            raise RasterFormatError(f"{path}: band is {values.dtype}, expected floating point")

        if _MODEL_TRANSFORMATION in page.tags:
            t = page.tags[_MODEL_TRANSFORMATION].value
            if t[1] != 0.0 or t[4] != 0.0:
                raise RasterFormatError(f"{path}: rotated/skewed geotransform is not supported")
            sx, sy = t[0], -t[5]
            ox, oy = t[3], t[7]
        elif _MODEL_PIXEL_SCALE in page.tags and _MODEL_TIEPOINT in page.tags:
            scale = page.tags[_MODEL_PIXEL_SCALE].value
            tie = page.tags[_MODEL_TIEPOINT].value
            sx, sy = scale[0], scale[1]
            # tiepoint maps raster (i, j) to model (x, y); shift back to pixel (0, 0)
            ox = tie[3] - tie[0] * sx
            oy = tie[4] + tie[1] * sy
        else:
            raise RasterFormatError(f"{path}: no geotransform tags")
        if not np.isclose(sx, sy):
            raise RasterFormatError(f"{path}: non-square pixels ({sx} x {sy})")

        crs_id = ""
        if _GEO_ASCII_PARAMS in page.tags:
            crs_id = str(page.tags[_GEO_ASCII_PARAMS].value).split("|")[0].strip()

        mask = ~np.isfinite(values)
        if _GDAL_NODATA in page.tags:
            raw = str(page.tags[_GDAL_NODATA].value).strip().strip("\x00")
            try:
                sentinel = float(raw)
            except ValueError:
                sentinel = None
            if sentinel is not None and np.isfinite(sentinel):
                mask |= values == np.float32(sentinel)

        grid = GeoGrid(
            width=values.shape[1],
            height=values.shape[0],
            origin_x=float(ox),
            origin_y=float(oy),
            pixel_size=float(sx),
            crs_id=crs_id or "unknown",
        )
    out = np.array(values, dtype=np.float32)
    out[mask] = np.nan
    return out, mask, grid


def read_scene(
    path,
    acquired_at: datetime,
    orbit_pass: OrbitPass | str,
    polarization: Polarization | str,
) -> Scene:
    """Read one GeoTIFF into a Scene using the supplied acquisition metadata."""
    values, mask, grid = read_raster(path)
    values = values.copy()
    values[mask] = 0.0  # Scene requires finite values outside the mask
    return Scene(
        grid=grid,
        acquired_at=acquired_at,
        orbit_pass=OrbitPass(orbit_pass),
        polarization=Polarization(polarization),
        values=values,
        nodata_mask=mask,
    )


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 timestamp; a trailing Z is accepted as UTC."""
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


def load_manifest(path) -> list[Scene]:
    """Load scenes listed in a manifest JSON.

    The manifest is a list of ``{path, acquired_at, orbit_pass,
    polarization}`` entries; relative paths resolve against the manifest's
    directory.
    """
    path = Path(path)
    entries = json.loads(path.read_text())
    if not isinstance(entries, list):
        raise ValueError(f"{path}: manifest must be a JSON list")
    scenes = []
    for entry in entries:
        scene_path = Path(entry["path"])
        if not scene_path.is_absolute():
            scene_path = path.parent / scene_path
        scenes.append(
            read_scene(
                scene_path,
                acquired_at=parse_timestamp(entry["acquired_at"]),
                orbit_pass=entry["orbit_pass"],
                polarization=entry["polarization"],
            )
        )
    return scenes


def save_manifest(entries: list[dict], path) -> None:
    Path(path).write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n")
